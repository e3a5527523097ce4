/*
 Copyright 2026 The CuRPO Lab Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "curpo/analysis.hpp"
#include "curpo/grpo.hpp"
#include "curpo/taskgen.hpp"

using namespace curpo;
using namespace curpo::taskgen;

TEST(Taskgen, Deterministic) {
  const auto a = gen_dataset(50, 9);
  const auto b = gen_dataset(50, 9);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features, b[i].features);
    EXPECT_EQ(a[i].gt_box, b[i].gt_box);
    EXPECT_EQ(a[i].cots, b[i].cots);
    EXPECT_EQ(a[i].question, b[i].question);
  }
  EXPECT_NE(gen_dataset(50, 10)[0].features, a[0].features);
}

TEST(Taskgen, PerIdStreamsAreOrderIndependent) {
  const auto full = gen_dataset(40, 3);
  for (std::int64_t id : {39, 0, 17})
    EXPECT_EQ(gen_sample(id, 3, TaskConfig{}).features,
              full[static_cast<std::size_t>(id)].features);
}

TEST(Taskgen, Invariants) {
  const TaskConfig cfg;
  const auto data = gen_dataset(500, 1, cfg);
  ASSERT_EQ(data.size(), 500u);
  for (const auto& s : data) {
    ASSERT_EQ(s.features.size(), kFeatureDim);
    for (double f : s.features) ASSERT_TRUE(std::isfinite(f));
    const double d = s.features[kDifficultyFeature];
    ASSERT_GE(d, 0.0);
    ASSERT_LE(d, 1.0);
    ASSERT_TRUE(s.gt_box.canonical());
    ASSERT_GE(s.gt_box.x2 - s.gt_box.x1, cfg.min_side);
    ASSERT_GE(s.gt_box.y2 - s.gt_box.y1, cfg.min_side);
    ASSERT_GE(s.gt_box.x1, 0);
    ASSERT_LE(s.gt_box.x2, cfg.coord_max);
    ASSERT_LE(s.gt_box.y2, cfg.coord_max);
    ASSERT_EQ(s.cots.size(), cfg.cots_per_sample);
    ASSERT_GE(s.category, 0);
    ASSERT_LT(s.category, cfg.categories);
    ASSERT_EQ(s.question, question_for(s.category));
    for (const auto& c : s.cots) ASSERT_EQ(c.find("</think>"), std::string::npos);
  }
  EXPECT_THROW(gen_dataset(0, 1), std::invalid_argument);
  TaskConfig bad;
  bad.min_side = 0;
  EXPECT_THROW(gen_dataset(5, 1, bad), std::invalid_argument);
}

TEST(Taskgen, OracleExactAtZeroDifficulty) {
  TaskConfig cfg;
  cfg.feature_noise = 0.0;
  for (const auto& s : gen_dataset(200, 4, cfg))
    ASSERT_EQ(decode_features(s.features, cfg), s.gt_box);
}

TEST(Taskgen, OracleRewardFallsAcrossDifficultyDeciles) {
  const TaskConfig cfg;
  const auto data = gen_dataset(5000, 1, cfg);
  std::array<double, 10> sum{};
  std::array<int, 10> count{};
  for (const auto& s : data) {
    const double d = s.features[kDifficultyFeature];
    const auto decile = static_cast<std::size_t>(std::min(9.0, std::floor(d * 10)));
    sum[decile] += scale_giou(giou(decode_features(s.features, cfg), s.gt_box));
    ++count[decile];
  }
  for (std::size_t k = 1; k < 10; ++k)
    EXPECT_LT(sum[k] / count[k], sum[k - 1] / count[k - 1]) << "decile " << k;
}

TEST(Taskgen, CotLengthTracksDifficulty) {
  const TaskConfig cfg;
  Rng rng(5);
  auto mean_len = [&](double d) {
    const auto cots = gen_cots(d, 4000, cfg, rng);
    double s = 0;
    for (const auto& c : cots) {
      const auto n = cot_token_count(c);
      EXPECT_GE(n, 1u);
      s += static_cast<double>(n);
    }
    return s / static_cast<double>(cots.size());
  };
  EXPECT_NEAR(mean_len(0.0), 20.0, 1.0);
  EXPECT_NEAR(mean_len(1.0), 300.0, 1.5);

  std::set<std::size_t> bins;
  for (const auto& c : gen_cots(1.0, 200, cfg, rng)) bins.insert(cot_token_count(c) / 50);
  EXPECT_GE(bins.size(), 2u);

  TaskConfig wide = cfg;
  wide.cot_len_base = 0.0;
  wide.cot_len_sd = 40.0;
  for (const auto& c : gen_cots(0.0, 500, wide, rng)) EXPECT_GE(cot_token_count(c), 1u);
  EXPECT_THROW(gen_cots(0.5, 0, cfg, rng), std::invalid_argument);
}

TEST(Taskgen, DifficultyLengthCoupling) {
  const auto data = gen_dataset(500, 1);
  std::vector<double> d, len;
  for (const auto& s : data) {
    d.push_back(s.features[kDifficultyFeature]);
    len.push_back(avg_cot_length(s));
  }
  EXPECT_GT(analysis::spearman(d, len), 0.8);
}

TEST(Taskgen, HardSkewedDifficulty) {
  TaskConfig cfg;
  cfg.difficulty = DifficultyDistribution::HardSkewed;
  double s = 0;
  const auto data = gen_dataset(4000, 2, cfg);
  for (const auto& x : data) s += x.features[kDifficultyFeature];
  EXPECT_NEAR(s / static_cast<double>(data.size()), 5.0 / 7.0, 0.02);
}

TEST(ChainSuccess, Examples) {
  EXPECT_EQ(chain_success_prob({}), 1.0);
  const std::vector<double> three{0.9, 0.9, 0.9};
  EXPECT_NEAR(chain_success_prob(three), 0.729, 1e-15);
  const std::vector<double> zero{0.5, 0.0, 0.9};
  EXPECT_EQ(chain_success_prob(zero), 0.0);
  const std::vector<double> bad{0.5, 1.5};
  EXPECT_THROW(chain_success_prob(bad), std::invalid_argument);
}

TEST(ChainSuccess, StrictlyDecreasingWithLength) {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p;
    double prev = chain_success_prob(p);
    for (int k = 0; k < 20; ++k) {
      p.push_back(rng.uniform(0.01, 0.99));
      const double cur = chain_success_prob(p);
      ASSERT_LT(cur, prev);
      prev = cur;
    }
  }
}

TEST(ScoreRollouts, DeterministicAndBounded) {
  auto a = gen_dataset(100, 1);
  auto b = a;
  const auto params = nn::init(kFeatureDim, 64, 4, 16, 1);
  score_rollout_rewards(a, params, 8, OutputMode::CoT, 1);
  score_rollout_rewards(b, params, 8, OutputMode::CoT, 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_TRUE(a[i].rollout_rewards.has_value());
    EXPECT_EQ(*a[i].rollout_rewards, *b[i].rollout_rewards);
    ASSERT_EQ(a[i].rollout_rewards->size(), 8u);
    for (double r : *a[i].rollout_rewards) {
      EXPECT_GE(r, 0.0);
      EXPECT_LE(r, 3.0);
    }
  }
}

TEST(ScoreRollouts, LengthRewardCorrelationIsNegative) {
  auto data = gen_dataset(500, 1);
  score_rollout_rewards(data, nn::init(kFeatureDim, 64, 4, 16, 1), 8, OutputMode::CoT, 1);
  std::vector<double> len, reward;
  for (const auto& s : data) {
    len.push_back(avg_cot_length(s));
    reward.push_back(s.mean_rollout_reward());
  }
  EXPECT_LT(analysis::pearson(len, reward), 0.0);
}

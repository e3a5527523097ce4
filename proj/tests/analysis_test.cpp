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
#include <cmath>
#include <functional>

#include "curpo/analysis.hpp"
#include "curpo/rng.hpp"
#include "oracles.hpp"

using namespace curpo;
using namespace curpo::analysis;
using namespace curpo::testing;

namespace {

using Vec = std::vector<double>;

Vec random_values(Rng& rng, std::size_t n, int levels) {
  Vec v(n);
  for (auto& x : v)
    x = levels > 0 ? static_cast<double>(rng.below(static_cast<std::uint64_t>(levels)))
                   : rng.normal();
  return v;
}

EvalRecord with_iou(int category, double iou) {
  EvalRecord r;
  r.category = category;
  r.predicted = BBox{0, 0, 1, 1};
  r.iou = iou;
  return r;
}

}  // namespace

TEST(Pearson, Examples) {
  EXPECT_NEAR(pearson(Vec{1, 2, 3}, Vec{3, 2, 1}), -1.0, 1e-15);
  EXPECT_NEAR(pearson(Vec{1, 5, 2, 8}, Vec{1, 5, 2, 8}), 1.0, 1e-15);
  EXPECT_NEAR(pearson(Vec{1, 2, 3, 4}, Vec{1, 3, 2, 4}), 0.8, 1e-15);
}

TEST(Pearson, Errors) {
  EXPECT_THROW(pearson(Vec{1, 1, 1}, Vec{1, 2, 3}), UndefinedCorrelation);
  EXPECT_THROW(pearson(Vec{1, 2, 3}, Vec{4, 4, 4}), UndefinedCorrelation);
  EXPECT_THROW(pearson(Vec{1}, Vec{1}), std::invalid_argument);
  EXPECT_THROW(pearson(Vec{1, 2}, Vec{1, 2, 3}), std::invalid_argument);
}

TEST(Spearman, Examples) {
  EXPECT_NEAR(spearman(Vec{1, 2, 3, 4}, Vec{1, 8, 27, 64}), 1.0, 1e-15);
  EXPECT_NEAR(spearman(Vec{1, 2, 3, 4}, Vec{9, 7, 3, 0}), -1.0, 1e-15);
  const Vec x{1, 2, 2, 3}, y{1, 2, 3, 4};
  EXPECT_NEAR(spearman(x, y), 4.5 / std::sqrt(22.5), 1e-12);
  EXPECT_NEAR(spearman(x, y), brute_spearman(x, y), 1e-12);
  EXPECT_EQ(average_ranks(x), (Vec{1, 2.5, 2.5, 4}));
  EXPECT_THROW(spearman(Vec{2, 2, 2}, Vec{1, 2, 3}), UndefinedCorrelation);
}

TEST(Kendall, Examples) {
  EXPECT_EQ(kendall_tau(Vec{1, 2, 3, 4}, Vec{2, 4, 6, 8}), 1.0);
  EXPECT_EQ(kendall_tau(Vec{1, 2, 3, 4}, Vec{8, 6, 4, 2}), -1.0);
  EXPECT_THROW(kendall_tau(Vec{1, 1, 1}, Vec{1, 2, 3}), UndefinedCorrelation);
}

TEST(Kendall, MatchesPairCountingOracle) {
  Rng rng(12);
  for (int t = 0; t < 400; ++t) {
    const std::size_t n = 2 + rng.below(199);
    const int lx = t % 3 == 0 ? 0 : 2 + static_cast<int>(rng.below(10));
    const int ly = t % 5 == 0 ? 0 : 2 + static_cast<int>(rng.below(10));
    const Vec x = random_values(rng, n, lx), y = random_values(rng, n, ly);
    const bool flat = std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end() ||
                      std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end();
    if (flat) {
      EXPECT_THROW(kendall_tau(x, y), UndefinedCorrelation);
      continue;
    }
    ASSERT_EQ(kendall_tau(x, y), brute_kendall(x, y)) << "n=" << n;
  }
}

TEST(Correlations, MatchOraclesUnderFuzz) {
  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + rng.below(100);
    const Vec x = random_values(rng, n, t % 2 ? 6 : 0), y = random_values(rng, n, 0);
    EXPECT_NEAR(pearson(x, y), brute_pearson(x, y), 1e-12);
    EXPECT_NEAR(spearman(x, y), brute_spearman(x, y), 1e-12);
    EXPECT_EQ(average_ranks(x), brute_ranks(x));
  }
}

TEST(Correlations, InvariantUnderIncreasingMaps) {
  Rng rng(14);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 5 + rng.below(60);
    const Vec x = random_values(rng, n, t % 2 ? 5 : 0), y = random_values(rng, n, 0);
    Vec xa(n), ya(n), xm(n);
    for (std::size_t i = 0; i < n; ++i) {
      xa[i] = 3.0 * x[i] + 7.0;
      ya[i] = 0.5 * y[i] - 2.0;
      xm[i] = std::exp(x[i]);
    }
    EXPECT_NEAR(pearson(xa, ya), pearson(x, y), 1e-12);
    EXPECT_NEAR(spearman(xa, ya), spearman(x, y), 1e-12);
    EXPECT_NEAR(spearman(xm, y), spearman(x, y), 1e-12);
    EXPECT_NEAR(kendall_tau(xa, ya), kendall_tau(x, y), 1e-12);
    EXPECT_NEAR(kendall_tau(xm, y), kendall_tau(x, y), 1e-12);
  }
}

TEST(Correlations, Bounded) {
  Rng rng(15);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(20);
    const Vec x = random_values(rng, n, 0), y = random_values(rng, n, 0);
    for (double r : {pearson(x, y), spearman(x, y), kendall_tau(x, y)}) {
      EXPECT_GE(r, -1.0);
      EXPECT_LE(r, 1.0);
    }
  }
}

TEST(Miou, Examples) {
  std::vector<EvalRecord> perfect{with_iou(0, 1.0), with_iou(1, 1.0)};
  EXPECT_EQ(miou(perfect), 1.0);
  std::vector<EvalRecord> half{with_iou(0, 1.0), make_record(2, 0, std::nullopt, BBox{0, 0, 2, 2}, false)};
  EXPECT_EQ(miou(half), 0.5);
  std::vector<EvalRecord> one{with_iou(0, 0.3)};
  EXPECT_EQ(miou(one), 0.3);
  EXPECT_THROW(miou(std::vector<EvalRecord>{}), std::invalid_argument);

  const auto r = make_record(1, 3, BBox{0, 0, 2, 2}, BBox{1, 1, 3, 3}, true);
  EXPECT_NEAR(r.iou, 1.0 / 7.0, 1e-15);
}

TEST(Map, Examples) {
  const std::vector<EvalRecord> ones{with_iou(0, 1.0), with_iou(1, 1.0)};
  EXPECT_EQ(mean_average_precision(ones).map, 1.0);

  const std::vector<EvalRecord> sixes{with_iou(0, 0.6), with_iou(0, 0.6), with_iou(2, 0.6)};
  const auto rep = mean_average_precision(sixes);
  EXPECT_NEAR(rep.map, 0.3, 1e-15);
  EXPECT_EQ(rep.per_category.size(), 2u);
  EXPECT_EQ(rep.per_category[0].ap[2], 1.0);
  EXPECT_EQ(rep.per_category[0].ap[3], 0.0);

  const std::vector<EvalRecord> split{with_iou(0, 0.7), with_iou(0, 0.7), with_iou(1, 0.2)};
  EXPECT_NEAR(mean_average_precision(split).map, 0.25, 1e-15);

  const std::vector<int> declared{0, 1, 2};
  EXPECT_THROW(mean_average_precision(split, declared), std::invalid_argument);
  const std::vector<int> present{0, 1};
  EXPECT_NEAR(mean_average_precision(split, present).map, 0.25, 1e-15);
}

TEST(Map, Thresholds) {
  const auto t = default_thresholds();
  ASSERT_EQ(t.size(), 10u);
  EXPECT_EQ(t.front(), 0.5);
  EXPECT_EQ(t[1], 0.55);
  EXPECT_EQ(t.back(), 0.95);
}

TEST(Map, PermutationInvariantAndMonotone) {
  Rng rng(16);
  std::vector<EvalRecord> recs;
  for (int i = 0; i < 60; ++i) recs.push_back(with_iou(static_cast<int>(rng.below(4)), rng.uniform(0.0, 0.8)));
  const double base_map = mean_average_precision(recs).map;
  const double base_miou = miou(recs);
  for (int t = 0; t < 20; ++t) {
    rng.shuffle(recs.begin(), recs.end());
    EXPECT_DOUBLE_EQ(mean_average_precision(recs).map, base_map);
    EXPECT_NEAR(miou(recs), base_miou, 1e-15);
  }
  auto th = default_thresholds();
  th.resize(7);  // up to 0.80
  double prev = mean_average_precision(recs, th).map;
  for (double extra : {0.85, 0.9, 0.95}) {
    th.push_back(extra);
    const double cur = mean_average_precision(recs, th).map;
    EXPECT_LE(cur, prev);
    prev = cur;
  }
}

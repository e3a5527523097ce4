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

#include <array>
#include <cmath>

#include "curpo/policy.hpp"

using namespace curpo;

namespace {

nn::MlpParams zeroed(nn::MlpParams p) {
  for (std::size_t i = 0; i < p.size(); ++i) p.coord(i) = 0.0;
  return p;
}

// Heads read the input directly, so each head's logits are just its bias.
nn::MlpParams bias_only_policy(std::size_t classes, const std::array<nn::Vector, 4>& logits) {
  auto p = zeroed(nn::init_layers(2, {}, 4, classes, 0));
  for (std::size_t h = 0; h < 4; ++h) p.heads[h].bias = logits[h];
  return p;
}

const nn::Vector kX = nn::Vector::LinSpaced(8, -0.5, 0.5);

}  // namespace

TEST(Policy, ZeroParamsAreUniform) {
  const auto p = zeroed(nn::init(8, 16, 4, 16, 1));
  for (const auto& d : head_distributions(p, kX)) {
    ASSERT_EQ(d.size(), 16);
    for (Eigen::Index k = 0; k < 16; ++k) EXPECT_NEAR(d(k), 1.0 / 16.0, 1e-15);
  }
}

TEST(Policy, SoftmaxArithmetic) {
  nn::Vector z(2);
  z << 0.0, std::log(3.0);
  const auto p = bias_only_policy(2, {z, z, z, z});
  const auto d = head_distributions(p, nn::Vector::Zero(2));
  EXPECT_NEAR(d[0](0), 0.25, 1e-15);
  EXPECT_NEAR(d[0](1), 0.75, 1e-15);
}

TEST(Policy, DistributionsNormalizedUnderFuzz) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = nn::init(8, 12, 4, 7, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 0; i < p.size(); ++i) p.coord(i) *= 1.0 + 10.0 * rng.uniform();
    nn::Vector x(8);
    for (auto& v : x) v = rng.normal(0, 5);
    for (const auto& d : head_distributions(p, x)) {
      EXPECT_NEAR(d.sum(), 1.0, 1e-12);
      EXPECT_GE(d.minCoeff(), 0.0);
    }
  }
}

TEST(Policy, UniformLogProb) {
  const auto p = zeroed(nn::init(8, 16, 4, 16, 1));
  Rng rng(1);
  for (const auto& s : sample_group(p, kX, 8, rng))
    EXPECT_NEAR(s.log_prob, 4.0 * std::log(1.0 / 16.0), 1e-12);
  EXPECT_NEAR(log_prob(p, kX, BoxAction{{3, 2, 10, 12}}), -11.090354888959125, 1e-12);
}

TEST(Policy, DeterministicHeadsGiveIdenticalActions) {
  nn::Vector z = nn::Vector::Constant(5, -1e4);
  z(3) = 0.0;
  const auto p = bias_only_policy(5, {z, z, z, z});
  Rng rng(9);
  const auto group = sample_group(p, nn::Vector::Zero(2), 16, rng);
  for (const auto& s : group) EXPECT_EQ(s.action, (BoxAction{{3, 3, 3, 3}}));
}

TEST(Policy, SampleGroupRejectsSmallGroups) {
  const auto p = nn::init(8, 16, 4, 16, 1);
  Rng rng(1);
  EXPECT_THROW(sample_group(p, kX, 1, rng), std::invalid_argument);
}

// Monte-Carlo oracle: empirical head frequencies within 3 sigma (plus a
// small slack) of the exact probabilities.
TEST(Policy, EmpiricalFrequenciesMatch) {
  const auto p = nn::init(8, 16, 4, 6, 17);
  const auto dist = head_distributions(p, kX);
  Rng rng(23);
  constexpr int kDraws = 100000;
  std::array<std::array<int, 6>, 4> counts{};
  for (int done = 0; done < kDraws; done += 100)
    for (const auto& s : sample_group(p, kX, 100, rng))
      for (std::size_t h = 0; h < 4; ++h) ++counts[h][s.action.index[h]];
  for (std::size_t h = 0; h < 4; ++h)
    for (int k = 0; k < 6; ++k) {
      const double pk = dist[h](k);
      const double sigma = std::sqrt(kDraws * pk * (1 - pk));
      EXPECT_NEAR(counts[h][k], kDraws * pk, 3.0 * sigma + 1.0) << "head " << h << " class " << k;
    }
}

TEST(Policy, LogProbNormalizesOverActionSpace) {
  const auto p = nn::init(8, 16, 4, 4, 5);
  double total = 0.0;
  BoxAction a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          a.index = {i, j, k, l};
          const double lp = log_prob(p, kX, a);
          EXPECT_LE(lp, 0.0);
          total += std::exp(lp);
        }
  EXPECT_NEAR(total, 1.0, 1e-12);
  a.index = {0, 0, 0, 4};
  EXPECT_THROW(log_prob(p, kX, a), std::out_of_range);
  a.index = {-1, 0, 0, 0};
  EXPECT_THROW(log_prob(p, kX, a), std::out_of_range);
}

TEST(Policy, KlClosedForm) {
  const auto p = nn::init(8, 16, 4, 16, 1);
  EXPECT_NEAR(kl_to(p, snapshot(p, SnapshotRole::Reference), kX), 0.0, 1e-15);

  nn::Vector zp(2), zq(2);
  zp << std::log(3.0), 0.0;  // (0.75, 0.25)
  zq << 0.0, 0.0;            // (0.5, 0.5)
  const auto pp = bias_only_policy(2, {zp, zp, zp, zp});
  const auto qq = bias_only_policy(2, {zq, zq, zq, zq});
  EXPECT_NEAR(kl_to(pp, snapshot(qq, SnapshotRole::Reference), nn::Vector::Zero(2)),
              0.5232481437645479, 1e-12);

  EXPECT_THROW(kl_to(nn::init(8, 8, 4, 16, 1), snapshot(p, SnapshotRole::Reference), kX),
               std::invalid_argument);
}

TEST(Policy, KlNonNegativeUnderFuzz) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = nn::init(8, 10, 4, 5, rng.next());
    const auto q = nn::init(8, 10, 4, 5, rng.next());
    nn::Vector x(8);
    for (auto& v : x) v = rng.normal(0, 2);
    EXPECT_GE(kl_to(p, snapshot(q, SnapshotRole::Reference), x), 0.0);
  }
}

TEST(Policy, DecodeBox) {
  EXPECT_EQ(decode_box(BoxAction{{0, 0, 0, 0}}, 16, 16), (BBox{0, 0, 0, 0}));
  EXPECT_EQ(decode_box(BoxAction{{3, 2, 10, 12}}, 16, 16), (BBox{3, 2, 10, 12}));
  EXPECT_EQ(decode_box(BoxAction{{10, 12, 3, 2}}, 16, 16), (BBox{3, 2, 10, 12}));
  EXPECT_EQ(decode_box(BoxAction{{1, 2, 3, 0}}, 8, 16), (BBox{2, 0, 6, 4}));
  EXPECT_THROW(decode_box(BoxAction{}, 5, 16), std::invalid_argument);
}

TEST(Policy, SampledBoxesAreCanonical) {
  const auto p = nn::init(8, 16, 4, 16, 2);
  Rng rng(4);
  for (int i = 0; i < 200; ++i)
    for (const auto& s : sample_group(p, kX, 8, rng)) {
      const auto b = decode_box(s.action, 16, 16);
      ASSERT_TRUE(b.canonical());
      ASSERT_GE(b.x1, 0);
      ASSERT_LE(b.x2, 16);
    }
}

TEST(Policy, SnapshotIsImmutable) {
  auto p = nn::init(8, 16, 4, 16, 1);
  const auto snap = snapshot(p, SnapshotRole::Old);
  const BoxAction a{{1, 2, 3, 4}};
  const double before = log_prob(snap.params(), kX, a);
  EXPECT_EQ(std::exp(log_prob(p, kX, a) - before), 1.0);
  EXPECT_EQ(kl_to(p, snap, kX), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) p.coord(i) += 0.1;
  EXPECT_EQ(log_prob(snap.params(), kX, a), before);
  EXPECT_GT(kl_to(p, snap, kX), 0.0);
  EXPECT_EQ(snap.role(), SnapshotRole::Old);
}

TEST(Policy, WorkerStreamsReproduceSequentialOrder) {
  // Groups generated by per-slot streams do not depend on generation order.
  const auto p = nn::init(8, 16, 4, 16, 1);
  const std::uint64_t base = derive_seed(42, Stream::Rollout, 7);
  std::vector<std::vector<SampledAction>> forward, backward(5);
  for (std::uint64_t j = 0; j < 5; ++j) {
    Rng rng(worker_seed(base, j));
    forward.push_back(sample_group(p, kX, 8, rng));
  }
  for (std::uint64_t j = 5; j-- > 0;) {
    Rng rng(worker_seed(base, j));
    backward[j] = sample_group(p, kX, 8, rng);
  }
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(forward[j][i].action, backward[j][i].action);
}

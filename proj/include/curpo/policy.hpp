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

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "curpo/geom.hpp"
#include "curpo/nn.hpp"
#include "curpo/rng.hpp"

namespace curpo {

/// Factorized box policy: four independent categorical heads over the
/// x1, y1, x2, y2 grid indices.
inline constexpr std::size_t kBoxHeads = 4;

struct BoxAction {
  std::array<int, kBoxHeads> index{};  // ix1, iy1, ix2, iy2

  friend bool operator==(const BoxAction&, const BoxAction&) = default;
};

struct SampledAction {
  BoxAction action;
  double log_prob = 0.0;
};

using HeadDistributions = std::array<nn::Vector, kBoxHeads>;

namespace detail {

inline nn::Vector log_softmax(const nn::Vector& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return (z.array() - lse).matrix();
}

inline void require_box_policy(const nn::MlpParams& p) {
  if (p.num_heads() != kBoxHeads)
    throw std::invalid_argument("box policy needs exactly 4 heads, got " +
                                std::to_string(p.num_heads()));
}

}  // namespace detail

/// Per-head log-probabilities from a forward pass.
inline HeadDistributions head_log_probs(const std::vector<nn::Vector>& logits) {
  if (logits.size() != kBoxHeads)
    throw std::invalid_argument("head_log_probs: expected 4 heads");
  HeadDistributions out;
  for (std::size_t h = 0; h < kBoxHeads; ++h) out[h] = detail::log_softmax(logits[h]);
  return out;
}

inline HeadDistributions head_distributions(const nn::MlpParams& p,
                                            const nn::Vector& x) {
  detail::require_box_policy(p);
  HeadDistributions out = head_log_probs(nn::forward(p, x).logits);
  for (auto& v : out) v = v.array().exp().matrix();
  return out;
}

inline double action_log_prob(const HeadDistributions& log_probs,
                              const BoxAction& a) {
  double lp = 0.0;
  for (std::size_t h = 0; h < kBoxHeads; ++h) {
    const int k = a.index[h];
    if (k < 0 || k >= log_probs[h].size())
      throw std::out_of_range("BoxAction index " + std::to_string(k) +
                              " outside [0, " + std::to_string(log_probs[h].size()) +
                              ")");
    lp += log_probs[h](k);
  }
  return lp;
}

inline double log_prob(const nn::MlpParams& p, const nn::Vector& x,
                       const BoxAction& a) {
  detail::require_box_policy(p);
  return action_log_prob(head_log_probs(nn::forward(p, x).logits), a);
}

/// G independent draws; each head is sampled independently.
inline std::vector<SampledAction> sample_group(const nn::MlpParams& p,
                                               const nn::Vector& x,
                                               std::size_t group_size, Rng& rng) {
  if (group_size < 2)
    throw std::invalid_argument("sample_group: group size must be >= 2");
  detail::require_box_policy(p);
  const HeadDistributions logp = head_log_probs(nn::forward(p, x).logits);
  HeadDistributions probs;
  for (std::size_t h = 0; h < kBoxHeads; ++h) probs[h] = logp[h].array().exp().matrix();

  std::vector<SampledAction> out(group_size);
  for (auto& s : out) {
    for (std::size_t h = 0; h < kBoxHeads; ++h)
      s.action.index[h] = static_cast<int>(rng.categorical(
          std::span<const double>(probs[h].data(), static_cast<std::size_t>(probs[h].size()))));
    s.log_prob = action_log_prob(logp, s.action);
  }
  return out;
}

/// Argmax per head (first maximum wins).
inline BoxAction greedy_action(const nn::MlpParams& p, const nn::Vector& x) {
  detail::require_box_policy(p);
  const auto logits = nn::forward(p, x).logits;
  BoxAction a;
  for (std::size_t h = 0; h < kBoxHeads; ++h) {
    Eigen::Index best = 0;
    logits[h].maxCoeff(&best);
    a.index[h] = static_cast<int>(best);
  }
  return a;
}

/// Maps grid indices onto canvas coordinates (index * S/K), then swaps so
/// the box is canonical.
inline BBox decode_box(const BoxAction& a, int classes, int canvas) {
  if (classes <= 0 || canvas <= 0 || canvas % classes != 0)
    throw std::invalid_argument("decode_box: canvas must be a positive multiple of K");
  const int step = canvas / classes;
  return BBox{a.index[0] * step, a.index[1] * step, a.index[2] * step,
              a.index[3] * step}
      .canonicalized();
}

enum class SnapshotRole { Old, Reference };

/// Frozen copy of policy parameters. Shares storage between copies; the
/// parameters themselves can never be modified.
class PolicySnapshot {
 public:
  PolicySnapshot(const nn::MlpParams& p, SnapshotRole role)
      : params_(std::make_shared<const nn::MlpParams>(p)), role_(role) {}

  const nn::MlpParams& params() const noexcept { return *params_; }
  SnapshotRole role() const noexcept { return role_; }

 private:
  std::shared_ptr<const nn::MlpParams> params_;
  SnapshotRole role_;
};

inline PolicySnapshot snapshot(const nn::MlpParams& p, SnapshotRole role) {
  return PolicySnapshot(p, role);
}

/// Closed-form KL(p || q) of the factorized policy: the sum of per-head KLs.
inline double kl_from_log_probs(const HeadDistributions& logp,
                                const HeadDistributions& logq) {
  double kl = 0.0;
  for (std::size_t h = 0; h < kBoxHeads; ++h) {
    if (logp[h].size() != logq[h].size())
      throw std::invalid_argument("kl: head size mismatch");
    kl += (logp[h].array().exp() * (logp[h] - logq[h]).array()).sum();
  }
  return kl;
}

inline double kl_to(const nn::MlpParams& p, const PolicySnapshot& ref,
                    const nn::Vector& x) {
  if (!p.same_shape(ref.params()))
    throw std::invalid_argument("kl_to: architecture mismatch");
  detail::require_box_policy(p);
  return kl_from_log_probs(head_log_probs(nn::forward(p, x).logits),
                           head_log_probs(nn::forward(ref.params(), x).logits));
}

}  // namespace curpo

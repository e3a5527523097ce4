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

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curpo/rng.hpp"
#include "curpo/sample.hpp"

namespace curpo::curriculum {

enum class Criterion { Length, Reward, Random, LengthThenReward };

inline std::string_view to_string(Criterion c) noexcept {
  switch (c) {
    case Criterion::Length: return "length";
    case Criterion::Reward: return "reward";
    case Criterion::Random: return "random";
    case Criterion::LengthThenReward: return "length_then_reward";
  }
  return "?";
}

inline Criterion parse_criterion(std::string_view s) {
  if (s == "length") return Criterion::Length;
  if (s == "reward") return Criterion::Reward;
  if (s == "random") return Criterion::Random;
  if (s == "length_then_reward") return Criterion::LengthThenReward;
  throw std::invalid_argument("unknown criterion '" + std::string(s) +
                              "' (expected length|reward|random|length_then_reward)");
}

struct SortCriterion {
  Criterion kind = Criterion::Length;
  std::uint64_t seed = 0;    // Random only
  int bin_width = 50;        // LengthThenReward only, in tokens
  bool reward_ascending = false;  // literal ascending reward (hard first)

  void validate() const {
    if (bin_width < 1) throw std::invalid_argument("bin_width: must be >= 1");
  }
};

/// Lexicographic sort key. Single-valued criteria leave `secondary` at 0.
struct SortKey {
  double primary = 0.0;
  double secondary = 0.0;

  friend auto operator<=>(const SortKey&, const SortKey&) = default;
};

/// Ascending order of the key is easiest-first:
///   Length            avg CoT length
///   Reward            -mean rollout reward (high reward first)
///   Random            seeded hash of the id, uniform in [0, 1)
///   LengthThenReward  (floor(avg length / bin_width), -mean reward)
inline SortKey complexity_score(const Sample& s, const SortCriterion& c) {
  const double sign = c.reward_ascending ? 1.0 : -1.0;
  switch (c.kind) {
    case Criterion::Length:
      return {avg_cot_length(s), 0.0};
    case Criterion::Reward:
      return {sign * s.mean_rollout_reward(), 0.0};
    case Criterion::Random: {
      const std::uint64_t h =
          splitmix64(derive_seed(c.seed, Stream::Sort) ^ static_cast<std::uint64_t>(s.id));
      return {static_cast<double>(h >> 11) * 0x1.0p-53, 0.0};
    }
    case Criterion::LengthThenReward: {
      c.validate();
      const double bin = std::floor(avg_cot_length(s) / static_cast<double>(c.bin_width));
      return {bin, sign * s.mean_rollout_reward()};
    }
  }
  throw std::logic_error("unreachable criterion");
}

/// Stable ascending sort of sample positions by complexity key.
inline std::vector<std::size_t> sort_positions(std::span<const Sample> data,
                                               const SortCriterion& c) {
  std::vector<SortKey> keys;
  keys.reserve(data.size());
  for (const auto& s : data) keys.push_back(complexity_score(s, c));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&keys](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return order;
}

inline std::vector<std::int64_t> sort_dataset(std::span<const Sample> data,
                                              const SortCriterion& c) {
  std::vector<std::int64_t> ids;
  ids.reserve(data.size());
  for (std::size_t i : sort_positions(data, c)) ids.push_back(data[i].id);
  return ids;
}

/// Sorted ids cut into M contiguous phases.
struct CurriculumPlan {
  std::vector<std::int64_t> order;
  std::vector<std::size_t> boundaries;  // M + 1 offsets into `order`
  std::size_t steps_per_phase = 0;

  std::size_t num_phases() const noexcept {
    return boundaries.empty() ? 0 : boundaries.size() - 1;
  }

  /// Ids of phase m (1-based).
  std::span<const std::int64_t> phase(std::size_t m) const {
    if (m < 1 || m > num_phases()) throw std::out_of_range("phase index out of range");
    return std::span<const std::int64_t>(order).subspan(
        boundaries[m - 1], boundaries[m] - boundaries[m - 1]);
  }

  /// Ids trainable during phase m: D_m, or D_1..D_m when cumulative.
  std::span<const std::int64_t> active(std::size_t m, bool cumulative) const {
    if (!cumulative) return phase(m);
    if (m < 1 || m > num_phases()) throw std::out_of_range("phase index out of range");
    return std::span<const std::int64_t>(order).first(boundaries[m]);
  }

  std::vector<std::size_t> phase_sizes() const {
    std::vector<std::size_t> s;
    for (std::size_t m = 1; m < boundaries.size(); ++m)
      s.push_back(boundaries[m] - boundaries[m - 1]);
    return s;
  }
};

/// The first |D| mod M phases get one extra item.
inline CurriculumPlan split_phases(std::vector<std::int64_t> ordered, std::size_t phases) {
  if (phases < 1) throw std::invalid_argument("split_phases: M must be >= 1");
  if (phases > ordered.size())
    throw std::invalid_argument("split_phases: M (" + std::to_string(phases) +
                                ") exceeds dataset size (" +
                                std::to_string(ordered.size()) + ")");
  CurriculumPlan plan;
  const std::size_t base = ordered.size() / phases;
  const std::size_t extra = ordered.size() % phases;
  plan.boundaries.push_back(0);
  for (std::size_t m = 0; m < phases; ++m)
    plan.boundaries.push_back(plan.boundaries.back() + base + (m < extra ? 1 : 0));
  plan.order = std::move(ordered);
  return plan;
}

inline CurriculumPlan make_plan(std::span<const Sample> data, const SortCriterion& c,
                                std::size_t phases, std::size_t total_steps) {
  if (phases == 0 || total_steps % phases != 0)
    throw std::invalid_argument("total_steps must be divisible by phases");
  CurriculumPlan plan = split_phases(sort_dataset(data, c), phases);
  plan.steps_per_phase = total_steps / phases;
  return plan;
}

/// Phase (1-based) active at step t (1-based): ceil(t / (T / M)).
inline std::size_t phase_of_step(std::size_t t, std::size_t phases, std::size_t total_steps) {
  if (phases == 0 || total_steps % phases != 0)
    throw std::invalid_argument("phase_of_step: T must be divisible by M");
  if (t < 1 || t > total_steps) throw std::out_of_range("phase_of_step: t outside [1, T]");
  const std::size_t per = total_steps / phases;
  return (t + per - 1) / per;
}

inline std::size_t phase_of_step(std::size_t t, const CurriculumPlan& plan,
                                 std::size_t total_steps) {
  return phase_of_step(t, plan.num_phases(), total_steps);
}

}  // namespace curpo::curriculum

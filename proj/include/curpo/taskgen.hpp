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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "curpo/grpo.hpp"
#include "curpo/policy.hpp"
#include "curpo/rng.hpp"
#include "curpo/sample.hpp"

namespace curpo::taskgen {

// Feature layout of generated samples.
inline constexpr std::size_t kFeatureDim = 8;
inline constexpr std::size_t kDifficultyFeature = 4;

inline constexpr std::array<std::string_view, 8> kCategoryNames = {
    "person", "dog", "car", "chair", "cup", "bottle", "bird", "television"};

enum class DifficultyDistribution { Uniform, HardSkewed };  // U(0,1) / Beta(5,2)

struct TaskConfig {
  int canvas = 16;
  int coord_max = 15;       // largest corner coordinate (policy-reachable grid)
  int min_side = 2;
  double size_shrink = 0.8; // max side falls from coord_max to coord_max*(1-0.8) at d=1
  int categories = 8;
  double feature_noise = 0.08;  // geometry noise std at d = 1, in canvas units
  DifficultyDistribution difficulty = DifficultyDistribution::Uniform;
  std::size_t cots_per_sample = 8;
  double cot_len_base = 20.0;
  double cot_len_slope = 280.0;
  double cot_len_sd = 15.0;

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
    if (canvas < 2) fail("canvas: must be >= 2");
    if (coord_max < 1 || coord_max > canvas) fail("coord_max: must be in [1, canvas]");
    if (min_side < 1 || min_side > coord_max) fail("min_side: must be in [1, coord_max]");
    if (!(size_shrink >= 0.0 && size_shrink < 1.0)) fail("size_shrink: must be in [0, 1)");
    if (categories < 1 || categories > static_cast<int>(kCategoryNames.size()))
      fail("categories: must be in [1, 8]");
    if (!(feature_noise >= 0.0)) fail("feature_noise: must be >= 0");
    if (cots_per_sample < 1) fail("cots_per_sample: must be >= 1");
    if (!(cot_len_sd >= 0.0)) fail("cot_len_sd: must be >= 0");
  }
};

inline std::string question_for(int category) {
  return "Locate the " + std::string(kCategoryNames.at(static_cast<std::size_t>(category))) + ".";
}

/// Mean CoT token count at difficulty d.
inline double mean_cot_length(double d, const TaskConfig& cfg) {
  return cfg.cot_len_base + cfg.cot_len_slope * d;
}

namespace detail {

inline constexpr std::array<std::string_view, 12> kFillerVocab = {
    "first",  "inspect", "the",    "region", "near",  "object",
    "then",   "compare", "shape",  "and",    "check", "position"};

inline std::string filler_text(std::size_t tokens, std::size_t offset) {
  std::string out;
  for (std::size_t j = 0; j < tokens; ++j) {
    if (j) out += ' ';
    out += kFillerVocab[(j + offset) % kFillerVocab.size()];
  }
  return out;
}

// Beta(a, b) for integer a, b: the a-th smallest of a + b - 1 uniforms.
inline double beta_integer(Rng& rng, int a, int b) {
  std::vector<double> u(static_cast<std::size_t>(a + b - 1));
  for (auto& v : u) v = rng.uniform();
  std::nth_element(u.begin(), u.begin() + (a - 1), u.end());
  return u[static_cast<std::size_t>(a - 1)];
}

}  // namespace detail

/// G filler-token reasoning texts whose length tracks difficulty:
/// tokens ~ round(Normal(base + slope * d, sd)), at least 1.
inline std::vector<std::string> gen_cots(double difficulty, std::size_t count,
                                         const TaskConfig& cfg, Rng& rng) {
  if (count < 1) throw std::invalid_argument("gen_cots: count must be >= 1");
  std::vector<std::string> out;
  out.reserve(count);
  const double mu = mean_cot_length(difficulty, cfg);
  for (std::size_t i = 0; i < count; ++i) {
    const double draw = std::round(rng.normal(mu, cfg.cot_len_sd));
    const auto tokens = static_cast<std::size_t>(std::max(1.0, draw));
    out.push_back(detail::filler_text(tokens, i));
  }
  return out;
}

inline std::vector<std::string> gen_cots(const Sample& s, std::size_t count,
                                         const TaskConfig& cfg, Rng& rng) {
  if (s.features.size() <= kDifficultyFeature)
    throw std::invalid_argument("gen_cots: sample has no difficulty feature");
  return gen_cots(s.features[kDifficultyFeature], count, cfg, rng);
}

/// One sample from its own RNG stream, so generation is order-independent.
inline Sample gen_sample(std::int64_t id, std::uint64_t seed, const TaskConfig& cfg) {
  Rng rng(derive_seed(seed, Stream::Taskgen, static_cast<std::uint64_t>(id)));
  Sample s;
  s.id = id;

  const double d = cfg.difficulty == DifficultyDistribution::Uniform
                       ? rng.uniform()
                       : detail::beta_integer(rng, 5, 2);
  s.category = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.categories)));
  s.question = question_for(s.category);

  // Harder samples have smaller targets; sides lie in [min_side, max_side].
  const int max_side = std::max(
      cfg.min_side,
      static_cast<int>(std::lround(cfg.coord_max * (1.0 - cfg.size_shrink * d))));
  auto place = [&](int& lo, int& hi) {
    const int side = cfg.min_side +
                     static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side - cfg.min_side + 1)));
    lo = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.coord_max - side + 1)));
    hi = lo + side;
  };
  place(s.gt_box.x1, s.gt_box.x2);
  place(s.gt_box.y1, s.gt_box.y2);

  // Geometry features live in [-1, 1]: 2 * (pixels / S) - 1.
  const double S = cfg.canvas;
  const double sd = 2.0 * cfg.feature_noise * d;
  const std::array<double, 4> geometry = {
      (s.gt_box.x1 + s.gt_box.x2) / (2.0 * S), (s.gt_box.y1 + s.gt_box.y2) / (2.0 * S),
      (s.gt_box.x2 - s.gt_box.x1) / S, (s.gt_box.y2 - s.gt_box.y1) / S};
  s.features.reserve(kFeatureDim);
  for (double g : geometry) s.features.push_back(2.0 * g - 1.0 + sd * rng.normal());
  s.features.push_back(d);
  for (int k = 0; k < 3; ++k) s.features.push_back(d * rng.normal());

  Rng cot_rng(derive_seed(seed, Stream::Cots, static_cast<std::uint64_t>(id)));
  s.cots = gen_cots(d, cfg.cots_per_sample, cfg, cot_rng);
  return s;
}

inline std::vector<Sample> gen_dataset(std::size_t n, std::uint64_t seed,
                                       const TaskConfig& cfg = {}) {
  if (n < 1) throw std::invalid_argument("gen_dataset: n must be >= 1");
  cfg.validate();
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(gen_sample(static_cast<std::int64_t>(i), seed, cfg));
  return out;
}

/// Box read straight off the (noisy) geometry features. Exact at d = 0.
inline BBox decode_features(std::span<const double> features, const TaskConfig& cfg) {
  if (features.size() < 4) throw std::invalid_argument("decode_features: need 4 geometry features");
  const double S = cfg.canvas;
  auto px = [&](double v) {
    return std::clamp(static_cast<int>(std::lround(v * S)), 0, cfg.coord_max);
  };
  auto unit = [](double f) { return (f + 1.0) / 2.0; };
  const double cx = unit(features[0]), cy = unit(features[1]), w = unit(features[2]),
               h = unit(features[3]);
  return BBox{px(cx - w / 2), px(cy - h / 2), px(cx + w / 2), px(cy + h / 2)}.canonicalized();
}

/// Probability that a chain of independent steps all succeed.
inline double chain_success_prob(std::span<const double> step_probs) {
  double p = 1.0;
  for (double pc : step_probs) {
    if (!(pc >= 0.0 && pc <= 1.0))
      throw std::invalid_argument("chain_success_prob: step probability outside [0, 1]");
    p *= pc;
  }
  return p;
}

/// Fills rollout_rewards with G rewards per sample drawn from `params`
/// (the initial policy). Sample i uses its own stream derived from `seed`.
inline void score_rollout_rewards(std::span<Sample> data, const nn::MlpParams& params,
                                  std::size_t group_size, OutputMode mode,
                                  std::uint64_t seed, int canvas = 16) {
  grpo::GrpoConfig cfg;
  cfg.group_size = group_size;
  cfg.mode = mode;
  cfg.canvas = canvas;
  const PolicySnapshot policy = snapshot(params, SnapshotRole::Old);
  for (auto& s : data) {
    Rng rng(derive_seed(seed, Stream::Scoring, static_cast<std::uint64_t>(s.id)));
    const auto group = grpo::generate_group(s, policy, cfg, rng);
    s.rollout_rewards = group.rewards();
  }
}

}  // namespace curpo::taskgen

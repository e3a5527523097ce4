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
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curpo/geom.hpp"
#include "curpo/nn.hpp"
#include "curpo/policy.hpp"
#include "curpo/rng.hpp"
#include "curpo/sample.hpp"
#include "curpo/textformat.hpp"

namespace curpo::grpo {

struct RewardBreakdown {
  double giou_raw = 0.0;
  double r_visual = 0.0;
  double r_format = 0.0;
  double r_total = 0.0;
};

/// R_visual + R_format. The parsed box is clamped onto the canvas before
/// scoring; an absent box earns no visual reward.
inline RewardBreakdown combined_reward(const ParsedOutput& parsed, const BBox& gt,
                                       OutputMode mode, int canvas = 16) {
  RewardBreakdown r;
  if (parsed.box) {
    r.giou_raw = giou(parsed.box->clamped(canvas), gt);
    r.r_visual = scale_giou(r.giou_raw);
  }
  r.r_format = format_reward(parsed, mode);
  r.r_total = r.r_visual + r.r_format;
  return r;
}

struct GroupStats {
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by G)
};

inline GroupStats group_stats(std::span<const double> rewards) {
  if (rewards.size() < 2)
    throw std::invalid_argument("group statistics need G >= 2");
  GroupStats s;
  for (double r : rewards) s.mean += r;
  s.mean /= static_cast<double>(rewards.size());
  double ss = 0.0;
  for (double r : rewards) ss += (r - s.mean) * (r - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(rewards.size()));
  return s;
}

/// (r_i - mean) / std over the group. Groups with std <= sigma_min carry no
/// preference and get all-zero advantages.
inline std::vector<double> group_advantages(std::span<const double> rewards,
                                            double sigma_min = 1e-8) {
  const GroupStats s = group_stats(rewards);
  std::vector<double> adv(rewards.size(), 0.0);
  if (s.stddev <= sigma_min) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i)
    adv[i] = (rewards[i] - s.mean) / s.stddev;
  return adv;
}

namespace detail {

inline double clip_ratio(double c, double eps) noexcept {
  return std::clamp(c, 1.0 - eps, 1.0 + eps);
}

// True when min(cA, clip(c)A) takes the clipped branch with a strictly
// smaller value; the surrogate is then flat in c.
inline bool clip_active(double c, double adv, double eps) noexcept {
  return clip_ratio(c, eps) * adv < c * adv;
}

}  // namespace detail

inline double clipped_term(double ratio, double advantage, double eps) {
  if (!(ratio > 0.0)) throw std::invalid_argument("clipped_term: ratio must be positive");
  return std::min(ratio * advantage, detail::clip_ratio(ratio, eps) * advantage);
}

enum class Optimizer { Sgd, Adam };

struct GrpoConfig {
  std::size_t group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 0.04;
  double sigma_min = 1e-8;
  double learning_rate = 1.0;
  std::size_t total_steps = 600;
  std::size_t phases = 3;
  std::size_t batch_size = 16;
  std::size_t updates_per_generation = 1;
  Optimizer optimizer = Optimizer::Sgd;
  OutputMode mode = OutputMode::CoT;
  int canvas = 16;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
    if (group_size < 2) fail("group_size: must be >= 2");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) fail("clip_eps: must be in (0, 1)");
    if (!(kl_beta >= 0.0)) fail("kl_beta: must be >= 0");
    if (!(sigma_min >= 0.0)) fail("sigma_min: must be >= 0");
    if (!(learning_rate > 0.0)) fail("learning_rate: must be > 0");
    if (phases < 1) fail("phases: must be >= 1");
    if (total_steps < 1) fail("total_steps: must be >= 1");
    if (total_steps % phases != 0)
      fail("total_steps: must be divisible by phases (" + std::to_string(total_steps) +
           " % " + std::to_string(phases) + " != 0)");
    if (batch_size < 1) fail("batch_size: must be >= 1");
    if (updates_per_generation < 1) fail("updates_per_generation: must be >= 1");
    if (canvas < 1) fail("canvas: must be >= 1");
  }
};

struct Candidate {
  BoxAction action;
  std::string text;
  ParsedOutput parsed;
  RewardBreakdown reward;
  double logp_old = 0.0;
  double logp_current = 0.0;
  double advantage = 0.0;
  double ratio = 1.0;
};

/// G candidates for one sample plus the group statistics.
struct GroupRollout {
  std::int64_t sample_id = 0;
  nn::Vector features;
  std::vector<Candidate> candidates;
  double mean = 0.0;
  double stddev = 0.0;

  std::vector<double> rewards() const {
    std::vector<double> r;
    r.reserve(candidates.size());
    for (const auto& c : candidates) r.push_back(c.reward.r_total);
    return r;
  }

  /// Recomputes group statistics and advantages from the candidates' rewards.
  void normalize(double sigma_min) {
    const auto r = rewards();
    const GroupStats s = group_stats(r);
    mean = s.mean;
    stddev = s.stddev;
    const auto adv = group_advantages(r, sigma_min);
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].advantage = adv[i];
  }
};

/// Text the harness emits for a sampled box: the bare answer in direct mode,
/// or the sample's i-th pre-generated reasoning (cyclic) wrapped in think tags.
inline std::string render_candidate(const Sample& s, const BBox& box,
                                    OutputMode mode, std::size_t i) {
  if (mode == OutputMode::Direct) return render_direct(box);
  const std::string think = s.cots.empty() ? std::string{} : s.cots[i % s.cots.size()];
  return render_cot(think, box);
}

/// Draws G candidates from `old` for sample `s` and scores them.
inline GroupRollout generate_group(const Sample& s, const PolicySnapshot& old,
                                   const GrpoConfig& cfg, Rng& rng) {
  GroupRollout g;
  g.sample_id = s.id;
  g.features = s.feature_vector();
  const int classes = static_cast<int>(old.params().classes());
  const auto draws = sample_group(old.params(), g.features, cfg.group_size, rng);
  g.candidates.reserve(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    Candidate c;
    c.action = draws[i].action;
    c.text = render_candidate(s, decode_box(c.action, classes, cfg.canvas), cfg.mode, i);
    c.parsed = parse_output(c.text, cfg.mode);
    c.reward = combined_reward(c.parsed, s.gt_box, cfg.mode, cfg.canvas);
    c.logp_old = draws[i].log_prob;
    c.logp_current = draws[i].log_prob;
    g.candidates.push_back(std::move(c));
  }
  g.normalize(cfg.sigma_min);
  return g;
}

struct ObjectiveResult {
  double objective = 0.0;  // mean clipped surrogate - beta * mean KL
  double surrogate = 0.0;
  double kl = 0.0;         // mean over the batch
  double clip_fraction = 0.0;
  nn::Gradients gradient;  // ascent direction
};

/// J(theta) = 1/(|B| G) sum_b sum_i min(c_i A_i, clip(c_i) A_i)
///            - beta * 1/|B| sum_b KL(pi_theta || pi_ref)
/// with its exact gradient. Updates `logp_current` and `ratio` on the
/// candidates when `batch` is mutable.
inline ObjectiveResult objective_and_grad(std::span<GroupRollout> batch,
                                          const nn::MlpParams& p,
                                          const PolicySnapshot& ref,
                                          const GrpoConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("objective_and_grad: empty batch");
  if (!p.same_shape(ref.params()))
    throw std::invalid_argument("objective_and_grad: reference architecture mismatch");

  ObjectiveResult out;
  out.gradient = nn::Gradients::zeros_like(p);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::size_t n_candidates = 0;
  std::size_t n_clipped = 0;

  for (auto& group : batch) {
    if (group.candidates.empty())
      throw std::invalid_argument("objective_and_grad: empty group");
    const auto fwd = nn::forward(p, group.features);
    const HeadDistributions logp = head_log_probs(fwd.logits);
    const HeadDistributions logq =
        head_log_probs(nn::forward(ref.params(), group.features).logits);

    HeadDistributions probs;
    std::vector<nn::Vector> dlogits(kBoxHeads);
    for (std::size_t h = 0; h < kBoxHeads; ++h) {
      probs[h] = logp[h].array().exp().matrix();
      dlogits[h] = nn::Vector::Zero(logp[h].size());
    }

    const double scale = inv_batch / static_cast<double>(group.candidates.size());
    for (auto& cand : group.candidates) {
      const double lp = action_log_prob(logp, cand.action);
      const double c = std::exp(lp - cand.logp_old);
      const double a = cand.advantage;
      cand.logp_current = lp;
      cand.ratio = c;
      out.surrogate += scale * std::min(c * a, detail::clip_ratio(c, cfg.clip_eps) * a);
      ++n_candidates;
      if (detail::clip_active(c, a, cfg.clip_eps)) {
        ++n_clipped;
        continue;
      }
      // d(c A)/d logits_h = c A (onehot(a_h) - p_h)
      const double w = scale * c * a;
      if (w == 0.0) continue;
      for (std::size_t h = 0; h < kBoxHeads; ++h) {
        dlogits[h] -= w * probs[h];
        dlogits[h](cand.action.index[h]) += w;
      }
    }

    // dKL_h/dz_j = p_j (log p_j - log q_j - KL_h)
    double kl = 0.0;
    for (std::size_t h = 0; h < kBoxHeads; ++h) {
      const nn::Vector diff = logp[h] - logq[h];
      const double kl_h = (probs[h].array() * diff.array()).sum();
      kl += kl_h;
      if (cfg.kl_beta != 0.0)
        dlogits[h] -= (cfg.kl_beta * inv_batch) *
                      (probs[h].array() * (diff.array() - kl_h)).matrix();
    }
    out.kl += inv_batch * kl;

    nn::backward_accumulate(p, fwd.cache, dlogits, out.gradient);
  }

  out.objective = out.surrogate - cfg.kl_beta * out.kl;
  out.clip_fraction =
      static_cast<double>(n_clipped) / static_cast<double>(n_candidates);
  return out;
}

/// Objective value only (no gradient); used by finite-difference checks.
inline double objective_value(std::span<const GroupRollout> batch,
                              const nn::MlpParams& p, const PolicySnapshot& ref,
                              const GrpoConfig& cfg) {
  std::vector<GroupRollout> copy(batch.begin(), batch.end());
  return objective_and_grad(copy, p, ref, cfg).objective;
}

/// Mini-batches drawn without replacement within an epoch over a fixed pool.
/// A new shuffled epoch starts when fewer than a full batch remain.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> pool, std::uint64_t seed)
      : pool_(std::move(pool)), rng_(seed) {
    if (pool_.empty()) throw std::invalid_argument("BatchSampler: empty phase");
  }

  std::vector<std::size_t> next(std::size_t batch_size) {
    const std::size_t b = std::min(batch_size, pool_.size());
    if (cursor_ + b > order_.size()) {
      order_ = pool_;
      rng_.shuffle(order_.begin(), order_.end());
      cursor_ = 0;
    }
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + b));
    cursor_ += b;
    return out;
  }

  const std::vector<std::size_t>& pool() const noexcept { return pool_; }

 private:
  std::vector<std::size_t> pool_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

struct IterationMetrics {
  std::size_t step = 0;
  std::size_t phase = 0;
  double mean_reward = 0.0;
  double mean_visual = 0.0;
  double mean_format = 0.0;
  double mean_abs_adv = 0.0;
  double clip_frac = 0.0;
  double kl = 0.0;
  double objective = 0.0;
};

/// Mutable training state: the live parameters, the fixed reference policy
/// and optional Adam moments.
struct TrainState {
  nn::MlpParams params;
  PolicySnapshot ref;
  std::optional<nn::Adam> adam;

  TrainState(nn::MlpParams initial, const GrpoConfig& cfg)
      : params(std::move(initial)), ref(params, SnapshotRole::Reference) {
    if (cfg.optimizer == Optimizer::Adam) adam.emplace(params, cfg.learning_rate);
  }
};

using GroupObserver = std::function<void(const GroupRollout&)>;

/// One generation plus `updates_per_generation` ascent steps:
/// snapshot pi_old, draw a mini-batch from the active phase, roll out G
/// candidates per sample, then step theta along grad J. Batch slot j uses
/// the RNG stream worker_seed(rollout_seed, j).
inline IterationMetrics train_iteration(std::span<const Sample> data,
                                        BatchSampler& sampler, TrainState& state,
                                        const GrpoConfig& cfg,
                                        std::uint64_t rollout_seed,
                                        const GroupObserver& observer = {}) {
  const PolicySnapshot old = snapshot(state.params, SnapshotRole::Old);
  const auto batch_idx = sampler.next(cfg.batch_size);

  std::vector<GroupRollout> groups;
  groups.reserve(batch_idx.size());
  for (std::size_t j = 0; j < batch_idx.size(); ++j) {
    Rng rng(worker_seed(rollout_seed, j));
    groups.push_back(generate_group(data[batch_idx[j]], old, cfg, rng));
  }

  IterationMetrics m;
  std::size_t n = 0;
  for (const auto& g : groups)
    for (const auto& c : g.candidates) {
      m.mean_reward += c.reward.r_total;
      m.mean_visual += c.reward.r_visual;
      m.mean_format += c.reward.r_format;
      m.mean_abs_adv += std::abs(c.advantage);
      ++n;
    }
  m.mean_reward /= static_cast<double>(n);
  m.mean_visual /= static_cast<double>(n);
  m.mean_format /= static_cast<double>(n);
  m.mean_abs_adv /= static_cast<double>(n);

  for (std::size_t u = 0; u < cfg.updates_per_generation; ++u) {
    ObjectiveResult r = objective_and_grad(groups, state.params, state.ref, cfg);
    m.clip_frac = r.clip_fraction;
    m.kl = r.kl;
    m.objective = r.objective;
    if (state.adam)
      state.adam->step(state.params, r.gradient);
    else
      state.params.add_scaled(r.gradient, cfg.learning_rate);
  }

  if (observer)
    for (const auto& g : groups) observer(g);
  return m;
}

}  // namespace curpo::grpo

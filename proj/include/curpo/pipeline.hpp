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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "curpo/analysis.hpp"
#include "curpo/config.hpp"
#include "curpo/curriculum.hpp"
#include "curpo/grpo.hpp"
#include "curpo/io.hpp"
#include "curpo/log.hpp"
#include "curpo/nn.hpp"
#include "curpo/policy.hpp"
#include "curpo/sample.hpp"
#include "curpo/taskgen.hpp"

namespace curpo::pipeline {

inline constexpr std::string_view kMetricsHeader =
    "step,phase,mean_reward,mean_visual,mean_format,mean_abs_adv,clip_frac,kl,objective";

inline std::string metrics_csv(std::span<const grpo::IterationMetrics> rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& m : rows) {
    out += std::to_string(m.step) + ',' + std::to_string(m.phase);
    for (double v : {m.mean_reward, m.mean_visual, m.mean_format, m.mean_abs_adv,
                     m.clip_frac, m.kl, m.objective})
      out += ',' + io::format_double(v);
    out += '\n';
  }
  return out;
}

inline nn::MlpParams initial_params(std::size_t input_dim, const RunConfig& cfg) {
  return nn::init(input_dim, cfg.model.hidden, kBoxHeads, cfg.model.classes, cfg.seed);
}

inline bool criterion_needs_rewards(curriculum::Criterion c) {
  return c == curriculum::Criterion::Reward || c == curriculum::Criterion::LengthThenReward;
}

/// Fills missing rollout rewards with G draws from the initial policy.
inline void ensure_rollout_rewards(std::vector<Sample>& data, const nn::MlpParams& initial,
                                   const RunConfig& cfg) {
  std::vector<Sample*> missing;
  for (auto& s : data)
    if (!s.rollout_rewards) missing.push_back(&s);
  if (missing.empty()) return;
  log::info("scoring " + std::to_string(missing.size()) +
            " samples with the initial policy");
  for (Sample* s : missing)
    taskgen::score_rollout_rewards(std::span<Sample>(s, 1), initial, cfg.grpo.group_size,
                                   cfg.grpo.mode, cfg.seed, cfg.grpo.canvas);
}

struct TrainHooks {
  /// Called for every rollout group after its update, with the 1-based step
  /// and active phase.
  std::function<void(std::size_t step, std::size_t phase, const grpo::GroupRollout&)> on_group;
};

struct TrainResult {
  nn::MlpParams initial;
  nn::MlpParams final_params;
  curriculum::CurriculumPlan plan;
  std::vector<grpo::IterationMetrics> metrics;
};

/// The full curriculum loop: score, sort, split into M phases, then T/M
/// GRPO iterations per phase on that phase's samples.
inline TrainResult train(std::vector<Sample> data, const RunConfig& cfg,
                         const std::optional<io::Manifest>& manifest = std::nullopt,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const std::size_t input_dim = data.front().features.size();
  for (const auto& s : data)
    if (s.features.size() != input_dim)
      throw std::invalid_argument("train: inconsistent feature dimensions");

  TrainResult result{initial_params(input_dim, cfg), {}, {}, {}};

  if (manifest) {
    if (manifest->phases != cfg.grpo.phases)
      throw std::invalid_argument("manifest has M=" + std::to_string(manifest->phases) +
                                  " but config has phases=" + std::to_string(cfg.grpo.phases));
    result.plan = manifest->plan();
  } else {
    if (criterion_needs_rewards(cfg.criterion.kind))
      ensure_rollout_rewards(data, result.initial, cfg);
    result.plan = curriculum::split_phases(curriculum::sort_dataset(data, cfg.criterion),
                                           cfg.grpo.phases);
  }
  result.plan.steps_per_phase = cfg.grpo.total_steps / cfg.grpo.phases;

  std::unordered_map<std::int64_t, std::size_t> position;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!position.emplace(data[i].id, i).second)
      throw std::invalid_argument("train: duplicate sample id " + std::to_string(data[i].id));

  grpo::TrainState state(result.initial, cfg.grpo);
  const std::size_t per_phase = result.plan.steps_per_phase;
  for (std::size_t m = 1; m <= result.plan.num_phases(); ++m) {
    std::vector<std::size_t> pool;
    for (std::int64_t id : result.plan.active(m, cfg.cumulative_phases)) {
      auto it = position.find(id);
      if (it == position.end())
        throw std::invalid_argument("plan references unknown sample id " + std::to_string(id));
      pool.push_back(it->second);
    }
    grpo::BatchSampler sampler(std::move(pool), derive_seed(cfg.seed, Stream::Batch, m));
    log::info("phase " + std::to_string(m) + ": " + std::to_string(sampler.pool().size()) +
              " samples, " + std::to_string(per_phase) + " steps");

    for (std::size_t t = 1; t <= per_phase; ++t) {
      const std::size_t step = (m - 1) * per_phase + t;
      grpo::GroupObserver obs;
      if (hooks.on_group)
        obs = [&hooks, step, m](const grpo::GroupRollout& g) { hooks.on_group(step, m, g); };
      auto metrics = grpo::train_iteration(data, sampler, state, cfg.grpo,
                                           derive_seed(cfg.seed, Stream::Rollout, step), obs);
      metrics.step = step;
      metrics.phase = m;
      result.metrics.push_back(metrics);
      if (step % 100 == 0)
        log::debug("step " + std::to_string(step) + " mean_reward " +
                   io::format_double(metrics.mean_reward));
    }
  }
  result.final_params = std::move(state.params);
  return result;
}

// ---------------------------------------------------------------- eval

struct EvalReport {
  std::vector<analysis::EvalRecord> records;
  double miou = 0.0;
  analysis::MapReport map;
  double well_formed_rate = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n"] = records.size();
    j["miou"] = miou;
    j["map"] = map.map;
    j["well_formed_rate"] = well_formed_rate;
    j["thresholds"] = map.thresholds;
    auto& cats = j["per_category"];
    cats = nlohmann::ordered_json::array();
    for (const auto& c : map.per_category) {
      nlohmann::ordered_json row;
      row["category"] = c.category;
      row["count"] = c.count;
      row["ap"] = c.ap;
      row["mean_ap"] = c.mean_ap;
      cats.push_back(row);
    }
    return j;
  }

  std::string summary() const {
    std::ostringstream os;
    os << "samples          " << records.size() << '\n'
       << "mIoU             " << io::format_double(miou) << " (x100: "
       << io::format_double(100.0 * miou) << ")\n"
       << "mAP@[.50:.95]    " << io::format_double(map.map) << " (x100: "
       << io::format_double(100.0 * map.map) << ")\n"
       << "well-formed rate " << io::format_double(well_formed_rate) << '\n';
    for (const auto& c : map.per_category)
      os << "  category " << c.category << " (n=" << c.count
         << ") AP " << io::format_double(c.mean_ap) << '\n';
    return os.str();
  }
};

/// Greedy evaluation: argmax per head, rendered and re-parsed so the format
/// path is exercised. With `oracle`, the ground-truth box is emitted instead.
inline EvalReport evaluate(const nn::MlpParams& params, std::span<const Sample> data,
                           OutputMode mode, int canvas = 16, bool oracle = false) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalReport rep;
  std::size_t well_formed = 0;
  for (const auto& s : data) {
    if (!oracle && s.features.size() != params.input_dim())
      throw std::invalid_argument("evaluate: sample " + std::to_string(s.id) + " has " +
                                  std::to_string(s.features.size()) +
                                  " features but params expect " +
                                  std::to_string(params.input_dim()));
    const BBox box = oracle ? s.gt_box
                            : decode_box(greedy_action(params, s.feature_vector()),
                                         static_cast<int>(params.classes()), canvas);
    const auto parsed = parse_output(grpo::render_candidate(s, box, mode, 0), mode);
    std::optional<BBox> pred;
    if (parsed.box) pred = parsed.box->clamped(canvas);
    if (parsed.well_formed) ++well_formed;
    rep.records.push_back(analysis::make_record(s.id, s.category, pred, s.gt_box, parsed.well_formed));
  }
  rep.miou = analysis::miou(rep.records);
  rep.map = analysis::mean_average_precision(rep.records);
  rep.well_formed_rate = static_cast<double>(well_formed) / static_cast<double>(data.size());
  return rep;
}

// ---------------------------------------------------------------- stats

struct LengthBin {
  std::size_t bin = 0;
  std::size_t count = 0;
  double mean_length = 0.0;
  double mean_reward = 0.0;
};

struct CorrelationReport {
  std::size_t n = 0;
  double pearson = 0.0;
  double spearman = 0.0;
  double kendall = 0.0;
  int bin_width = 50;
  std::vector<LengthBin> bins;

  std::string bins_csv() const {
    std::string out = "bin,lo,hi,count,mean_length,mean_reward\n";
    for (const auto& b : bins) {
      out += std::to_string(b.bin) + ',' + std::to_string(b.bin * bin_width) + ',' +
             std::to_string((b.bin + 1) * bin_width) + ',' + std::to_string(b.count) + ',' +
             io::format_double(b.mean_length) + ',' + io::format_double(b.mean_reward) + '\n';
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n"] = n;
    j["pearson"] = pearson;
    j["spearman"] = spearman;
    j["kendall_tau_b"] = kendall;
    j["bin_width"] = bin_width;
    return j;
  }
};

/// Correlations of (average CoT length, mean rollout reward) plus a binned
/// length -> reward table.
inline CorrelationReport correlation_report(std::span<const Sample> data, int bin_width = 50) {
  if (bin_width < 1) throw std::invalid_argument("bin_width: must be >= 1");
  std::vector<double> len, rew;
  for (const auto& s : data) {
    len.push_back(avg_cot_length(s));
    rew.push_back(s.mean_rollout_reward());
  }
  CorrelationReport rep;
  rep.n = data.size();
  rep.bin_width = bin_width;
  rep.pearson = analysis::pearson(len, rew);
  rep.spearman = analysis::spearman(len, rew);
  rep.kendall = analysis::kendall_tau(len, rew);

  std::map<std::size_t, LengthBin> bins;
  for (std::size_t i = 0; i < len.size(); ++i) {
    const auto b = static_cast<std::size_t>(std::floor(len[i] / bin_width));
    auto& e = bins[b];
    e.bin = b;
    ++e.count;
    e.mean_length += len[i];
    e.mean_reward += rew[i];
  }
  for (auto& [b, e] : bins) {
    e.mean_length /= static_cast<double>(e.count);
    e.mean_reward /= static_cast<double>(e.count);
    rep.bins.push_back(e);
  }
  return rep;
}

}  // namespace curpo::pipeline

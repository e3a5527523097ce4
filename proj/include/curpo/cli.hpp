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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "curpo/config.hpp"
#include "curpo/io.hpp"
#include "curpo/log.hpp"
#include "curpo/pipeline.hpp"
#include "curpo/taskgen.hpp"

#ifndef CURPO_VERSION
#define CURPO_VERSION "unknown"
#endif

namespace curpo::cli {

/// Bad arguments or invalid input for the requested command (exit code 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline std::string_view version() noexcept { return CURPO_VERSION; }

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace detail

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::size_t n = 500;
  std::uint64_t seed = 1;
  std::filesystem::path out;
  taskgen::TaskConfig task;
  bool score = false;              // fill rollout_rewards with the initial policy
  std::uint64_t model_seed = 1;    // seed of the initial policy used for scoring
  std::size_t group_size = 8;
  std::size_t hidden = 64;
  std::size_t classes = 16;
  OutputMode mode = OutputMode::CoT;
};

inline std::vector<Sample> cmd_gen(const GenOptions& o, std::ostream& report = std::cout) {
  if (o.n < 1) throw UsageError("--n: must be >= 1");
  if (o.out.empty()) throw UsageError("--out: required");
  if (o.group_size < 2) throw UsageError("--group-size: must be >= 2");
  try {
    o.task.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto data = taskgen::gen_dataset(o.n, o.seed, o.task);
  if (o.score) {
    const auto params = nn::init(taskgen::kFeatureDim, o.hidden, kBoxHeads, o.classes, o.model_seed);
    taskgen::score_rollout_rewards(data, params, o.group_size, o.mode, o.model_seed,
                                   o.task.canvas);
  }
  io::write_dataset_file(o.out, data);
  std::size_t tokens = 0, cots = 0;
  for (const auto& s : data)
    for (auto c : s.token_counts()) {
      tokens += c;
      ++cots;
    }
  report << "wrote " << data.size() << " samples (" << cots << " CoTs, mean "
         << io::format_double(static_cast<double>(tokens) / static_cast<double>(cots))
         << " tokens" << (o.score ? ", scored" : "") << ") to " << o.out.string() << '\n';
  return data;
}

// ---------------------------------------------------------------- sort

struct SortOptions {
  std::filesystem::path in;
  std::filesystem::path out;
  curriculum::SortCriterion criterion;
  std::size_t phases = 3;
};

inline io::Manifest cmd_sort(const SortOptions& o, std::ostream& report = std::cout) {
  if (o.in.empty() || o.out.empty()) throw UsageError("--in and --out are required");
  if (o.criterion.bin_width < 1) throw UsageError("--bin-width: must be >= 1");
  const auto data = io::read_dataset_file(o.in, io::DatasetNeeds::SortingOnly);
  if (data.empty()) throw UsageError("input dataset is empty");
  if (o.phases < 1 || o.phases > data.size())
    throw UsageError("--phases: must be in [1, " + std::to_string(data.size()) + "]");
  io::Manifest m;
  try {
    m = io::make_manifest(data, o.criterion, o.phases);
  } catch (const MissingStatistic& e) {
    throw UsageError(std::string("criterion '") +
                     std::string(curriculum::to_string(o.criterion.kind)) +
                     "' needs field '" + e.field() + "': " + e.what());
  }
  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + o.out.string() + "'");
  io::write_manifest(out, m);
  report << "sorted " << m.entries.size() << " samples by "
         << curriculum::to_string(o.criterion.kind) << " into " << m.phases << " phases\n";
  return m;
}

// ---------------------------------------------------------------- train

inline pipeline::TrainResult cmd_train(const RunConfig& cfg, std::ostream& report = std::cout,
                                       const pipeline::TrainHooks& hooks = {}) {
  auto data = io::read_dataset_file(cfg.dataset, io::DatasetNeeds::Full);
  std::optional<io::Manifest> manifest;
  if (cfg.manifest) {
    std::ifstream in(*cfg.manifest);
    if (!in) throw std::runtime_error("cannot open manifest '" + cfg.manifest->string() + "'");
    manifest = io::read_manifest(in, cfg.manifest->string());
  }

  pipeline::TrainResult result;
  try {
    result = pipeline::train(std::move(data), cfg, manifest, hooks);
  } catch (const MissingStatistic& e) {
    throw UsageError(e.what());
  }

  std::filesystem::create_directories(cfg.output_dir);
  detail::write_text(cfg.output_dir / "metrics.csv", pipeline::metrics_csv(result.metrics));
  io::write_params_file(cfg.output_dir / "params.bin", result.final_params);
  io::write_params_file(cfg.output_dir / "initial_params.bin", result.initial);

  nlohmann::ordered_json run;
  run["version"] = std::string(version());
  run["config"] = cfg.to_json();
  run["phase_sizes"] = result.plan.phase_sizes();
  run["steps_per_phase"] = result.plan.steps_per_phase;
  if (!result.metrics.empty()) {
    const auto& last = result.metrics.back();
    run["final"] = {{"mean_reward", last.mean_reward}, {"kl", last.kl}};
  }
  detail::write_text(cfg.output_dir / "run.json", run.dump(2) + "\n");

  report << "trained " << result.metrics.size() << " steps over "
         << result.plan.num_phases() << " phases; outputs in " << cfg.output_dir.string()
         << '\n';
  return result;
}

inline pipeline::TrainResult cmd_train(const std::filesystem::path& config_path,
                                       std::ostream& report = std::cout) {
  return cmd_train(load_run_config(config_path), report);
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::optional<std::filesystem::path> params;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> out;
  OutputMode mode = OutputMode::CoT;
  int canvas = 16;
  bool oracle = false;
};

inline pipeline::EvalReport cmd_eval(const EvalOptions& o, std::ostream& report = std::cout) {
  if (o.dataset.empty()) throw UsageError("--dataset: required");
  if (!o.oracle && !o.params) throw UsageError("--params is required unless --oracle is given");
  const auto data = io::read_dataset_file(o.dataset, io::DatasetNeeds::Full);
  if (data.empty()) throw UsageError("dataset is empty");

  nn::MlpParams params;
  if (o.params) {
    params = io::read_params_file(*o.params);
    if (params.num_heads() != kBoxHeads)
      throw UsageError("params file does not describe a 4-head box policy");
    if (o.canvas % static_cast<int>(params.classes()) != 0)
      throw UsageError("--canvas must be a multiple of the policy's class count");
    for (const auto& s : data)
      if (s.features.size() != params.input_dim())
        throw UsageError("feature dimension mismatch: dataset has " +
                         std::to_string(s.features.size()) + ", params expect " +
                         std::to_string(params.input_dim()));
  }
  auto rep = pipeline::evaluate(params, data, o.mode, o.canvas, o.oracle);
  if (o.out) detail::write_text(*o.out, rep.to_json().dump(2) + "\n");
  report << rep.summary();
  return rep;
}

// ---------------------------------------------------------------- stats

struct StatsOptions {
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> out_csv;
  std::optional<std::filesystem::path> out_json;
  int bin_width = 50;
};

inline pipeline::CorrelationReport cmd_stats(const StatsOptions& o,
                                             std::ostream& report = std::cout) {
  if (o.dataset.empty()) throw UsageError("--dataset: required");
  const auto data = io::read_dataset_file(o.dataset, io::DatasetNeeds::SortingOnly);
  pipeline::CorrelationReport rep;
  try {
    rep = pipeline::correlation_report(data, o.bin_width);
  } catch (const MissingStatistic& e) {
    throw UsageError(e.what());
  }
  if (o.out_csv) detail::write_text(*o.out_csv, rep.bins_csv());
  if (o.out_json) detail::write_text(*o.out_json, rep.to_json().dump(2) + "\n");
  report << "n        " << rep.n << '\n'
         << "pearson  " << io::format_double(rep.pearson) << '\n'
         << "spearman " << io::format_double(rep.spearman) << '\n'
         << "kendall  " << io::format_double(rep.kendall) << '\n';
  return rep;
}

}  // namespace curpo::cli

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
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "curpo/curriculum.hpp"
#include "curpo/grpo.hpp"
#include "curpo/textformat.hpp"

namespace curpo {

/// Invalid configuration. The message starts with the dotted key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  std::size_t hidden = 64;
  std::size_t classes = 16;
};

/// Everything a training run reads. Relative paths in a config file resolve
/// against the file's directory.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path dataset;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> manifest;
  curriculum::SortCriterion criterion;
  bool cumulative_phases = false;
  grpo::GrpoConfig grpo;
  ModelConfig model;

  void validate() const {
    try {
      grpo.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("grpo.") + e.what());
    }
    if (criterion.bin_width < 1) throw ConfigError("curriculum.bin_width: must be >= 1");
    if (model.hidden < 1) throw ConfigError("model.hidden: must be >= 1");
    if (model.classes < 1) throw ConfigError("model.classes: must be >= 1");
    if (grpo.canvas % static_cast<int>(model.classes) != 0)
      throw ConfigError("model.canvas: must be a multiple of model.classes");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["dataset"] = dataset.string();
    j["output_dir"] = output_dir.string();
    j["mode"] = std::string(to_string(grpo.mode));
    auto& c = j["curriculum"];
    c["criterion"] = std::string(curriculum::to_string(criterion.kind));
    c["bin_width"] = criterion.bin_width;
    c["phases"] = grpo.phases;
    c["cumulative_phases"] = cumulative_phases;
    c["reward_ascending"] = criterion.reward_ascending;
    c["random_seed"] = criterion.seed;
    if (manifest) c["manifest"] = manifest->string();
    auto& g = j["grpo"];
    g["group_size"] = grpo.group_size;
    g["clip_eps"] = grpo.clip_eps;
    g["kl_beta"] = grpo.kl_beta;
    g["sigma_min"] = grpo.sigma_min;
    g["learning_rate"] = grpo.learning_rate;
    g["total_steps"] = grpo.total_steps;
    g["batch_size"] = grpo.batch_size;
    g["updates_per_generation"] = grpo.updates_per_generation;
    g["optimizer"] = grpo.optimizer == grpo::Optimizer::Adam ? "adam" : "sgd";
    auto& m = j["model"];
    m["hidden"] = model.hidden;
    m["classes"] = model.classes;
    m["canvas"] = grpo.canvas;
    return j;
  }
};

namespace detail {

// Reads one JSON object level, rejecting unknown keys and wrong types with
// the full dotted path in the message.
class ConfigSection {
 public:
  ConfigSection(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + "must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_integer() || it->template get<std::int64_t>() < 0)
          throw ConfigError(where(key) + "must be a non-negative integer");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_integer()) throw ConfigError(where(key) + "must be an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError(where(key) + "must be a number");
      }
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where(key) + "has the wrong type");
    }
  }

  std::optional<ConfigSection> child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return std::nullopt;
    return ConfigSection(*it, path_.empty() ? key : path_ + "." + key);
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where(it.key().c_str()) + "unknown key");
  }

  std::string where(const char* key) const {
    std::string p = path_;
    if (*key) p += (p.empty() ? "" : ".") + std::string(key);
    return (p.empty() ? std::string("<root>") : p) + ": ";
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {}) {
  RunConfig c;
  detail::ConfigSection root(j, "");
  root.get("seed", c.seed);
  c.criterion.seed = c.seed;

  std::string dataset, output_dir, mode = "cot";
  root.get("dataset", dataset);
  root.get("output_dir", output_dir);
  root.get("mode", mode);
  if (dataset.empty()) throw ConfigError("dataset: required");
  if (output_dir.empty()) throw ConfigError("output_dir: required");
  try {
    c.grpo.mode = parse_output_mode(mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mode: ") + e.what());
  }
  auto resolve = [&base_dir](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  c.dataset = resolve(dataset);
  c.output_dir = resolve(output_dir);

  if (auto cur = root.child("curriculum")) {
    std::string criterion = "length", manifest;
    cur->get("criterion", criterion);
    try {
      c.criterion.kind = curriculum::parse_criterion(criterion);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("curriculum.criterion: ") + e.what());
    }
    cur->get("bin_width", c.criterion.bin_width);
    cur->get("phases", c.grpo.phases);
    cur->get("cumulative_phases", c.cumulative_phases);
    cur->get("reward_ascending", c.criterion.reward_ascending);
    cur->get("random_seed", c.criterion.seed);
    cur->get("manifest", manifest);
    if (!manifest.empty()) c.manifest = resolve(manifest);
    cur->reject_unknown();
  }

  if (auto g = root.child("grpo")) {
    std::string optimizer = "sgd";
    g->get("group_size", c.grpo.group_size);
    g->get("clip_eps", c.grpo.clip_eps);
    g->get("kl_beta", c.grpo.kl_beta);
    g->get("sigma_min", c.grpo.sigma_min);
    g->get("learning_rate", c.grpo.learning_rate);
    g->get("total_steps", c.grpo.total_steps);
    g->get("batch_size", c.grpo.batch_size);
    g->get("updates_per_generation", c.grpo.updates_per_generation);
    g->get("optimizer", optimizer);
    if (optimizer == "sgd")
      c.grpo.optimizer = grpo::Optimizer::Sgd;
    else if (optimizer == "adam")
      c.grpo.optimizer = grpo::Optimizer::Adam;
    else
      throw ConfigError("grpo.optimizer: expected sgd|adam");
    g->reject_unknown();
  }

  if (auto m = root.child("model")) {
    m->get("hidden", c.model.hidden);
    m->get("classes", c.model.classes);
    m->get("canvas", c.grpo.canvas);
    m->reject_unknown();
  }
  root.reject_unknown();
  c.validate();
  return c;
}

/// Loads and validates a config file; also checks that referenced input
/// files exist.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c = parse_run_config(j, path.parent_path());
  if (!std::filesystem::exists(c.dataset))
    throw ConfigError("dataset: file not found '" + c.dataset.string() + "'");
  if (c.manifest && !std::filesystem::exists(*c.manifest))
    throw ConfigError("curriculum.manifest: file not found '" + c.manifest->string() + "'");
  return c;
}

}  // namespace curpo

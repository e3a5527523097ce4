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
#include <bit>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "curpo/curriculum.hpp"
#include "curpo/nn.hpp"
#include "curpo/sample.hpp"

namespace curpo::io {

using ordered_json = nlohmann::ordered_json;

/// Malformed input file. Carries the 1-based line number when known.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& source, std::size_t line, const std::string& msg)
      : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string{}) +
                           ": " + msg),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

// ---------------------------------------------------------------- datasets

/// Which fields a consumer needs. Sorting only needs ids and CoT statistics,
/// so external files without features or boxes can be sorted.
enum class DatasetNeeds { SortingOnly, Full };

inline ordered_json sample_to_json(const Sample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["category"] = s.category;
  j["question"] = s.question;
  j["features"] = s.features;
  j["gt_box"] = {s.gt_box.x1, s.gt_box.y1, s.gt_box.x2, s.gt_box.y2};
  if (!s.cots.empty() || s.cot_token_counts.empty())
    j["cots"] = s.cots;
  else
    j["cot_token_counts"] = s.cot_token_counts;
  if (s.rollout_rewards) j["rollout_rewards"] = *s.rollout_rewards;
  return j;
}

inline Sample sample_from_json(const nlohmann::json& j, DatasetNeeds needs) {
  auto require = [&j](const char* field) -> const nlohmann::json& {
    auto it = j.find(field);
    if (it == j.end()) throw MissingStatistic(field, std::string("missing field '") + field + "'");
    return *it;
  };
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");

  Sample s;
  s.id = require("id").get<std::int64_t>();
  const bool full = needs == DatasetNeeds::Full;
  if (full || j.contains("category")) s.category = require("category").get<int>();
  if (full || j.contains("question")) s.question = require("question").get<std::string>();
  if (full || j.contains("features")) s.features = require("features").get<std::vector<double>>();
  if (full || j.contains("gt_box")) {
    const auto box = require("gt_box").get<std::vector<int>>();
    if (box.size() != 4) throw std::invalid_argument("field 'gt_box' must have 4 integers");
    s.gt_box = BBox{box[0], box[1], box[2], box[3]};
    if (!s.gt_box.canonical()) throw std::invalid_argument("field 'gt_box' is not canonical");
  }
  if (j.contains("cots")) s.cots = j["cots"].get<std::vector<std::string>>();
  if (j.contains("cot_token_counts")) {
    s.cot_token_counts = j["cot_token_counts"].get<std::vector<int>>();
    for (int c : s.cot_token_counts)
      if (c < 0) throw std::invalid_argument("field 'cot_token_counts' has a negative entry");
  }
  if (j.contains("rollout_rewards") && !j["rollout_rewards"].is_null())
    s.rollout_rewards = j["rollout_rewards"].get<std::vector<double>>();
  return s;
}

inline void write_dataset(std::ostream& os, std::span<const Sample> data) {
  for (const auto& s : data) os << sample_to_json(s).dump() << '\n';
}

inline std::vector<Sample> read_dataset(std::istream& is, const std::string& source,
                                        DatasetNeeds needs = DatasetNeeds::Full) {
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(line), needs));
    } catch (const std::exception& e) {
      throw FormatError(source, lineno, e.what());
    }
  }
  return out;
}

inline std::vector<Sample> read_dataset_file(const std::filesystem::path& path,
                                             DatasetNeeds needs = DatasetNeeds::Full) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  return read_dataset(in, path.string(), needs);
}

inline void write_dataset_file(const std::filesystem::path& path, std::span<const Sample> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_dataset(out, data);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------- manifests

struct ManifestEntry {
  std::int64_t id = 0;
  curriculum::SortKey key;
  std::size_t phase = 0;
};

struct Manifest {
  curriculum::SortCriterion criterion;
  std::size_t phases = 1;
  std::vector<ManifestEntry> entries;  // sorted order

  curriculum::CurriculumPlan plan() const {
    std::vector<std::int64_t> ids;
    for (const auto& e : entries) ids.push_back(e.id);
    curriculum::CurriculumPlan p;
    p.order = std::move(ids);
    p.boundaries.push_back(0);
    for (std::size_t m = 1; m <= phases; ++m) {
      std::size_t end = p.boundaries.back();
      while (end < entries.size() && entries[end].phase == m) ++end;
      p.boundaries.push_back(end);
    }
    if (p.boundaries.back() != entries.size())
      throw std::invalid_argument("manifest phases are not contiguous and ascending");
    return p;
  }
};

inline Manifest make_manifest(std::span<const Sample> data,
                              const curriculum::SortCriterion& criterion,
                              std::size_t phases) {
  const auto order = curriculum::sort_positions(data, criterion);
  std::vector<std::int64_t> ids;
  for (auto i : order) ids.push_back(data[i].id);
  const auto plan = curriculum::split_phases(ids, phases);
  Manifest m;
  m.criterion = criterion;
  m.phases = phases;
  for (std::size_t ph = 1; ph <= phases; ++ph)
    for (std::size_t k = plan.boundaries[ph - 1]; k < plan.boundaries[ph]; ++k)
      m.entries.push_back({ids[k], curriculum::complexity_score(data[order[k]], criterion), ph});
  return m;
}

inline void write_manifest(std::ostream& os, const Manifest& m) {
  ordered_json head;
  head["criterion"] = std::string(curriculum::to_string(m.criterion.kind));
  if (m.criterion.kind == curriculum::Criterion::LengthThenReward)
    head["bin_width"] = m.criterion.bin_width;
  head["M"] = m.phases;
  if (m.criterion.kind == curriculum::Criterion::Random) head["seed"] = m.criterion.seed;
  if (m.criterion.reward_ascending) head["reward_ascending"] = true;
  os << head.dump() << '\n';
  const bool keyed = m.criterion.kind == curriculum::Criterion::LengthThenReward;
  for (const auto& e : m.entries) {
    ordered_json r;
    r["id"] = e.id;
    if (keyed)
      r["key"] = {e.key.primary, e.key.secondary};
    else
      r["score"] = e.key.primary;
    r["phase"] = e.phase;
    os << r.dump() << '\n';
  }
}

inline Manifest read_manifest(std::istream& is, const std::string& source) {
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        m.criterion.kind = curriculum::parse_criterion(j.at("criterion").get<std::string>());
        m.criterion.bin_width = j.value("bin_width", 50);
        m.criterion.seed = j.value("seed", std::uint64_t{0});
        m.criterion.reward_ascending = j.value("reward_ascending", false);
        m.phases = j.at("M").get<std::size_t>();
        if (m.phases < 1) throw std::invalid_argument("M must be >= 1");
        have_header = true;
        continue;
      }
      ManifestEntry e;
      e.id = j.at("id").get<std::int64_t>();
      if (j.contains("key")) {
        const auto k = j["key"].get<std::vector<double>>();
        if (k.size() != 2) throw std::invalid_argument("'key' must have 2 entries");
        e.key = {k[0], k[1]};
      } else {
        e.key = {j.at("score").get<double>(), 0.0};
      }
      e.phase = j.at("phase").get<std::size_t>();
      if (e.phase < 1 || e.phase > m.phases) throw std::invalid_argument("phase out of range");
      m.entries.push_back(e);
    } catch (const std::exception& ex) {
      throw FormatError(source, lineno, ex.what());
    }
  }
  if (!have_header) throw FormatError(source, 0, "empty manifest");
  return m;
}

// ---------------------------------------------------------------- params

// Layout (all integers little-endian):
//   magic "CURPOMLP" | u32 version | u32 hidden layers | u32 heads |
//   u64 input dim | u64 per hidden layer width | u64 classes |
//   f64 coordinates in LayerStack::coord order
inline constexpr std::array<char, 8> kParamsMagic = {'C', 'U', 'R', 'P', 'O', 'M', 'L', 'P'};
inline constexpr std::uint32_t kParamsVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(v);
  for (std::size_t b = 0; b < sizeof(U); ++b) os.put(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

template <class T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw std::runtime_error("params file truncated");
    bits |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline void write_params(std::ostream& os, const nn::MlpParams& p) {
  os.write(kParamsMagic.data(), kParamsMagic.size());
  detail::put_le<std::uint32_t>(os, kParamsVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.hidden.size()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.heads.size()));
  detail::put_le<std::uint64_t>(os, p.input_dim());
  for (const auto& l : p.hidden) detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(l.out()));
  detail::put_le<std::uint64_t>(os, p.classes());
  for (std::size_t i = 0, n = p.size(); i < n; ++i) detail::put_le<double>(os, p.coord(i));
}

inline nn::MlpParams read_params(std::istream& is, const std::string& source = "params") {
  auto fail = [&source](const std::string& msg) { throw FormatError(source, 0, msg); };
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kParamsMagic) fail("not a params file (bad magic)");
  try {
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kParamsVersion) fail("unsupported params version " + std::to_string(version));
    constexpr std::uint64_t kMaxDim = 1u << 20;
    auto dim = [&](std::uint64_t v, const char* what) {
      if (v == 0 || v > kMaxDim) fail(std::string("implausible ") + what + " " + std::to_string(v));
      return static_cast<std::size_t>(v);
    };
    const auto n_hidden = detail::get_le<std::uint32_t>(is);
    if (n_hidden > 64) fail("implausible hidden layer count " + std::to_string(n_hidden));
    const auto n_heads = dim(detail::get_le<std::uint32_t>(is), "head count");
    const auto input = dim(detail::get_le<std::uint64_t>(is), "input dim");
    std::vector<std::size_t> widths;
    for (std::uint32_t i = 0; i < n_hidden; ++i)
      widths.push_back(dim(detail::get_le<std::uint64_t>(is), "layer width"));
    const auto classes = dim(detail::get_le<std::uint64_t>(is), "class count");
    nn::MlpParams p = nn::init_layers(input, widths, n_heads, classes, 0);
    for (std::size_t i = 0, n = p.size(); i < n; ++i) p.coord(i) = detail::get_le<double>(is);
    if (is.peek() != std::char_traits<char>::eof()) fail("trailing bytes in params file");
    return p;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    fail(e.what());
  }
  throw std::logic_error("unreachable");
}

inline void write_params_file(const std::filesystem::path& path, const nn::MlpParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_params(out, p);
}

inline nn::MlpParams read_params_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open params file '" + path.string() + "'");
  return read_params(in, path.string());
}

}  // namespace curpo::io

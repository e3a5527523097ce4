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

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "curpo/geom.hpp"
#include "curpo/nn.hpp"
#include "curpo/textformat.hpp"

namespace curpo {

/// Raised when a sample lacks a statistic an operation needs. `field()` names
/// the missing dataset field.
class MissingStatistic : public std::invalid_argument {
 public:
  MissingStatistic(std::string field, const std::string& what)
      : std::invalid_argument(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// One grounding task. `features` stands in for the (query, image) pair.
/// External datasets may carry precomputed `cot_token_counts` instead of
/// CoT texts.
struct Sample {
  std::int64_t id = 0;
  int category = 0;
  std::string question;
  std::vector<double> features;
  BBox gt_box;
  std::vector<std::string> cots;
  std::vector<int> cot_token_counts;
  std::optional<std::vector<double>> rollout_rewards;

  /// Token counts from the CoT texts when present, else the precomputed ones.
  std::vector<std::size_t> token_counts() const {
    std::vector<std::size_t> out;
    if (!cots.empty()) {
      out.reserve(cots.size());
      for (const auto& c : cots) out.push_back(cot_token_count(c));
    } else {
      for (int c : cot_token_counts) {
        if (c < 0) throw std::invalid_argument("negative CoT token count");
        out.push_back(static_cast<std::size_t>(c));
      }
    }
    return out;
  }

  nn::Vector feature_vector() const {
    return Eigen::Map<const nn::Vector>(features.data(),
                                        static_cast<Eigen::Index>(features.size()));
  }

  double mean_rollout_reward() const {
    if (!rollout_rewards || rollout_rewards->empty())
      throw MissingStatistic("rollout_rewards",
                             "sample " + std::to_string(id) +
                                 ": missing field 'rollout_rewards'");
    const auto& r = *rollout_rewards;
    return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
  }
};

/// Mean whitespace-token length over the sample's CoTs.
inline double avg_cot_length(const Sample& s) {
  const auto counts = s.token_counts();
  if (counts.empty())
    throw MissingStatistic("cots", "sample " + std::to_string(s.id) +
                                       ": no CoTs recorded (need 'cots' or "
                                       "'cot_token_counts')");
  double sum = 0.0;
  for (auto c : counts) sum += static_cast<double>(c);
  return sum / static_cast<double>(counts.size());
}

}  // namespace curpo

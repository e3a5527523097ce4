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

#include <cctype>
#include <charconv>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "curpo/geom.hpp"

namespace curpo {

enum class OutputMode { Direct, CoT };

inline std::string_view to_string(OutputMode m) noexcept {
  return m == OutputMode::Direct ? "direct" : "cot";
}

inline OutputMode parse_output_mode(std::string_view s) {
  if (s == "direct") return OutputMode::Direct;
  if (s == "cot") return OutputMode::CoT;
  throw std::invalid_argument("unknown output mode '" + std::string(s) +
                              "' (expected direct|cot)");
}

// Instruction suffixes appended to the question, byte-exact.
inline constexpr std::string_view kDirectInstruction =
    "Output your grounding box. Following "
    "\"<answer>(x1,y1),(x2,y2)</answer>\" format.";
inline constexpr std::string_view kCotInstruction =
    "Output the thinking process in \"<think>...</think>\" and then the "
    "grounding box, following the format: "
    "\"<think>reasoning chain</think><answer>(x1,y1),(x2,y2)</answer>\".";

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

struct ParsedOutput {
  std::optional<std::string> think;
  std::optional<BBox> box;
  bool has_think_tags = false;
  bool has_answer_tags = false;
  bool well_formed = false;
};

inline std::string prompt_text(OutputMode mode, std::string_view question) {
  std::string out(question);
  out += ' ';
  out += mode == OutputMode::Direct ? kDirectInstruction : kCotInstruction;
  return out;
}

inline std::string render_direct(const BBox& b) {
  std::string out(kAnswerOpen);
  out += '(' + std::to_string(b.x1) + ',' + std::to_string(b.y1) + "),(" +
         std::to_string(b.x2) + ',' + std::to_string(b.y2) + ')';
  out += kAnswerClose;
  return out;
}

inline std::string render_cot(std::string_view think, const BBox& b) {
  if (think.find(kThinkClose) != std::string_view::npos)
    throw std::invalid_argument("render_cot: reasoning text contains </think>");
  std::string out(kThinkOpen);
  out += think;
  out += kThinkClose;
  out += render_direct(b);
  return out;
}

namespace detail {

// Cursor over the answer payload "(x1,y1),(x2,y2)". ASCII spaces between
// tokens are tolerated; anything else is a malformation.
class PayloadReader {
 public:
  explicit PayloadReader(std::string_view s) : s_(s) {}

  bool expect(char c) {
    skip_spaces();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::optional<int> integer() {
    skip_spaces();
    int value = 0;
    const char* first = s_.data() + pos_;
    const char* last = s_.data() + s_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr == first) return std::nullopt;
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  bool at_end() {
    skip_spaces();
    return pos_ == s_.size();
  }

 private:
  void skip_spaces() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

inline std::optional<BBox> parse_box_payload(std::string_view payload) {
  PayloadReader r(payload);
  int v[4];
  for (int corner = 0; corner < 2; ++corner) {
    if (corner == 1 && !r.expect(',')) return std::nullopt;
    if (!r.expect('(')) return std::nullopt;
    auto a = r.integer();
    if (!a || !r.expect(',')) return std::nullopt;
    auto b = r.integer();
    if (!b || !r.expect(')')) return std::nullopt;
    v[2 * corner] = *a;
    v[2 * corner + 1] = *b;
  }
  if (!r.at_end()) return std::nullopt;
  return BBox{v[0], v[1], v[2], v[3]}.canonicalized();
}

}  // namespace detail

/// Total parser for model output. Takes the first <think> span and the first
/// <answer> span that follows it; text after </answer> is ignored. Never
/// throws; malformation is reported through the flags.
inline ParsedOutput parse_output(std::string_view s, OutputMode mode) {
  ParsedOutput out;
  std::size_t answer_search_from = 0;

  if (auto open = s.find(kThinkOpen); open != std::string_view::npos) {
    const std::size_t body = open + kThinkOpen.size();
    if (auto close = s.find(kThinkClose, body); close != std::string_view::npos) {
      out.has_think_tags = true;
      out.think = std::string(s.substr(body, close - body));
      answer_search_from = close + kThinkClose.size();
    }
  }

  if (auto open = s.find(kAnswerOpen, answer_search_from);
      open != std::string_view::npos) {
    const std::size_t body = open + kAnswerOpen.size();
    if (auto close = s.find(kAnswerClose, body); close != std::string_view::npos) {
      out.has_answer_tags = true;
      out.box = detail::parse_box_payload(s.substr(body, close - body));
    }
  }

  const bool answer_ok = out.has_answer_tags && out.box.has_value();
  if (mode == OutputMode::Direct) {
    out.well_formed = answer_ok && !out.has_think_tags;
  } else {
    out.well_formed = answer_ok && out.has_think_tags;
  }
  return out;
}

/// Binary compliance reward: 1 when the output is well formed for `mode`.
inline double format_reward(const ParsedOutput& p, OutputMode mode) noexcept {
  const bool ok = p.well_formed && p.has_answer_tags && p.box.has_value() &&
                  (mode == OutputMode::CoT ? p.has_think_tags
                                           : !p.has_think_tags);
  return ok ? 1.0 : 0.0;
}

/// Number of maximal non-whitespace runs.
inline std::size_t cot_token_count(std::string_view think) noexcept {
  std::size_t count = 0;
  bool in_token = false;
  for (char ch : think) {
    const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

}  // namespace curpo

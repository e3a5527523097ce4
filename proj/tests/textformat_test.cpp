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

#include <gtest/gtest.h>

#include <string>

#include "curpo/rng.hpp"
#include "curpo/textformat.hpp"

using curpo::BBox;
using curpo::OutputMode;

TEST(TextFormat, RenderDirect) {
  EXPECT_EQ(curpo::render_direct({1, 2, 3, 4}), "<answer>(1,2),(3,4)</answer>");
  EXPECT_EQ(curpo::render_direct({0, 0, 0, 0}), "<answer>(0,0),(0,0)</answer>");
  EXPECT_EQ(curpo::render_direct({10, 0, 12, 5}), "<answer>(10,0),(12,5)</answer>");
}

TEST(TextFormat, RenderCot) {
  EXPECT_EQ(curpo::render_cot("step", {1, 2, 3, 4}),
            "<think>step</think><answer>(1,2),(3,4)</answer>");
  EXPECT_EQ(curpo::render_cot("", {0, 0, 1, 1}), "<think></think><answer>(0,0),(1,1)</answer>");
  EXPECT_EQ(curpo::render_cot("a b c", {5, 5, 6, 6}),
            "<think>a b c</think><answer>(5,5),(6,6)</answer>");
  EXPECT_THROW(curpo::render_cot("oops</think>", {0, 0, 1, 1}), std::invalid_argument);
}

TEST(TextFormat, PromptStrings) {
  EXPECT_EQ(curpo::prompt_text(OutputMode::Direct, "Q"),
            "Q Output your grounding box. Following \"<answer>(x1,y1),(x2,y2)</answer>\" format.");
  EXPECT_EQ(curpo::prompt_text(OutputMode::CoT, "Q"),
            "Q Output the thinking process in \"<think>...</think>\" and then the grounding box, "
            "following the format: \"<think>reasoning chain</think><answer>(x1,y1),(x2,y2)</answer>\".");
  const auto p = curpo::prompt_text(OutputMode::Direct, "Find the dog.");
  EXPECT_EQ(p, "Find the dog. " + std::string(curpo::kDirectInstruction));
}

TEST(TextFormat, ParseDirect) {
  const auto p = curpo::parse_output("<answer>(1,2),(3,4)</answer>", OutputMode::Direct);
  ASSERT_TRUE(p.box);
  EXPECT_EQ(*p.box, (BBox{1, 2, 3, 4}));
  EXPECT_TRUE(p.well_formed);
  EXPECT_FALSE(p.has_think_tags);

  const auto g = curpo::parse_output("garbage", OutputMode::Direct);
  EXPECT_FALSE(g.box);
  EXPECT_FALSE(g.well_formed);
  EXPECT_FALSE(g.has_answer_tags);
}

TEST(TextFormat, ParseCotSwapsCorners) {
  const auto p = curpo::parse_output("<think>x</think><answer>(3,4),(1,2)</answer>", OutputMode::CoT);
  ASSERT_TRUE(p.think);
  EXPECT_EQ(*p.think, "x");
  ASSERT_TRUE(p.box);
  EXPECT_EQ(*p.box, (BBox{1, 2, 3, 4}));
  EXPECT_TRUE(p.well_formed);
}

TEST(TextFormat, ModeRules) {
  const std::string cot = "<think>r</think><answer>(1,2),(3,4)</answer>";
  const std::string direct = "<answer>(1,2),(3,4)</answer>";
  EXPECT_FALSE(curpo::parse_output(cot, OutputMode::Direct).well_formed);
  EXPECT_FALSE(curpo::parse_output(direct, OutputMode::CoT).well_formed);
  EXPECT_TRUE(curpo::parse_output(direct + " trailing", OutputMode::Direct).well_formed);
  // first answer span wins even if a later one is valid
  const auto p = curpo::parse_output("<answer>(1,x),(3,4)</answer><answer>(1,2),(3,4)</answer>",
                                     OutputMode::Direct);
  EXPECT_TRUE(p.has_answer_tags);
  EXPECT_FALSE(p.box);
  EXPECT_FALSE(p.well_formed);
}

TEST(TextFormat, LenientCoordinates) {
  const auto p = curpo::parse_output("<answer>( 1, 2 ),(-3,40)</answer>", OutputMode::Direct);
  ASSERT_TRUE(p.box);
  EXPECT_EQ(*p.box, (BBox{-3, 2, 1, 40}));
  EXPECT_FALSE(curpo::parse_output("<answer>(1,2),(3,4),(5,6)</answer>", OutputMode::Direct).box);
  EXPECT_FALSE(curpo::parse_output("<answer>(1,2),(3,99999999999)</answer>", OutputMode::Direct).box);
  EXPECT_FALSE(curpo::parse_output("<answer>(1.5,2),(3,4)</answer>", OutputMode::Direct).box);
}

TEST(TextFormat, FormatReward) {
  EXPECT_EQ(curpo::format_reward(curpo::parse_output("<answer>(0,0),(1,1)</answer>", OutputMode::Direct),
                                 OutputMode::Direct),
            1.0);
  EXPECT_EQ(curpo::format_reward(curpo::parse_output("(0,0),(1,1)", OutputMode::Direct), OutputMode::Direct),
            0.0);
  EXPECT_EQ(curpo::format_reward(curpo::parse_output("<answer>(0,0),(1,1)</answer>", OutputMode::CoT),
                                 OutputMode::CoT),
            0.0);
  // tags present but malformed coordinates score 0
  EXPECT_EQ(curpo::format_reward(curpo::parse_output("<think></think><answer>(a,b)</answer>", OutputMode::CoT),
                                 OutputMode::CoT),
            0.0);
}

TEST(TextFormat, TokenCount) {
  EXPECT_EQ(curpo::cot_token_count(""), 0u);
  EXPECT_EQ(curpo::cot_token_count("a b c"), 3u);
  EXPECT_EQ(curpo::cot_token_count("  two   words "), 2u);
  EXPECT_EQ(curpo::cot_token_count("tab\tand\nnewline"), 3u);
}

TEST(TextFormat, RoundTripProperty) {
  curpo::Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto r = [&rng] { return static_cast<int>(rng.below(1000)); };
    const BBox b = BBox{r(), r(), r(), r()}.canonicalized();
    const auto d = curpo::parse_output(curpo::render_direct(b), OutputMode::Direct);
    ASSERT_TRUE(d.well_formed);
    ASSERT_EQ(*d.box, b);

    std::string think;
    const auto len = rng.below(30);
    for (std::uint64_t i = 0; i < len; ++i) think += "abc xyz.,;()\n"[rng.below(13)];
    const auto c = curpo::parse_output(curpo::render_cot(think, b), OutputMode::CoT);
    ASSERT_TRUE(c.well_formed);
    ASSERT_EQ(*c.think, think);
    ASSERT_EQ(*c.box, b);
  }
}

TEST(TextFormat, ParserIsTotal) {
  curpo::Rng rng(5);
  const std::string pieces[] = {"<think>", "</think>", "<answer>", "</answer>", "(", ")", ",", "1", "-", "x"};
  for (int trial = 0; trial < 10000; ++trial) {
    std::string s;
    const auto len = rng.below(40);
    for (std::uint64_t i = 0; i < len; ++i) {
      if (rng.below(2))
        s += static_cast<char>(rng.below(256));
      else
        s += pieces[rng.below(10)];
    }
    for (auto mode : {OutputMode::Direct, OutputMode::CoT}) {
      curpo::ParsedOutput p;
      ASSERT_NO_THROW(p = curpo::parse_output(s, mode));
      if (p.well_formed) {
        ASSERT_TRUE(p.box.has_value());
        ASSERT_TRUE(p.has_answer_tags);
        ASSERT_TRUE(p.box->canonical());
      }
      const double f = curpo::format_reward(p, mode);
      ASSERT_TRUE(f == 0.0 || f == 1.0);
    }
  }
}

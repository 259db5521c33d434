// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "moeprobe/diagnostics.hpp"
#include "moeprobe/errors.hpp"
#include "moeprobe/intervention.hpp"

using namespace moeprobe;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.num_layers = 2;
  c.num_experts = 4;
  c.top_k = 2;
  c.model_dim = 8;
  c.hidden_dim = 12;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Transitions, TwentyFourToFourteen) {
  const auto s = transition_summary(outcomes_from_labels(parse_label_file(fixture::transition_label_file(18, 8, 6, 68))));
  EXPECT_EQ(s.n_prompts, 100u);
  EXPECT_EQ(s.baseline_restricted, 24u);
  EXPECT_EQ(s.suppressed_restricted, 14u);
  EXPECT_NEAR(s.relative_reduction(), 10.0 / 24.0, 1e-15);
  EXPECT_NO_THROW(s.check_identities());
}

TEST(Transitions, ThirtyFourToTwentyTwo) {
  const auto s = transition_summary(outcomes_from_labels(parse_label_file(fixture::transition_label_file(15, 3, 19, 63))));
  EXPECT_EQ(s.baseline_restricted, 34u);
  EXPECT_EQ(s.suppressed_restricted, 22u);
  EXPECT_NEAR(s.relative_reduction(), 12.0 / 34.0, 1e-15);
}

TEST(Transitions, NoRestrictedBaselineGivesZeroReduction) {
  const auto s = transition_summary(outcomes_from_labels(parse_label_file(fixture::transition_label_file(0, 2, 0, 3))));
  EXPECT_EQ(s.relative_reduction(), 0.0);
  EXPECT_EQ(s.n_to_r, 2u);
}

TEST(Transitions, IdentityViolationDetected) {
  TransitionSummary s;
  s.n_prompts = 3;
  s.both_n = 2;
  EXPECT_THROW(s.check_identities(), std::logic_error);
}

TEST(Transitions, UnlabeledOutcomesSkippedWithWarning) {
  std::vector<PairedOutcome> o(2);
  o[0].prompt_id = "a";
  o[0].baseline_label = Label::kRestricted;
  o[0].suppressed_label = Label::kNonRestricted;
  o[1].prompt_id = "b";
  o[1].error = "boom";
  ScopedWarningCapture cap;
  const auto s = transition_summary(o);
  EXPECT_EQ(s.n_prompts, 1u);
  EXPECT_EQ(s.r_to_n, 1u);
  EXPECT_EQ(cap.messages().size(), 1u);
}

TEST(Transitions, Codes) {
  EXPECT_EQ(transition_code(Label::kRestricted, Label::kNonRestricted), "R->N");
  EXPECT_EQ(transition_code(Label::kNonRestricted, Label::kRestricted), "N->R");
  EXPECT_EQ(transition_code(Label::kRestricted, Label::kRestricted), "R->R");
  EXPECT_EQ(transition_code(Label::kNonRestricted, Label::kNonRestricted), "N->N");
}

TEST(KeywordLabel, CaseInsensitiveSubstring) {
  const auto& m = kDefaultRefusalMarkers;
  EXPECT_EQ(keyword_label("I CANNOT help with that.", m), Label::kRestricted);
  EXPECT_EQ(keyword_label("well, sorry, but no", m), Label::kRestricted);
  EXPECT_EQ(keyword_label("Here is the recipe.", m), Label::kNonRestricted);
  EXPECT_EQ(keyword_label("", m), Label::kNonRestricted);
  const std::vector<std::string> custom{"nope"};
  EXPECT_EQ(keyword_label("NOPEs", custom), Label::kRestricted);
  EXPECT_THROW(keyword_label("x", std::vector<std::string>{}), std::invalid_argument);
}

TEST(LabelFile, ParsesCommentsHeaderAndBlanks) {
  const auto t = parse_label_file("prompt_id,arm,label\n# note\n\na,baseline,restricted\na,suppressed,non-restricted\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.at({"a", Arm::kBaseline}), Label::kRestricted);
  const auto labeler = label_file_labeler(t);
  EXPECT_EQ(labeler("a", Arm::kSuppressed, "ignored"), Label::kNonRestricted);
  EXPECT_THROW(labeler("b", Arm::kSuppressed, ""), ValidationError);
}

TEST(LabelFile, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& text) {
    try {
      (void)parse_label_file(text);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("a,baseline\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("a,baseline,restricted\na,control,restricted\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("a,baseline,restricted\nb,baseline,maybe\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("a,baseline,restricted\na,baseline,restricted\n").find("duplicate"), std::string::npos);
  EXPECT_TRUE(parse_label_file("# only a comment\n").empty());
  EXPECT_THROW(outcomes_from_labels(parse_label_file("# only a comment\n")), ValidationError);
}

TEST(LabelFile, OutcomesNeedBothArms) {
  EXPECT_THROW(outcomes_from_labels(parse_label_file("a,baseline,restricted\n")), ValidationError);
  const auto o = outcomes_from_labels(
      parse_label_file("z,baseline,restricted\nz,suppressed,restricted\na,suppressed,non-restricted\n"
                       "a,baseline,non-restricted\n"));
  ASSERT_EQ(o.size(), 2u);
  EXPECT_EQ(o[0].prompt_id, "a");
  EXPECT_TRUE(o[1].labeled());
}

TEST(RunPaired, EmptyMaskGivesIdenticalArms) {
  const MoeModel m(tiny_config());
  const std::vector<PromptInput> prompts{{"x", "malicious", "hello"}, {"y", "malicious", "world"}};
  const auto out = run_paired(m, prompts, {}, keyword_labeler(), {6, SuppressionScope::kWholeRun});
  ASSERT_EQ(out.size(), 2u);
  for (const auto& o : out) {
    EXPECT_EQ(o.baseline_text, o.suppressed_text);
    EXPECT_EQ(o.baseline_text.size(), 6u);
    EXPECT_TRUE(o.labeled());
  }
}

TEST(RunPaired, ConstantLabelerAndFailures) {
  const MoeModel m(tiny_config());
  const std::vector<PromptInput> prompts{{"x", "malicious", "hello"}, {"y", "malicious", "world"}};
  const SuppressionMask mask{{0, 1}};
  const auto all_r = run_paired(m, prompts, mask, [](const std::string&, Arm, const std::string&) {
    return Label::kRestricted;
  });
  EXPECT_EQ(transition_summary(all_r).both_r, 2u);

  ScopedWarningCapture cap;
  const auto failing = run_paired(m, prompts, mask, [](const std::string& id, Arm, const std::string&) {
    if (id == "y") throw std::runtime_error("labeler down");
    return Label::kNonRestricted;
  });
  EXPECT_TRUE(failing[0].labeled());
  EXPECT_FALSE(failing[1].labeled());
  EXPECT_NE(failing[1].error.find("labeler down"), std::string::npos);
  EXPECT_FALSE(cap.messages().empty());
}

TEST(RunPaired, RejectsInvalidMask) {
  const MoeModel m(tiny_config());
  const std::vector<PromptInput> prompts{{"x", "malicious", "hello"}};
  EXPECT_THROW(run_paired(m, prompts, SuppressionMask{{5, 0}}, keyword_labeler()), ValidationError);
}

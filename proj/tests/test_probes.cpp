// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "moeprobe/errors.hpp"
#include "moeprobe/finite_diff.hpp"
#include "moeprobe/probes.hpp"

using namespace moeprobe;

namespace {

ModelConfig probe_config(std::uint64_t seed) {
  ModelConfig c;
  c.num_layers = 3;
  c.num_experts = 5;
  c.top_k = 2;
  c.model_dim = 8;
  c.hidden_dim = 12;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Activations, SingleTokenPromptHasTwoOnesPerLayer) {
  const MoeModel m(probe_config(1));
  const auto cap = capture_activations(m, std::vector<TokenId>{42});
  EXPECT_EQ(cap.token_count, 1u);
  for (std::size_t l = 0; l < 3; ++l) {
    int ones = 0;
    for (std::size_t e = 0; e < 5; ++e) {
      const double v = cap.counts.at(l, e);
      EXPECT_TRUE(v == 0.0 || v == 1.0);
      ones += v == 1.0;
    }
    EXPECT_EQ(ones, 2);
  }
}

TEST(Activations, RowsSumToTopKTimesTokens) {
  const MoeModel m(probe_config(2));
  const auto tokens = encode_text("conservation of routing mass", 256);
  const auto cap = capture_activations(m, tokens);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(cap.counts.row_sum(l), 2.0 * tokens.size());
}

TEST(Activations, GeneratedTokensCountWhenRequested) {
  const MoeModel m(probe_config(3));
  const auto tokens = encode_text("abc", 256);
  CaptureOptions opt;
  opt.include_generated_tokens = true;
  opt.max_new_tokens = 4;
  const auto cap = capture_activations(m, tokens, {}, opt);
  EXPECT_EQ(cap.token_count, 3u + 4u - 1u);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(cap.counts.row_sum(l), 2.0 * cap.token_count);
}

TEST(Activations, SuppressedPairHasZeroCount) {
  const MoeModel m(probe_config(4));
  const auto tokens = encode_text("suppress me please", 256);
  const auto base = capture_activations(m, tokens);
  // Suppress the busiest expert of layer 1.
  std::size_t busiest = 0;
  for (std::size_t e = 1; e < 5; ++e)
    if (base.counts.at(1, e) > base.counts.at(1, busiest)) busiest = e;
  ASSERT_GT(base.counts.at(1, busiest), 0.0);
  const auto cap = capture_activations(m, tokens, SuppressionMask{{1, busiest}});
  EXPECT_EQ(cap.counts.at(1, busiest), 0.0);
  EXPECT_EQ(cap.counts.row_sum(1), 2.0 * tokens.size());
}

TEST(Activations, EmptyPromptRejected) {
  const MoeModel m(probe_config(1));
  EXPECT_THROW(capture_activations(m, std::vector<TokenId>{}), std::invalid_argument);
}

TEST(GateGradients, MatchFiniteDifferenceOfRouterColumns) {
  auto c = probe_config(5);
  c.num_layers = 2;
  c.num_experts = 4;
  c.init_scale = 0.5;
  const MoeModel m(c);
  const auto tokens = encode_text("finite", 256);
  const auto g = capture_gate_gradients(m, tokens);

  ParameterSet ps;
  for (std::size_t l = 0; l < 2; ++l) ps[router_param_id(l)] = m.weights().blocks[l].moe.router;
  auto f = [&](const ParameterSet& p) {
    ModelWeights w = m.weights();
    for (std::size_t l = 0; l < 2; ++l) w.blocks[l].moe.router = p.at(router_param_id(l));
    return MoeModel(c, w).forward_lm(tokens).loss;
  };
  const auto fd = finite_diff_gradient(f, ps);
  for (std::size_t l = 0; l < 2; ++l) {
    const Tensor& t = fd.at(router_param_id(l));
    for (std::size_t e = 0; e < 4; ++e) {
      double acc = 0.0;
      for (std::size_t d = 0; d < c.model_dim; ++d) acc += std::abs(t.at(d, e));
      EXPECT_LE(relative_error(g.at(l, e), acc / c.model_dim), 1e-4) << "layer " << l << " expert " << e;
    }
  }
}

TEST(GateGradients, NeedTwoTokens) {
  const MoeModel m(probe_config(1));
  EXPECT_THROW(capture_gate_gradients(m, std::vector<TokenId>{7}), std::invalid_argument);
}

TEST(NormalizeMap, DividesEachRowByItsTotal) {
  const RoutingMap raw(2, 4, {2, 2, 0, 0, 1, 1, 1, 1}, MapKind::kRawCount);
  const auto n = normalize_map(raw);
  EXPECT_EQ(n.kind(), MapKind::kLayerNormalized);
  EXPECT_EQ(n.at(0, 0), 0.5);
  EXPECT_EQ(n.at(0, 2), 0.0);
  EXPECT_EQ(n.at(1, 3), 0.25);
  EXPECT_NEAR(n.total(), 2.0, 1e-15);
  EXPECT_NO_THROW(n.validate());
}

TEST(NormalizeMap, ZeroRowNamesLayer) {
  const RoutingMap raw(3, 2, {1, 1, 0, 0, 2, 0}, MapKind::kRawCount);
  try {
    (void)normalize_map(raw);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(NormalizeMap, RejectsGradientMaps) {
  const RoutingMap g(1, 2, {0.1, 0.2}, MapKind::kGradient);
  EXPECT_THROW((void)normalize_map(g), std::invalid_argument);
}

TEST(CapturePrompt, RecordValidatesAndCarriesGroup) {
  const MoeModel m(probe_config(6));
  const auto rec = capture_prompt(m, {"b-1", "benign", "hello there"});
  EXPECT_EQ(rec.group, "benign");
  EXPECT_EQ(rec.token_count, 11u);
  ASSERT_TRUE(rec.gradient.has_value());
  EXPECT_NO_THROW(rec.validate(2));
}

TEST(CapturePrompt, SingleTokenNeedsGradientOff) {
  const MoeModel m(probe_config(6));
  EXPECT_THROW(capture_prompt(m, {"b-1", "benign", "a"}), ValidationError);
  CaptureOptions opt;
  opt.capture_gradient = false;
  EXPECT_FALSE(capture_prompt(m, {"b-1", "benign", "a"}, opt).gradient.has_value());
}

TEST(CaptureBatch, MatchesSequentialCapture) {
  const MoeModel m(probe_config(7));
  const std::vector<PromptInput> prompts{{"a", "g", "first prompt"}, {"b", "g", "second"}, {"c", "h", "third one"}};
  const auto batch = capture_batch(m, prompts);
  ASSERT_EQ(batch.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(batch[i], capture_prompt(m, prompts[i]));
}

TEST(RoutingMap, RejectsInvalidValues) {
  EXPECT_THROW(RoutingMap(1, 2, {1.0}, MapKind::kRawCount), ValidationError);
  EXPECT_THROW(RoutingMap(1, 2, {1.0, -1.0}, MapKind::kRawCount), ValidationError);
  EXPECT_THROW(RoutingMap(1, 2, {1.0, NAN}, MapKind::kGradient), ValidationError);
  EXPECT_THROW(RoutingMap(1, 2, {1.5, 0.5}, MapKind::kRawCount).validate(), ValidationError);
  EXPECT_THROW(RoutingMap(1, 2, {0.5, 0.4}, MapKind::kLayerNormalized).validate(), ValidationError);
}

TEST(PromptRecord, ConservationViolationIsReported) {
  PromptRecord r{"p", "g", 2, RoutingMap(1, 3, {2, 1, 0}, MapKind::kRawCount), std::nullopt};
  try {
    r.validate(2);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos) << e.what();
  }
}

// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "moeprobe/errors.hpp"
#include "moeprobe/metrics.hpp"
#include "moeprobe/probes.hpp"
#include "oracles.hpp"

using namespace moeprobe;

TEST(RankExperts, OrdersByScoreThenCoordinates) {
  const RoutingMap m(2, 2, {3, 1, 2, 4}, MapKind::kRawCount);
  const auto r = rank_experts(m);
  ASSERT_EQ(r.entries.size(), 4u);
  EXPECT_EQ(r.entries[0], (RankedEntry{1, 1, 4}));
  EXPECT_EQ(r.entries[1], (RankedEntry{0, 0, 3}));
  EXPECT_EQ(r.entries[2], (RankedEntry{1, 0, 2}));
  EXPECT_EQ(r.entries[3], (RankedEntry{0, 1, 1}));
  EXPECT_EQ(r.total_mass, 10.0);

  const auto tied = rank_experts(RoutingMap(2, 2, {1, 1, 1, 1}, MapKind::kRawCount));
  EXPECT_EQ(tied.entries[0], (RankedEntry{0, 0, 1}));
  EXPECT_EQ(tied.entries[3], (RankedEntry{1, 1, 1}));
}

TEST(RankExperts, ZeroMassRejected) {
  EXPECT_THROW(rank_experts(RoutingMap(1, 3, MapKind::kRawCount)), std::invalid_argument);
}

TEST(Coverage, SmallRawExample) {
  const auto s = coverage_summary(rank_experts(RoutingMap(2, 2, {3, 1, 2, 4}, MapKind::kRawCount)));
  EXPECT_EQ(s.k80, 3u);
  EXPECT_EQ(s.k90, 3u);
  EXPECT_EQ(s.k95, 4u);
  EXPECT_EQ(s.k_elbow, 1u);  // three equal drops, first wins
  EXPECT_EQ(s.top1, 4.0);
  EXPECT_EQ(s.top5, 10.0);
}

TEST(Coverage, SmallNormalizedExample) {
  const auto n = normalize_map(RoutingMap(2, 2, {3, 1, 2, 4}, MapKind::kRawCount));
  const auto s = coverage_summary(rank_experts(n));
  // Sorted: 0.75, 2/3, 1/3, 0.25 over total 2.
  EXPECT_EQ(s.k80, 3u);
  EXPECT_EQ(s.k90, 4u);
  EXPECT_EQ(s.k95, 4u);
  EXPECT_EQ(s.k_elbow, 2u);
  EXPECT_DOUBLE_EQ(s.top1, 0.75);
}

TEST(Coverage, ExactFractionsReachTarget) {
  const auto s = coverage_summary(rank_experts(RoutingMap(1, 4, {0.4, 0.3, 0.2, 0.1}, MapKind::kGradient)));
  EXPECT_EQ(s.k90, 3u);
  EXPECT_EQ(s.k80, 3u);
}

TEST(Coverage, Uniform256) {
  const RoutingMap u(32, 8, std::vector<double>(256, 1.0 / 8.0), MapKind::kLayerNormalized);
  const auto s = coverage_summary(rank_experts(u));
  EXPECT_EQ(s.k80, 205u);
  EXPECT_EQ(s.k90, 231u);
  EXPECT_EQ(s.k95, 244u);
  EXPECT_EQ(s.k_elbow, 1u);
}

TEST(Coverage, SingleSpikeNeedsOneEntry) {
  std::vector<double> v(16, 0.0);
  v[9] = 5.0;
  const auto s = coverage_summary(rank_experts(RoutingMap(2, 8, v, MapKind::kGradient)));
  EXPECT_EQ(s.k80, 1u);
  EXPECT_EQ(s.k95, 1u);
  EXPECT_EQ(s.k_elbow, 1u);
}

TEST(Coverage, MatchesIntegerOracleOnRandomCounts) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::int64_t> d(0, 50);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> ints(24);
    for (auto& x : ints) x = d(rng);
    ints[trial % 24] += 1;
    std::vector<double> v(ints.begin(), ints.end());
    const auto s = coverage_summary(rank_experts(RoutingMap(3, 8, v, MapKind::kRawCount)));
    EXPECT_EQ(s.k80, oracle::exact_coverage(ints, 80));
    EXPECT_EQ(s.k90, oracle::exact_coverage(ints, 90));
    EXPECT_EQ(s.k95, oracle::exact_coverage(ints, 95));
    EXPECT_EQ(s.k_elbow, oracle::elbow(v));
  }
}

TEST(Coverage, InvariantUnderExpertPermutation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(4 * 8);
  for (auto& x : v) x = u(rng);
  const auto base = coverage_summary(rank_experts(RoutingMap(4, 8, v, MapKind::kGradient)));
  for (int trial = 0; trial < 20; ++trial) {
    auto p = v;
    for (std::size_t l = 0; l < 4; ++l) std::shuffle(p.begin() + l * 8, p.begin() + (l + 1) * 8, rng);
    const auto s = coverage_summary(rank_experts(RoutingMap(4, 8, p, MapKind::kGradient)));
    EXPECT_EQ(s, base);
  }
}

TEST(Coverage, MeanOfSummaries) {
  const std::vector<CoverageSummary> s{{1, 2, 3, 1, 0.5, 0.9}, {3, 4, 5, 2, 0.3, 0.7}};
  const auto m = mean_coverage(s);
  EXPECT_EQ(m.k80, 2.0);
  EXPECT_EQ(m.k95, 4.0);
  EXPECT_EQ(m.k_elbow, 1.5);
  EXPECT_DOUBLE_EQ(m.top1, 0.4);
  EXPECT_THROW(mean_coverage({}), std::invalid_argument);
}

TEST(LayerSummary, UniformRowAnchors) {
  const RoutingMap u(1, 8, std::vector<double>(8, 0.125), MapKind::kLayerNormalized);
  const auto m = layer_summary(u)[0];
  EXPECT_NEAR(m.entropy_nats, std::log(8.0), 1e-12);
  EXPECT_NEAR(m.entropy_norm, 1.0, 1e-12);
  EXPECT_NEAR(m.effective_experts, 8.0, 1e-9);
  EXPECT_EQ(m.dominant, 0.125);
  EXPECT_EQ(m.top2_sum, 0.25);
  EXPECT_EQ(m.active_count, 8.0);
}

TEST(LayerSummary, OneHotAnchors) {
  std::vector<double> v(8, 0.0);
  v[3] = 7.0;
  const auto m = layer_summary(RoutingMap(1, 8, v, MapKind::kRawCount))[0];
  EXPECT_EQ(m.entropy_nats, 0.0);
  EXPECT_EQ(m.effective_experts, 1.0);
  EXPECT_EQ(m.dominant, 1.0);
  EXPECT_EQ(m.active_count, 1.0);
}

TEST(LayerSummary, TwoWaySplit) {
  std::vector<double> v(8, 0.0);
  v[0] = v[4] = 0.5;
  const auto m = layer_summary(RoutingMap(1, 8, v, MapKind::kLayerNormalized))[0];
  EXPECT_NEAR(m.entropy_nats, std::log(2.0), 1e-15);
  EXPECT_NEAR(m.effective_experts, 2.0, 1e-12);
  EXPECT_EQ(m.top2_sum, 1.0);
}

TEST(LayerSummary, NormalizedEntropyConsistency) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(6 * 8);
  for (auto& x : v) x = u(rng);
  for (const auto& m : layer_summary(RoutingMap(6, 8, v, MapKind::kGradient))) {
    EXPECT_NEAR(std::exp(m.entropy_norm * std::log(8.0)), m.effective_experts, 1e-9);
    EXPECT_GE(m.entropy_nats, 0.0);
    EXPECT_LE(m.entropy_nats, std::log(8.0) + 1e-12);
  }
}

TEST(LayerSummary, RawCountsUseProportionsGradientsKeepScale) {
  const RoutingMap raw(1, 4, {6, 2, 2, 0}, MapKind::kRawCount);
  const auto r = layer_summary(raw)[0];
  EXPECT_DOUBLE_EQ(r.dominant, 0.6);
  EXPECT_DOUBLE_EQ(r.top2_sum, 0.8);
  EXPECT_EQ(r.active_count, 3.0);

  const RoutingMap grad(1, 4, {0.006, 0.002, 0.002, 0.0}, MapKind::kGradient);
  const auto g = layer_summary(grad)[0];
  EXPECT_DOUBLE_EQ(g.dominant, 0.006);
  EXPECT_DOUBLE_EQ(g.top2_sum, 0.008);
  EXPECT_NEAR(g.entropy_nats, r.entropy_nats, 1e-12);
}

TEST(LayerSummary, ActivityEpsilon) {
  const RoutingMap grad(1, 4, {1e-3, 1e-13, 5e-12, 0.0}, MapKind::kGradient);
  EXPECT_EQ(layer_summary(grad)[0].active_count, 2.0);
  EXPECT_EQ(layer_summary(grad, 1e-6)[0].active_count, 1.0);
}

TEST(LayerSummary, ZeroRowNamesLayer) {
  const RoutingMap g(2, 2, {0.1, 0.2, 0.0, 0.0}, MapKind::kGradient);
  try {
    (void)layer_summary(g);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
}

TEST(BlockAverage, MeansOverRange) {
  std::vector<LayerMetrics> layers(4);
  for (std::size_t i = 0; i < 4; ++i) {
    layers[i].dominant = static_cast<double>(i);
    layers[i].active_count = static_cast<double>(i + 1);
  }
  const auto b = block_average(layers, 2, 4);
  EXPECT_EQ(b.dominant, 2.5);
  EXPECT_EQ(b.active_count, 3.5);
  EXPECT_THROW(block_average(layers, 2, 2), std::invalid_argument);
  EXPECT_THROW(block_average(layers, 0, 5), std::invalid_argument);
}

TEST(Overlap, SharedPairsInFirstOrder) {
  const auto a = rank_experts(RoutingMap(1, 4, {4, 3, 2, 1}, MapKind::kGradient));
  const auto b = rank_experts(RoutingMap(1, 4, {1, 3, 4, 2}, MapKind::kGradient));
  const auto both = top_k_overlap(a, b, 2);
  ASSERT_EQ(both.size(), 1u);
  EXPECT_EQ(both[0], (LayerExpert{0, 1}));
  EXPECT_EQ(top_k_overlap(a, a, 3).size(), 3u);
  EXPECT_EQ(top_k_overlap(a, b, 4).size(), 4u);
  const auto c = rank_experts(RoutingMap(1, 4, {0, 0, 1, 2}, MapKind::kGradient));
  EXPECT_TRUE(top_k_overlap(a, c, 2).empty());
  EXPECT_THROW(top_k_overlap(a, b, 0), std::invalid_argument);
  EXPECT_THROW(top_k_overlap(a, b, 5), std::invalid_argument);
}

TEST(GroupMean, AveragesNormalizedMapsOfTheGroupOnly) {
  auto rec = [](std::string id, std::string group, std::vector<double> counts, std::size_t tokens) {
    return PromptRecord{std::move(id), std::move(group), tokens, RoutingMap(1, 4, std::move(counts), MapKind::kRawCount),
                        std::nullopt};
  };
  // The second benign prompt is a scaled copy of the first; normalization removes length.
  const std::vector<PromptRecord> records{rec("a", "benign", {2, 2, 0, 0}, 2), rec("b", "benign", {4, 4, 0, 0}, 4),
                                          rec("c", "other", {0, 0, 2, 2}, 2)};
  const auto m = group_mean_map(records, "benign", MapKind::kLayerNormalized);
  EXPECT_EQ(m.at(0, 0), 0.5);
  EXPECT_EQ(m.at(0, 2), 0.0);
  EXPECT_THROW(group_mean_map(records, "missing", MapKind::kLayerNormalized), ValidationError);
  EXPECT_THROW(group_mean_map(records, "benign", MapKind::kGradient), ValidationError);
}

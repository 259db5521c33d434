// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Ranked-distribution coverage statistics over flattened (layer, expert)
// scores, and per-layer concentration metrics.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "moeprobe/model.hpp"
#include "moeprobe/routing_map.hpp"

namespace moeprobe {

struct RankedEntry {
  std::size_t layer = 0;
  std::size_t expert = 0;
  double score = 0.0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct RankedDistribution {
  std::size_t num_layers = 0;
  std::size_t num_experts = 0;
  std::vector<RankedEntry> entries;  // score descending, ties by (layer, expert)
  double total_mass = 0.0;
};

/// Flattens and sorts all L x E pairs. Throws std::invalid_argument on zero mass.
RankedDistribution rank_experts(const RoutingMap& map);

struct CoverageSummary {
  std::size_t k80 = 0;
  std::size_t k90 = 0;
  std::size_t k95 = 0;
  std::size_t k_elbow = 0;
  double top1 = 0.0;
  double top5 = 0.0;

  friend bool operator==(const CoverageSummary&, const CoverageSummary&) = default;
};

// Cumulative mass comparisons allow this relative slack so that sums such as
// 0.4 + 0.3 + 0.2 count as reaching 90% of 1.0.
inline constexpr double kCoverageRelTol = 1e-12;

/// Smallest n whose top-n cumulative score reaches `fraction` of the total mass.
std::size_t coverage_count(const RankedDistribution& ranked, double fraction);

/// k80/k90/k95; k_elbow = 1-based rank i maximizing score_i - score_{i+1}
/// (first on ties); top1; top5 = sum of the first min(5, n) scores.
CoverageSummary coverage_summary(const RankedDistribution& ranked);

/// Means of prompt-level summaries (prompt-level tables report these).
struct CoverageMeans {
  double k80 = 0, k90 = 0, k95 = 0, k_elbow = 0, top1 = 0, top5 = 0;
};
CoverageMeans mean_coverage(std::span<const CoverageSummary> summaries);

/// The map a prompt record contributes to analysis of `kind`:
/// layer-normalized activations or raw gradients.
RoutingMap analysis_map(const PromptRecord& record, MapKind kind);

/// Elementwise mean of the group's layer-normalized activation maps or gradient
/// maps. Throws on an empty group, missing gradients, or inconsistent (L, E).
RoutingMap group_mean_map(std::span<const PromptRecord> records, std::string_view group, MapKind kind);

/// Elementwise mean of maps of the same kind and shape.
RoutingMap mean_map(std::span<const RoutingMap> maps);

struct LayerMetrics {
  double dominant = 0.0;
  double top2_sum = 0.0;
  double entropy_nats = 0.0;
  double entropy_norm = 0.0;  // entropy_nats / ln E
  double effective_experts = 0.0;
  double active_count = 0.0;  // integral per layer, fractional after block averaging

  friend bool operator==(const LayerMetrics&, const LayerMetrics&) = default;
};

/// 0 for count-derived maps, 1e-12 for gradient maps.
double default_activity_epsilon(MapKind kind);

/// Per-layer metrics. Entropy and effective experts use the row renormalized to
/// a distribution. dominant/top2 use the row's own scale for layer-normalized
/// and gradient maps and the renormalized row for raw counts.
std::vector<LayerMetrics> layer_summary(const RoutingMap& map, std::optional<double> activity_epsilon = std::nullopt);

/// Arithmetic mean of each metric over layers [begin, end).
LayerMetrics block_average(std::span<const LayerMetrics> layers, std::size_t begin, std::size_t end);

/// Intersection of the two rankings' top-k pairs, in the order of `a`.
std::vector<LayerExpert> top_k_overlap(const RankedDistribution& a, const RankedDistribution& b, std::size_t k);

}  // namespace moeprobe

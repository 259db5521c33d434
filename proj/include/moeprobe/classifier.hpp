// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Six-way safety classification of (layer, expert) pairs from benign and
// malicious group averages.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "moeprobe/model.hpp"
#include "moeprobe/routing_map.hpp"

namespace moeprobe {

enum class ExpertCategory {
  kMaliciousDominant,
  kBenignDominant,
  kShared,
  kWeakMalicious,
  kWeakBenign,
  kUncertain,
};

inline constexpr std::array<ExpertCategory, 6> kAllCategories = {
    ExpertCategory::kMaliciousDominant, ExpertCategory::kBenignDominant, ExpertCategory::kShared,
    ExpertCategory::kWeakMalicious,     ExpertCategory::kWeakBenign,     ExpertCategory::kUncertain,
};

std::string_view to_string(ExpertCategory category);
ExpertCategory parse_category(std::string_view text);

struct ClassifierThresholds {
  double gap_threshold = 0.05;
  double min_avg_magnitude = 0.08;

  void validate() const;
};

// Defaults for activation scores (0.05 / 0.08) and gradient scores (1e-4 / 1e-4).
ClassifierThresholds default_thresholds(MapKind signal);

struct ExpertClassRow {
  std::size_t layer = 0;
  std::size_t expert = 0;
  double benign_avg = 0.0;
  double malicious_avg = 0.0;
  double safety_gap = 0.0;  // malicious_avg - benign_avg
  double abs_gap = 0.0;
  ExpertCategory category = ExpertCategory::kUncertain;

  friend bool operator==(const ExpertClassRow&, const ExpertClassRow&) = default;
};

/// Rules, first match wins, with gap = malicious - benign:
///   gap >= t and malicious >= m   -> malicious-dominant
///   gap <= -t and benign >= m     -> benign-dominant
///   |gap| < t                     -> shared
///   gap >= t and malicious < m    -> weak-malicious
///   gap <= -t and benign < m      -> weak-benign
///   otherwise                     -> uncertain (non-finite input; warns)
ExpertCategory classify_expert(double benign_avg, double malicious_avg, const ClassifierThresholds& thresholds);

struct CategoryCounts {
  std::array<std::size_t, 6> counts{};

  [[nodiscard]] std::size_t operator[](ExpertCategory c) const { return counts[static_cast<std::size_t>(c)]; }
  [[nodiscard]] std::size_t total() const;
};

struct Classification {
  std::vector<ExpertClassRow> rows;  // layer-major order
  CategoryCounts counts;
};

Classification classify_all(const RoutingMap& benign, const RoutingMap& malicious, const ClassifierThresholds& thresholds);

/// The n rows of `category` with the largest abs_gap (ties by layer, expert).
/// Warns when fewer than n exist; throws ValidationError when none do.
SuppressionMask select_suppression_set(std::span<const ExpertClassRow> rows, ExpertCategory category, std::size_t n);

}  // namespace moeprobe

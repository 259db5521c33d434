// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "moeprobe/diagnostics.hpp"
#include "moeprobe/errors.hpp"

namespace moeprobe {

std::string_view to_string(ExpertCategory category) {
  switch (category) {
    case ExpertCategory::kMaliciousDominant:
      return "malicious-dominant";
    case ExpertCategory::kBenignDominant:
      return "benign-dominant";
    case ExpertCategory::kShared:
      return "shared";
    case ExpertCategory::kWeakMalicious:
      return "weak-malicious";
    case ExpertCategory::kWeakBenign:
      return "weak-benign";
    case ExpertCategory::kUncertain:
      return "uncertain";
  }
  return "uncertain";
}

ExpertCategory parse_category(std::string_view text) {
  for (auto c : kAllCategories) {
    if (to_string(c) == text) return c;
  }
  throw ValidationError("unknown expert category '" + std::string(text) + "'");
}

void ClassifierThresholds::validate() const {
  if (!(gap_threshold > 0.0) || !std::isfinite(gap_threshold)) throw ValidationError("gap_threshold must be > 0");
  if (!(min_avg_magnitude > 0.0) || !std::isfinite(min_avg_magnitude)) {
    throw ValidationError("min_avg_magnitude must be > 0");
  }
}

ClassifierThresholds default_thresholds(MapKind signal) {
  if (signal == MapKind::kGradient) return {1e-4, 1e-4};
  return {0.05, 0.08};
}

ExpertCategory classify_expert(double benign_avg, double malicious_avg, const ClassifierThresholds& t) {
  if (!std::isfinite(benign_avg) || !std::isfinite(malicious_avg)) {
    warn("classify_expert: non-finite group average (benign=" + std::to_string(benign_avg) +
         ", malicious=" + std::to_string(malicious_avg) + "), marked uncertain");
    return ExpertCategory::kUncertain;
  }
  const double gap = malicious_avg - benign_avg;
  if (gap >= t.gap_threshold && malicious_avg >= t.min_avg_magnitude) return ExpertCategory::kMaliciousDominant;
  if (gap <= -t.gap_threshold && benign_avg >= t.min_avg_magnitude) return ExpertCategory::kBenignDominant;
  if (std::abs(gap) < t.gap_threshold) return ExpertCategory::kShared;
  if (gap >= t.gap_threshold && malicious_avg < t.min_avg_magnitude) return ExpertCategory::kWeakMalicious;
  if (gap <= -t.gap_threshold && benign_avg < t.min_avg_magnitude) return ExpertCategory::kWeakBenign;
  return ExpertCategory::kUncertain;
}

std::size_t CategoryCounts::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Classification classify_all(const RoutingMap& benign, const RoutingMap& malicious, const ClassifierThresholds& t) {
  t.validate();
  if (benign.num_layers() != malicious.num_layers() || benign.num_experts() != malicious.num_experts()) {
    throw ValidationError("classify_all: benign map is " + std::to_string(benign.num_layers()) + "x" +
                          std::to_string(benign.num_experts()) + " but malicious map is " +
                          std::to_string(malicious.num_layers()) + "x" + std::to_string(malicious.num_experts()));
  }
  Classification out;
  out.rows.reserve(benign.values().size());
  for (std::size_t l = 0; l < benign.num_layers(); ++l) {
    for (std::size_t e = 0; e < benign.num_experts(); ++e) {
      ExpertClassRow row;
      row.layer = l;
      row.expert = e;
      row.benign_avg = benign.at(l, e);
      row.malicious_avg = malicious.at(l, e);
      row.safety_gap = row.malicious_avg - row.benign_avg;
      row.abs_gap = std::abs(row.safety_gap);
      row.category = classify_expert(row.benign_avg, row.malicious_avg, t);
      ++out.counts.counts[static_cast<std::size_t>(row.category)];
      out.rows.push_back(row);
    }
  }
  return out;
}

SuppressionMask select_suppression_set(std::span<const ExpertClassRow> rows, ExpertCategory category, std::size_t n) {
  if (n < 1) throw std::invalid_argument("select_suppression_set: n must be >= 1");
  std::vector<ExpertClassRow> candidates;
  for (const auto& r : rows) {
    if (r.category == category) candidates.push_back(r);
  }
  if (candidates.empty()) {
    throw ValidationError("select_suppression_set: no " + std::string(to_string(category)) + " rows");
  }
  std::sort(candidates.begin(), candidates.end(), [](const ExpertClassRow& a, const ExpertClassRow& b) {
    if (a.abs_gap != b.abs_gap) return a.abs_gap > b.abs_gap;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.expert < b.expert;
  });
  if (candidates.size() < n) {
    warn("select_suppression_set: requested " + std::to_string(n) + " " + std::string(to_string(category)) +
         " pairs, only " + std::to_string(candidates.size()) + " available");
  }
  SuppressionMask mask;
  for (std::size_t i = 0; i < std::min(n, candidates.size()); ++i) mask.add({candidates[i].layer, candidates[i].expert});
  return mask;
}

}  // namespace moeprobe

// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "moeprobe/errors.hpp"
#include "moeprobe/probes.hpp"

namespace moeprobe {

RankedDistribution rank_experts(const RoutingMap& map) {
  RankedDistribution out;
  out.num_layers = map.num_layers();
  out.num_experts = map.num_experts();
  out.entries.reserve(map.values().size());
  for (std::size_t l = 0; l < map.num_layers(); ++l)
    for (std::size_t e = 0; e < map.num_experts(); ++e) out.entries.push_back({l, e, map.at(l, e)});
  // Entries start in (layer, expert) order, so a stable sort keeps that order on ties.
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const RankedEntry& a, const RankedEntry& b) { return a.score > b.score; });
  for (const auto& entry : out.entries) out.total_mass += entry.score;
  if (!(out.total_mass > 0.0)) throw std::invalid_argument("rank_experts: map has zero total mass");
  return out;
}

std::size_t coverage_count(const RankedDistribution& ranked, double fraction) {
  const double target = fraction * ranked.total_mass * (1.0 - kCoverageRelTol);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
    cumulative += ranked.entries[i].score;
    if (cumulative >= target) return i + 1;
  }
  return ranked.entries.size();
}

CoverageSummary coverage_summary(const RankedDistribution& ranked) {
  const auto& entries = ranked.entries;
  if (entries.empty()) throw std::invalid_argument("coverage_summary: empty distribution");
  CoverageSummary s;
  s.k80 = coverage_count(ranked, 0.80);
  s.k90 = coverage_count(ranked, 0.90);
  s.k95 = coverage_count(ranked, 0.95);

  s.k_elbow = 1;
  double best_drop = -1.0;
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    const double drop = entries[i].score - entries[i + 1].score;
    if (drop > best_drop) {
      best_drop = drop;
      s.k_elbow = i + 1;
    }
  }
  s.top1 = entries.front().score;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, entries.size()); ++i) s.top5 += entries[i].score;
  return s;
}

CoverageMeans mean_coverage(std::span<const CoverageSummary> summaries) {
  if (summaries.empty()) throw std::invalid_argument("mean_coverage: no summaries");
  CoverageMeans m;
  for (const auto& s : summaries) {
    m.k80 += static_cast<double>(s.k80);
    m.k90 += static_cast<double>(s.k90);
    m.k95 += static_cast<double>(s.k95);
    m.k_elbow += static_cast<double>(s.k_elbow);
    m.top1 += s.top1;
    m.top5 += s.top5;
  }
  const double n = static_cast<double>(summaries.size());
  m.k80 /= n;
  m.k90 /= n;
  m.k95 /= n;
  m.k_elbow /= n;
  m.top1 /= n;
  m.top5 /= n;
  return m;
}

RoutingMap analysis_map(const PromptRecord& record, MapKind kind) {
  switch (kind) {
    case MapKind::kLayerNormalized:
      return normalize_map(record.activation);
    case MapKind::kGradient:
      if (!record.gradient) {
        throw ValidationError("prompt '" + record.id + "' has no gradient map (capture with gradients enabled)");
      }
      return *record.gradient;
    case MapKind::kRawCount:
      return record.activation;
  }
  throw std::invalid_argument("analysis_map: unknown kind");
}

RoutingMap mean_map(std::span<const RoutingMap> maps) {
  if (maps.empty()) throw std::invalid_argument("mean_map: no maps");
  const auto& first = maps.front();
  std::vector<double> acc(first.values().size(), 0.0);
  for (const auto& m : maps) {
    if (m.num_layers() != first.num_layers() || m.num_experts() != first.num_experts()) {
      throw ValidationError("mean_map: inconsistent map shapes");
    }
    if (m.kind() != first.kind()) throw ValidationError("mean_map: mixed map kinds");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += m.values()[i];
  }
  for (auto& v : acc) v /= static_cast<double>(maps.size());
  return RoutingMap(first.num_layers(), first.num_experts(), std::move(acc), first.kind());
}

RoutingMap group_mean_map(std::span<const PromptRecord> records, std::string_view group, MapKind kind) {
  if (kind == MapKind::kRawCount) {
    throw std::invalid_argument("group_mean_map: averaging raw counts is not a raw-count map; use layer-normalized");
  }
  std::vector<RoutingMap> maps;
  for (const auto& r : records) {
    if (r.group == group) maps.push_back(analysis_map(r, kind));
  }
  if (maps.empty()) throw ValidationError("group '" + std::string(group) + "' has no prompts");
  return mean_map(maps);
}

double default_activity_epsilon(MapKind kind) { return kind == MapKind::kGradient ? 1e-12 : 0.0; }

std::vector<LayerMetrics> layer_summary(const RoutingMap& map, std::optional<double> activity_epsilon) {
  const double eps = activity_epsilon.value_or(default_activity_epsilon(map.kind()));
  const std::size_t experts = map.num_experts();
  const double log_e = std::log(static_cast<double>(experts));
  std::vector<LayerMetrics> out;
  out.reserve(map.num_layers());
  for (std::size_t l = 0; l < map.num_layers(); ++l) {
    const auto row = map.row(l);
    const double total = map.row_sum(l);
    if (!(total > 0.0)) throw ValidationError("layer_summary: layer " + std::to_string(l) + " is all zero");

    std::vector<double> scaled(row.begin(), row.end());
    if (map.kind() == MapKind::kRawCount) {
      for (auto& v : scaled) v /= total;
    }
    std::sort(scaled.begin(), scaled.end(), std::greater<>());

    LayerMetrics m;
    m.dominant = scaled[0];
    m.top2_sum = scaled[0] + (experts > 1 ? scaled[1] : 0.0);
    double h = 0.0;
    for (double v : row) {
      const double p = v / total;
      if (p > 0.0) h -= p * std::log(p);
    }
    m.entropy_nats = h;
    m.entropy_norm = experts > 1 ? h / log_e : 0.0;
    m.effective_experts = std::exp(h);
    m.active_count = static_cast<double>(std::count_if(row.begin(), row.end(), [eps](double v) { return v > eps; }));
    out.push_back(m);
  }
  return out;
}

LayerMetrics block_average(std::span<const LayerMetrics> layers, std::size_t begin, std::size_t end) {
  if (begin >= end || end > layers.size()) {
    throw std::invalid_argument("block_average: empty or out-of-range layer range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ")");
  }
  LayerMetrics m;
  for (std::size_t l = begin; l < end; ++l) {
    m.dominant += layers[l].dominant;
    m.top2_sum += layers[l].top2_sum;
    m.entropy_nats += layers[l].entropy_nats;
    m.entropy_norm += layers[l].entropy_norm;
    m.effective_experts += layers[l].effective_experts;
    m.active_count += layers[l].active_count;
  }
  const double n = static_cast<double>(end - begin);
  m.dominant /= n;
  m.top2_sum /= n;
  m.entropy_nats /= n;
  m.entropy_norm /= n;
  m.effective_experts /= n;
  m.active_count /= n;
  return m;
}

std::vector<LayerExpert> top_k_overlap(const RankedDistribution& a, const RankedDistribution& b, std::size_t k) {
  if (a.num_layers != b.num_layers || a.num_experts != b.num_experts) {
    throw std::invalid_argument("top_k_overlap: rankings cover different (L, E) spaces");
  }
  if (k < 1 || k > a.entries.size()) {
    throw std::invalid_argument("top_k_overlap: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(a.entries.size()) + "]");
  }
  std::set<LayerExpert> top_b;
  for (std::size_t i = 0; i < k; ++i) top_b.insert({b.entries[i].layer, b.entries[i].expert});
  std::vector<LayerExpert> out;
  for (std::size_t i = 0; i < k; ++i) {
    const LayerExpert p{a.entries[i].layer, a.entries[i].expert};
    if (top_b.count(p)) out.push_back(p);
  }
  return out;
}

}  // namespace moeprobe

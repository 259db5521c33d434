// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace moeprobe {

enum class MapKind { kRawCount, kLayerNormalized, kGradient };

std::string_view to_string(MapKind kind);
MapKind parse_map_kind(std::string_view text);

/// L x E grid of nonnegative per-(layer, expert) scores.
class RoutingMap {
 public:
  RoutingMap() = default;
  RoutingMap(std::size_t num_layers, std::size_t num_experts, MapKind kind);
  // Throws ValidationError on size mismatch, negative or non-finite values.
  RoutingMap(std::size_t num_layers, std::size_t num_experts, std::vector<double> values, MapKind kind);

  [[nodiscard]] std::size_t num_layers() const { return num_layers_; }
  [[nodiscard]] std::size_t num_experts() const { return num_experts_; }
  [[nodiscard]] MapKind kind() const { return kind_; }

  [[nodiscard]] double at(std::size_t layer, std::size_t expert) const { return values_[layer * num_experts_ + expert]; }
  void set(std::size_t layer, std::size_t expert, double value);
  void add(std::size_t layer, std::size_t expert, double amount) { set(layer, expert, at(layer, expert) + amount); }

  [[nodiscard]] std::span<const double> row(std::size_t layer) const;
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] double row_sum(std::size_t layer) const;
  [[nodiscard]] double total() const;

  /// Kind-specific invariants: integer counts for raw-count maps, unit row sums
  /// (within 1e-9) for layer-normalized maps. Messages carry coordinates.
  void validate() const;

  friend bool operator==(const RoutingMap&, const RoutingMap&) = default;

 private:
  std::size_t num_layers_ = 0;
  std::size_t num_experts_ = 0;
  std::vector<double> values_;
  MapKind kind_ = MapKind::kRawCount;
};

struct PromptRecord {
  std::string id;
  std::string group;
  std::size_t token_count = 0;
  RoutingMap activation;               // raw-count
  std::optional<RoutingMap> gradient;  // gradient

  /// Shared (L, E), token_count >= 1, and every activation row summing to
  /// top_k * token_count.
  void validate(std::size_t top_k) const;

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

}  // namespace moeprobe

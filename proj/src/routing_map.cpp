// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/routing_map.hpp"

#include <cmath>
#include <numeric>

#include "moeprobe/errors.hpp"

namespace moeprobe {

namespace {

std::string coord(std::size_t layer, std::size_t expert) {
  return "layer " + std::to_string(layer) + ", expert " + std::to_string(expert);
}

}  // namespace

std::string_view to_string(MapKind kind) {
  switch (kind) {
    case MapKind::kRawCount:
      return "raw-count";
    case MapKind::kLayerNormalized:
      return "layer-normalized";
    case MapKind::kGradient:
      return "gradient";
  }
  return "unknown";
}

MapKind parse_map_kind(std::string_view text) {
  if (text == "raw-count") return MapKind::kRawCount;
  if (text == "layer-normalized") return MapKind::kLayerNormalized;
  if (text == "gradient") return MapKind::kGradient;
  throw ValidationError("unknown map kind '" + std::string(text) + "'");
}

RoutingMap::RoutingMap(std::size_t num_layers, std::size_t num_experts, MapKind kind)
    : num_layers_(num_layers), num_experts_(num_experts), values_(num_layers * num_experts, 0.0), kind_(kind) {}

RoutingMap::RoutingMap(std::size_t num_layers, std::size_t num_experts, std::vector<double> values, MapKind kind)
    : num_layers_(num_layers), num_experts_(num_experts), values_(std::move(values)), kind_(kind) {
  if (values_.size() != num_layers_ * num_experts_) {
    throw ValidationError("routing map: " + std::to_string(values_.size()) + " values for " +
                          std::to_string(num_layers_) + "x" + std::to_string(num_experts_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
      throw ValidationError("routing map: invalid value at " + coord(i / num_experts_, i % num_experts_));
    }
  }
}

void RoutingMap::set(std::size_t layer, std::size_t expert, double value) {
  if (layer >= num_layers_ || expert >= num_experts_) throw std::out_of_range("routing map index out of range");
  if (!std::isfinite(value) || value < 0.0) {
    throw ValidationError("routing map: invalid value at " + coord(layer, expert));
  }
  values_[layer * num_experts_ + expert] = value;
}

std::span<const double> RoutingMap::row(std::size_t layer) const {
  if (layer >= num_layers_) throw std::out_of_range("routing map layer out of range");
  return std::span<const double>(values_).subspan(layer * num_experts_, num_experts_);
}

double RoutingMap::row_sum(std::size_t layer) const {
  const auto r = row(layer);
  return std::accumulate(r.begin(), r.end(), 0.0);
}

double RoutingMap::total() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

void RoutingMap::validate() const {
  if (num_layers_ == 0 || num_experts_ == 0) throw ValidationError("routing map has no layers or experts");
  for (std::size_t l = 0; l < num_layers_; ++l) {
    for (std::size_t e = 0; e < num_experts_; ++e) {
      const double v = at(l, e);
      if (!std::isfinite(v) || v < 0.0) throw ValidationError("routing map: invalid value at " + coord(l, e));
      if (kind_ == MapKind::kRawCount && v != std::floor(v)) {
        throw ValidationError("raw-count map: non-integer count at " + coord(l, e));
      }
    }
    if (kind_ == MapKind::kLayerNormalized && std::abs(row_sum(l) - 1.0) > 1e-9) {
      throw ValidationError("layer-normalized map: row " + std::to_string(l) + " sums to " +
                            std::to_string(row_sum(l)));
    }
  }
}

void PromptRecord::validate(std::size_t top_k) const {
  if (id.empty()) throw ValidationError("prompt record with empty id");
  if (token_count < 1) throw ValidationError("prompt '" + id + "': token_count must be >= 1");
  if (activation.kind() != MapKind::kRawCount) throw ValidationError("prompt '" + id + "': activation must be raw-count");
  activation.validate();
  const double expected = static_cast<double>(top_k * token_count);
  for (std::size_t l = 0; l < activation.num_layers(); ++l) {
    const double s = activation.row_sum(l);
    if (s == 0.0) throw ValidationError("prompt '" + id + "': all-zero activation row at layer " + std::to_string(l));
    if (s != expected) {
      throw ValidationError("prompt '" + id + "': activation row at layer " + std::to_string(l) + " sums to " +
                            std::to_string(static_cast<long long>(s)) + ", expected top_k*token_count = " +
                            std::to_string(static_cast<long long>(expected)));
    }
  }
  if (gradient) {
    if (gradient->kind() != MapKind::kGradient) throw ValidationError("prompt '" + id + "': gradient map has wrong kind");
    if (gradient->num_layers() != activation.num_layers() || gradient->num_experts() != activation.num_experts()) {
      throw ValidationError("prompt '" + id + "': gradient and activation maps differ in shape");
    }
    gradient->validate();
  }
}

}  // namespace moeprobe

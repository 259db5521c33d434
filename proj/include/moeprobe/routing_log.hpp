// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// RoutingLog: the JSON container for per-prompt routing maps. See
// docs/routing_log_format.md.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "moeprobe/routing_map.hpp"

namespace moeprobe {

inline constexpr std::string_view kRoutingLogFormat = "moe-routing-log";
inline constexpr int kRoutingLogVersion = 1;

struct RoutingLogMeta {
  std::size_t num_layers = 0;
  std::size_t num_experts = 0;
  std::size_t top_k = 0;
  std::string source;
  nlohmann::json capture = nlohmann::json::object();  // free-form capture options

  friend bool operator==(const RoutingLogMeta&, const RoutingLogMeta&) = default;
};

struct RoutingLog {
  RoutingLogMeta meta;
  std::vector<PromptRecord> prompts;

  /// Every record matches meta's (L, E) and conserves top_k * token_count;
  /// ids are unique.
  void validate() const;
  [[nodiscard]] std::vector<std::string> groups() const;  // first-appearance order

  friend bool operator==(const RoutingLog&, const RoutingLog&) = default;
};

struct LoadResult {
  RoutingLog log;
  std::vector<std::string> warnings;  // unknown fields
};

/// Pretty-printed JSON; doubles use the shortest representation that parses
/// back to the same value.
std::string serialize_routing_log(const RoutingLog& log);
LoadResult parse_routing_log(std::string_view text);

void save_routing_log(const RoutingLog& log, const std::filesystem::path& path);
/// Loads and validates; unknown-field warnings are also sent to warn().
LoadResult load_routing_log(const std::filesystem::path& path);

}  // namespace moeprobe

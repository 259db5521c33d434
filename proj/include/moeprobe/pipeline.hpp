// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Capture, analysis, classification and intervention steps shared by the CLI
// subcommands, plus the report bundle writer.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moeprobe/classifier.hpp"
#include "moeprobe/intervention.hpp"
#include "moeprobe/metrics.hpp"
#include "moeprobe/probes.hpp"
#include "moeprobe/report.hpp"
#include "moeprobe/routing_log.hpp"

namespace moeprobe {

enum class Signal { kActivation, kGradient };

std::string_view to_string(Signal signal);
Signal parse_signal(std::string_view text);
/// Activation analysis uses layer-normalized maps; gradient analysis raw gradients.
MapKind analysis_kind(Signal signal);

/// One prompt per nonempty line; lines starting with '#' are skipped.
/// Ids are "<group>-<n>" with n counting prompts from 1.
std::vector<PromptInput> parse_prompt_file(std::string_view text, const std::string& group);
std::vector<PromptInput> load_prompt_file(const std::filesystem::path& path, const std::string& group);

RoutingLog capture_log(const MoeModel& model, std::span<const PromptInput> prompts, const CaptureOptions& options);

/// Merges logs with identical (L, E, K); ids must stay unique.
RoutingLog merge_logs(std::span<const RoutingLog> logs);

struct SignalAnalysis {
  Signal signal = Signal::kActivation;
  std::vector<std::string> groups;                // first-appearance order
  std::vector<RoutingMap> group_maps;             // per group
  std::vector<RankedDistribution> group_ranked;   // per group
  std::vector<GroupCoverage> group_coverage;      // per group
  std::vector<PromptCoverage> prompt_coverage;    // per prompt, log order
  std::vector<GroupCoverageMeans> prompt_means;   // per group
  std::vector<GroupLayers> group_layers;          // per group
  std::vector<GroupLayers> prompt_layer_means;    // per group, mean of prompt-level layer metrics

  [[nodiscard]] std::size_t group_index(std::string_view group) const;  // throws ValidationError
};

/// Throws ValidationError when the log is empty or, for gradient, lacks gradients.
SignalAnalysis analyze_signal(const RoutingLog& log, Signal signal);

struct GroupNames {
  std::string benign = "benign";
  std::string malicious = "malicious";
};

Classification classify_analysis(const SignalAnalysis& analysis, const GroupNames& names,
                                 const ClassifierThresholds& thresholds);

struct SignalReport {
  SignalAnalysis analysis;
  ClassifierThresholds thresholds;
  std::optional<Classification> classification;
  std::optional<SuppressionMask> suppression;
  std::vector<PairedOutcome> outcomes;
  std::optional<TransitionSummary> transitions;
  std::vector<std::string> notes;  // skipped steps and why
};

struct ReportBundle {
  RoutingLogMeta meta;
  GroupNames names;
  std::size_t overlap_k = 10;
  std::size_t prompt_count = 0;
  std::vector<std::pair<std::string, std::string>> settings;  // echoed into metadata.txt
  std::vector<SignalReport> signals;
  std::vector<std::string> notes;
};

struct ReportOptions {
  GroupNames names;
  std::vector<Signal> signals = {Signal::kActivation, Signal::kGradient};
  std::optional<ClassifierThresholds> activation_thresholds;  // defaults per signal when empty
  std::optional<ClassifierThresholds> gradient_thresholds;
  std::size_t top_n = 5;
  std::size_t overlap_k = 10;
  InterventionOptions intervention;
  std::optional<LabelTable> labels;
};

/// Analyzes, classifies and (with a model and prompts, or with labels alone)
/// runs the suppression intervention on the malicious group for each signal.
/// Steps that cannot run are skipped with a note rather than failing.
ReportBundle build_report(const RoutingLog& log, const ReportOptions& options, const MoeModel* model,
                          std::span<const PromptInput> prompts);

/// Writes the CSV files and metadata.txt into `dir` (created if missing).
/// Output depends only on the bundle; no timestamps or paths are written.
std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle, const std::filesystem::path& dir);

}  // namespace moeprobe

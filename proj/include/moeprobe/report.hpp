// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// CSV table builders (and parsers for the summary tables) used by the CLI
// and the report bundle. Numbers use 6 significant digits.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moeprobe/classifier.hpp"
#include "moeprobe/csv.hpp"
#include "moeprobe/intervention.hpp"
#include "moeprobe/metrics.hpp"

namespace moeprobe {

struct GroupCoverage {
  std::string group;
  CoverageSummary summary;
};

struct PromptCoverage {
  std::string prompt_id;
  std::string group;
  CoverageSummary summary;
};

struct GroupCoverageMeans {
  std::string group;
  CoverageMeans means;
};

struct GroupLayers {
  std::string group;
  std::vector<LayerMetrics> layers;
};

// group,k80,k90,k95,k_elbow,top1,top5
CsvTable expert_summary_table(std::span<const GroupCoverage> rows);
std::vector<GroupCoverage> parse_expert_summary_table(const CsvTable& table);

// prompt_id,group,k80,k90,k95,k_elbow,top1,top5
CsvTable prompt_summary_table(std::span<const PromptCoverage> rows);

// group,k80,k90,k95,k_elbow,top1,top5 (means over the group's prompts)
CsvTable prompt_mean_table(std::span<const GroupCoverageMeans> rows);

// group,layer,dominant,top2_sum,entropy_nats,entropy_norm,effective_experts,active_count
CsvTable layer_summary_table(std::span<const GroupLayers> groups);
std::vector<GroupLayers> parse_layer_summary_table(const CsvTable& table);

struct LayerBlock {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

/// "all" over every layer and "last-quarter" over the final ceil(L/4) layers.
std::vector<LayerBlock> default_layer_blocks(std::size_t num_layers);

// group,block,first_layer,last_layer,dominant,top2_sum,entropy_nats,entropy_norm,effective_experts,active_count
CsvTable block_summary_table(std::span<const GroupLayers> groups, std::span<const LayerBlock> blocks);

// group,rank,layer,expert,score,cumulative (cumulative as a fraction of total mass)
CsvTable rank_curve_table(const std::string& group, const RankedDistribution& ranked);

// layer,expert,rank_first,rank_second: the pairs in both top-k lists, in the
// first ranking's order.
CsvTable overlap_table(const RankedDistribution& first, const RankedDistribution& second, std::size_t k);

// layer,expert,benign_avg,malicious_avg,safety_gap,abs_gap,category
CsvTable classification_table(std::span<const ExpertClassRow> rows);
std::vector<ExpertClassRow> parse_classification_table(const CsvTable& table);

// category,count (one line per category, then "total")
CsvTable category_counts_table(const CategoryCounts& counts);

// rank,layer,expert,abs_gap
CsvTable suppression_set_table(std::span<const ExpertClassRow> rows, const SuppressionMask& mask);

// prompt_id,baseline_label,suppressed_label,transition (unlabeled rows print "error")
CsvTable intervention_table(std::span<const PairedOutcome> outcomes);

// quantity,value: n_prompts, baseline_restricted, suppressed_restricted,
// r_to_n, n_to_r, both_r, both_n, relative_reduction
CsvTable transitions_table(const TransitionSummary& summary);

}  // namespace moeprobe

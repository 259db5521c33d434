// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/report.hpp"

#include <algorithm>
#include <map>

#include "moeprobe/errors.hpp"

namespace moeprobe {

namespace {

const CsvRow kCoverageColumns = {"k80", "k90", "k95", "k_elbow", "top1", "top5"};
const CsvRow kLayerColumns = {"dominant",         "top2_sum",          "entropy_nats",
                              "entropy_norm",     "effective_experts", "active_count"};

CsvRow concat(CsvRow a, const CsvRow& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void require_header(const CsvTable& table, const CsvRow& expected, std::string_view what) {
  if (table.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw ValidationError(std::string(what) + ": expected columns " + want);
  }
}

void append_coverage(CsvRow& row, const CoverageSummary& s) {
  row.push_back(format_number(s.k80));
  row.push_back(format_number(s.k90));
  row.push_back(format_number(s.k95));
  row.push_back(format_number(s.k_elbow));
  row.push_back(format_number(s.top1));
  row.push_back(format_number(s.top5));
}

void append_layer(CsvRow& row, const LayerMetrics& m) {
  row.push_back(format_number(m.dominant));
  row.push_back(format_number(m.top2_sum));
  row.push_back(format_number(m.entropy_nats));
  row.push_back(format_number(m.entropy_norm));
  row.push_back(format_number(m.effective_experts));
  row.push_back(format_number(m.active_count));
}

LayerMetrics parse_layer(const CsvRow& row, std::size_t offset, const std::string& where) {
  LayerMetrics m;
  m.dominant = parse_double(row[offset + 0], where + " dominant");
  m.top2_sum = parse_double(row[offset + 1], where + " top2_sum");
  m.entropy_nats = parse_double(row[offset + 2], where + " entropy_nats");
  m.entropy_norm = parse_double(row[offset + 3], where + " entropy_norm");
  m.effective_experts = parse_double(row[offset + 4], where + " effective_experts");
  m.active_count = parse_double(row[offset + 5], where + " active_count");
  return m;
}

}  // namespace

CsvTable expert_summary_table(std::span<const GroupCoverage> rows) {
  CsvTable t{concat({"group"}, kCoverageColumns), {}};
  for (const auto& r : rows) {
    CsvRow row{r.group};
    append_coverage(row, r.summary);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<GroupCoverage> parse_expert_summary_table(const CsvTable& table) {
  require_header(table, concat({"group"}, kCoverageColumns), "expert summary");
  std::vector<GroupCoverage> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const std::string where = "expert summary row " + std::to_string(i + 1);
    GroupCoverage g;
    g.group = r[0];
    g.summary.k80 = parse_size(r[1], where + " k80");
    g.summary.k90 = parse_size(r[2], where + " k90");
    g.summary.k95 = parse_size(r[3], where + " k95");
    g.summary.k_elbow = parse_size(r[4], where + " k_elbow");
    g.summary.top1 = parse_double(r[5], where + " top1");
    g.summary.top5 = parse_double(r[6], where + " top5");
    out.push_back(std::move(g));
  }
  return out;
}

CsvTable prompt_summary_table(std::span<const PromptCoverage> rows) {
  CsvTable t{concat({"prompt_id", "group"}, kCoverageColumns), {}};
  for (const auto& r : rows) {
    CsvRow row{r.prompt_id, r.group};
    append_coverage(row, r.summary);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable prompt_mean_table(std::span<const GroupCoverageMeans> rows) {
  CsvTable t{concat({"group"}, kCoverageColumns), {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.group, format_number(r.means.k80), format_number(r.means.k90), format_number(r.means.k95),
                      format_number(r.means.k_elbow), format_number(r.means.top1), format_number(r.means.top5)});
  }
  return t;
}

CsvTable layer_summary_table(std::span<const GroupLayers> groups) {
  CsvTable t{concat({"group", "layer"}, kLayerColumns), {}};
  for (const auto& g : groups) {
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
      CsvRow row{g.group, format_number(l)};
      append_layer(row, g.layers[l]);
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

std::vector<GroupLayers> parse_layer_summary_table(const CsvTable& table) {
  require_header(table, concat({"group", "layer"}, kLayerColumns), "layer summary");
  std::vector<GroupLayers> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const std::string where = "layer summary row " + std::to_string(i + 1);
    if (out.empty() || out.back().group != r[0]) out.push_back({r[0], {}});
    const std::size_t layer = parse_size(r[1], where + " layer");
    if (layer != out.back().layers.size()) throw ValidationError(where + ": layers out of order");
    out.back().layers.push_back(parse_layer(r, 2, where));
  }
  return out;
}

std::vector<LayerBlock> default_layer_blocks(std::size_t num_layers) {
  if (num_layers == 0) throw std::invalid_argument("default_layer_blocks: no layers");
  const std::size_t quarter = (num_layers + 3) / 4;
  return {{"all", 0, num_layers}, {"last-quarter", num_layers - quarter, num_layers}};
}

CsvTable block_summary_table(std::span<const GroupLayers> groups, std::span<const LayerBlock> blocks) {
  CsvTable t{concat({"group", "block", "first_layer", "last_layer"}, kLayerColumns), {}};
  for (const auto& g : groups) {
    for (const auto& b : blocks) {
      CsvRow row{g.group, b.name, format_number(b.begin), format_number(b.end - 1)};
      append_layer(row, block_average(g.layers, b.begin, b.end));
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

CsvTable rank_curve_table(const std::string& group, const RankedDistribution& ranked) {
  CsvTable t{{"group", "rank", "layer", "expert", "score", "cumulative"}, {}};
  double cumulative = 0.0;
  for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
    const auto& e = ranked.entries[i];
    cumulative += e.score;
    t.rows.push_back({group, format_number(i + 1), format_number(e.layer), format_number(e.expert),
                      format_number(e.score), format_number(cumulative / ranked.total_mass)});
  }
  return t;
}

CsvTable overlap_table(const RankedDistribution& first, const RankedDistribution& second, std::size_t k) {
  const auto shared = top_k_overlap(first, second, k);
  std::map<LayerExpert, std::size_t> rank_a, rank_b;
  for (std::size_t i = 0; i < k; ++i) {
    rank_a[{first.entries[i].layer, first.entries[i].expert}] = i + 1;
    rank_b[{second.entries[i].layer, second.entries[i].expert}] = i + 1;
  }
  CsvTable t{{"layer", "expert", "rank_first", "rank_second"}, {}};
  for (const auto& p : shared) {
    t.rows.push_back({format_number(p.layer), format_number(p.expert), format_number(rank_a.at(p)),
                      format_number(rank_b.at(p))});
  }
  return t;
}

CsvTable classification_table(std::span<const ExpertClassRow> rows) {
  CsvTable t{{"layer", "expert", "benign_avg", "malicious_avg", "safety_gap", "abs_gap", "category"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({format_number(r.layer), format_number(r.expert), format_number(r.benign_avg),
                      format_number(r.malicious_avg), format_number(r.safety_gap), format_number(r.abs_gap),
                      std::string(to_string(r.category))});
  }
  return t;
}

std::vector<ExpertClassRow> parse_classification_table(const CsvTable& table) {
  require_header(table, {"layer", "expert", "benign_avg", "malicious_avg", "safety_gap", "abs_gap", "category"},
                 "classification");
  std::vector<ExpertClassRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const std::string where = "classification row " + std::to_string(i + 1);
    ExpertClassRow c;
    c.layer = parse_size(r[0], where + " layer");
    c.expert = parse_size(r[1], where + " expert");
    c.benign_avg = parse_double(r[2], where + " benign_avg");
    c.malicious_avg = parse_double(r[3], where + " malicious_avg");
    c.safety_gap = parse_double(r[4], where + " safety_gap");
    c.abs_gap = parse_double(r[5], where + " abs_gap");
    c.category = parse_category(r[6]);
    out.push_back(c);
  }
  return out;
}

CsvTable category_counts_table(const CategoryCounts& counts) {
  CsvTable t{{"category", "count"}, {}};
  for (auto c : kAllCategories) t.rows.push_back({std::string(to_string(c)), format_number(counts[c])});
  t.rows.push_back({"total", format_number(counts.total())});
  return t;
}

CsvTable suppression_set_table(std::span<const ExpertClassRow> rows, const SuppressionMask& mask) {
  std::vector<ExpertClassRow> chosen;
  for (const auto& r : rows) {
    if (mask.contains(r.layer, r.expert)) chosen.push_back(r);
  }
  std::stable_sort(chosen.begin(), chosen.end(),
                   [](const ExpertClassRow& a, const ExpertClassRow& b) { return a.abs_gap > b.abs_gap; });
  CsvTable t{{"rank", "layer", "expert", "abs_gap"}, {}};
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    t.rows.push_back({format_number(i + 1), format_number(chosen[i].layer), format_number(chosen[i].expert),
                      format_number(chosen[i].abs_gap)});
  }
  return t;
}

CsvTable intervention_table(std::span<const PairedOutcome> outcomes) {
  CsvTable t{{"prompt_id", "baseline_label", "suppressed_label", "transition"}, {}};
  for (const auto& o : outcomes) {
    if (o.labeled()) {
      t.rows.push_back({o.prompt_id, std::string(to_string(*o.baseline_label)),
                        std::string(to_string(*o.suppressed_label)),
                        transition_code(*o.baseline_label, *o.suppressed_label)});
    } else {
      t.rows.push_back({o.prompt_id, "error", "error", "error"});
    }
  }
  return t;
}

CsvTable transitions_table(const TransitionSummary& s) {
  s.check_identities();
  return CsvTable{{"quantity", "value"},
                  {{"n_prompts", format_number(s.n_prompts)},
                   {"baseline_restricted", format_number(s.baseline_restricted)},
                   {"suppressed_restricted", format_number(s.suppressed_restricted)},
                   {"r_to_n", format_number(s.r_to_n)},
                   {"n_to_r", format_number(s.n_to_r)},
                   {"both_r", format_number(s.both_r)},
                   {"both_n", format_number(s.both_n)},
                   {"relative_reduction", format_number(s.relative_reduction())}}};
}

}  // namespace moeprobe

// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/pipeline.hpp"

#include <algorithm>
#include <set>

#include "moeprobe/csv.hpp"
#include "moeprobe/errors.hpp"

namespace moeprobe {

std::string_view to_string(Signal signal) { return signal == Signal::kActivation ? "activation" : "gradient"; }

Signal parse_signal(std::string_view text) {
  if (text == "activation") return Signal::kActivation;
  if (text == "gradient") return Signal::kGradient;
  throw ValidationError("unknown signal '" + std::string(text) + "' (expected activation or gradient)");
}

MapKind analysis_kind(Signal signal) {
  return signal == Signal::kActivation ? MapKind::kLayerNormalized : MapKind::kGradient;
}

std::vector<PromptInput> parse_prompt_file(std::string_view text, const std::string& group) {
  if (group.empty()) throw ValidationError("prompt group name is empty");
  std::vector<PromptInput> out;
  for (const auto& line : split_lines(text)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.push_back({group + "-" + std::to_string(out.size() + 1), group, t});
  }
  if (out.empty()) throw ValidationError("prompt group '" + group + "' has no prompts");
  return out;
}

std::vector<PromptInput> load_prompt_file(const std::filesystem::path& path, const std::string& group) {
  try {
    return parse_prompt_file(read_text_file(path), group);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

RoutingLog capture_log(const MoeModel& model, std::span<const PromptInput> prompts, const CaptureOptions& options) {
  if (prompts.empty()) throw ValidationError("capture: no prompts");
  const auto& cfg = model.config();
  RoutingLog log;
  log.meta.num_layers = cfg.num_layers;
  log.meta.num_experts = cfg.num_experts;
  log.meta.top_k = cfg.top_k;
  log.meta.source = "moeprobe-toy";
  log.meta.capture = {
      {"include_generated_tokens", options.include_generated_tokens},
      {"max_new_tokens", options.max_new_tokens},
      {"gradient", options.capture_gradient},
      {"gradient_reduction", "mean-abs-router-column"},
      {"tokenizer", "byte"},
      {"model", {{"model_dim", cfg.model_dim},
                 {"hidden_dim", cfg.hidden_dim},
                 {"vocab_size", cfg.vocab_size},
                 {"seed", cfg.seed}}},
  };
  log.prompts = capture_batch(model, prompts, options);
  log.validate();
  return log;
}

RoutingLog merge_logs(std::span<const RoutingLog> logs) {
  if (logs.empty()) throw ValidationError("no routing logs to merge");
  RoutingLog out;
  out.meta = logs.front().meta;
  for (const auto& log : logs) {
    if (log.meta.num_layers != out.meta.num_layers || log.meta.num_experts != out.meta.num_experts ||
        log.meta.top_k != out.meta.top_k) {
      throw ValidationError("routing logs disagree on (num_layers, num_experts, top_k)");
    }
    out.prompts.insert(out.prompts.end(), log.prompts.begin(), log.prompts.end());
  }
  out.validate();
  return out;
}

std::size_t SignalAnalysis::group_index(std::string_view group) const {
  const auto it = std::find(groups.begin(), groups.end(), group);
  if (it == groups.end()) throw ValidationError("group '" + std::string(group) + "' is not in the log");
  return static_cast<std::size_t>(it - groups.begin());
}

SignalAnalysis analyze_signal(const RoutingLog& log, Signal signal) {
  if (log.prompts.empty()) throw ValidationError("routing log has no prompts");
  const MapKind kind = analysis_kind(signal);
  SignalAnalysis a;
  a.signal = signal;
  a.groups = log.groups();

  std::vector<std::vector<RoutingMap>> maps(a.groups.size());
  std::vector<std::vector<CoverageSummary>> coverage(a.groups.size());
  std::vector<std::vector<std::vector<LayerMetrics>>> layers(a.groups.size());
  for (const auto& rec : log.prompts) {
    const std::size_t g = a.group_index(rec.group);
    RoutingMap map = analysis_map(rec, kind);
    const auto summary = coverage_summary(rank_experts(map));
    a.prompt_coverage.push_back({rec.id, rec.group, summary});
    coverage[g].push_back(summary);
    layers[g].push_back(layer_summary(map));
    maps[g].push_back(std::move(map));
  }

  for (std::size_t g = 0; g < a.groups.size(); ++g) {
    const auto& name = a.groups[g];
    a.group_maps.push_back(mean_map(maps[g]));
    a.group_ranked.push_back(rank_experts(a.group_maps.back()));
    a.group_coverage.push_back({name, coverage_summary(a.group_ranked.back())});
    a.prompt_means.push_back({name, mean_coverage(coverage[g])});
    a.group_layers.push_back({name, layer_summary(a.group_maps.back())});

    GroupLayers mean{name, std::vector<LayerMetrics>(log.meta.num_layers)};
    for (std::size_t l = 0; l < log.meta.num_layers; ++l) {
      std::vector<LayerMetrics> per_prompt;
      for (const auto& p : layers[g]) per_prompt.push_back(p[l]);
      mean.layers[l] = block_average(per_prompt, 0, per_prompt.size());
    }
    a.prompt_layer_means.push_back(std::move(mean));
  }
  return a;
}

Classification classify_analysis(const SignalAnalysis& analysis, const GroupNames& names,
                                 const ClassifierThresholds& thresholds) {
  const auto& benign = analysis.group_maps[analysis.group_index(names.benign)];
  const auto& malicious = analysis.group_maps[analysis.group_index(names.malicious)];
  return classify_all(benign, malicious, thresholds);
}

namespace {

bool has_group(const RoutingLog& log, const std::string& group) {
  return std::any_of(log.prompts.begin(), log.prompts.end(), [&](const PromptRecord& p) { return p.group == group; });
}

std::string format_thresholds(const ClassifierThresholds& t) {
  return "gap_threshold=" + format_number(t.gap_threshold) + " min_avg_magnitude=" + format_number(t.min_avg_magnitude);
}

}  // namespace

ReportBundle build_report(const RoutingLog& log, const ReportOptions& options, const MoeModel* model,
                          std::span<const PromptInput> prompts) {
  log.validate();
  ReportBundle bundle;
  bundle.meta = log.meta;
  bundle.prompt_count = log.prompts.size();
  bundle.names = options.names;
  bundle.overlap_k = options.overlap_k;

  const bool classifiable = has_group(log, options.names.benign) && has_group(log, options.names.malicious);
  if (!classifiable) {
    bundle.notes.push_back("classification skipped: log needs groups '" + options.names.benign + "' and '" +
                           options.names.malicious + "'");
  }
  std::vector<PromptInput> targets;
  for (const auto& p : prompts) {
    if (p.group == options.names.malicious) targets.push_back(p);
  }

  for (const Signal signal : options.signals) {
    if (signal == Signal::kGradient &&
        std::any_of(log.prompts.begin(), log.prompts.end(), [](const PromptRecord& p) { return !p.gradient; })) {
      bundle.notes.push_back("gradient analysis skipped: log has prompts without gradient maps");
      continue;
    }
    SignalReport r;
    r.analysis = analyze_signal(log, signal);
    const auto& override_t = signal == Signal::kActivation ? options.activation_thresholds : options.gradient_thresholds;
    r.thresholds = override_t.value_or(default_thresholds(analysis_kind(signal)));
    if (classifiable) {
      r.classification = classify_analysis(r.analysis, options.names, r.thresholds);
      try {
        r.suppression = select_suppression_set(r.classification->rows, ExpertCategory::kBenignDominant, options.top_n);
      } catch (const ValidationError& e) {
        r.notes.push_back(std::string("intervention skipped: ") + e.what());
      }
    }
    if (r.suppression) {
      if (model && !targets.empty()) {
        try {
          const Labeler labeler = options.labels ? label_file_labeler(*options.labels) : keyword_labeler();
          r.outcomes = run_paired(*model, targets, *r.suppression, labeler, options.intervention);
          r.transitions = transition_summary(r.outcomes);
        } catch (const ValidationError& e) {
          r.notes.push_back(std::string("intervention skipped: ") + e.what());
        }
      } else if (options.labels) {
        r.outcomes = outcomes_from_labels(*options.labels);
        r.transitions = transition_summary(r.outcomes);
        r.notes.push_back("intervention accounting from label file only (no model run)");
      } else {
        r.notes.push_back("intervention skipped: no model prompts or label file");
      }
    }
    bundle.signals.push_back(std::move(r));
  }
  return bundle;
}

std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create report directory '" + dir.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  auto write = [&](const std::string& name, const std::string& contents) {
    const auto path = dir / name;
    write_text_file(path, contents);
    written.push_back(path);
  };
  auto write_csv = [&](const std::string& name, const CsvTable& table) { write(name, format_csv(table)); };

  std::string meta;
  auto line = [&](const std::string& key, const std::string& value) { meta += key + "=" + value + "\n"; };
  line("num_layers", format_number(bundle.meta.num_layers));
  line("num_experts", format_number(bundle.meta.num_experts));
  line("top_k", format_number(bundle.meta.top_k));
  line("source", bundle.meta.source);
  line("capture", bundle.meta.capture.dump());
  line("prompt_count", format_number(bundle.prompt_count));
  for (const auto& [k, v] : bundle.settings) line(k, v);
  line("activation_scores", "per-prompt counts normalized per layer, averaged over the group");
  line("gradient_scores", "mean |d loss / d router[:, e]| over model_dim, averaged over the group");
  line("suppression_order", "benign-dominant pairs by abs_gap descending, ties by (layer, expert)");
  line("number_format", "%.6g");

  for (const auto& r : bundle.signals) {
    const std::string prefix = std::string(to_string(r.analysis.signal)) + "_";
    const auto& a = r.analysis;
    write_csv(prefix + "expert_summary_group.csv", expert_summary_table(a.group_coverage));
    write_csv(prefix + "expert_summary_prompts.csv", prompt_summary_table(a.prompt_coverage));
    write_csv(prefix + "expert_summary_prompt_mean.csv", prompt_mean_table(a.prompt_means));
    write_csv(prefix + "layer_summary_group.csv", layer_summary_table(a.group_layers));
    write_csv(prefix + "layer_summary_prompt_mean.csv", layer_summary_table(a.prompt_layer_means));
    const auto blocks = default_layer_blocks(bundle.meta.num_layers);
    write_csv(prefix + "layer_blocks.csv", block_summary_table(a.group_layers, blocks));

    CsvTable curve;
    for (std::size_t g = 0; g < a.groups.size(); ++g) {
      auto t = rank_curve_table(a.groups[g], a.group_ranked[g]);
      if (curve.header.empty()) curve.header = t.header;
      curve.rows.insert(curve.rows.end(), t.rows.begin(), t.rows.end());
    }
    write_csv(prefix + "rank_curve.csv", curve);

    line(prefix + "thresholds", format_thresholds(r.thresholds));
    if (r.classification) {
      const auto& cls = *r.classification;
      const auto& benign = a.group_ranked[a.group_index(bundle.names.benign)];
      const auto& malicious = a.group_ranked[a.group_index(bundle.names.malicious)];
      const std::size_t k = std::min(bundle.overlap_k, benign.entries.size());
      write_csv(prefix + "top" + std::to_string(k) + "_overlap.csv", overlap_table(benign, malicious, k));
      write_csv(prefix + "classification.csv", classification_table(cls.rows));
      write_csv(prefix + "category_counts.csv", category_counts_table(cls.counts));
    }
    if (r.suppression) {
      write_csv(prefix + "suppression_set.csv", suppression_set_table(r.classification->rows, *r.suppression));
    }
    if (r.transitions) {
      write_csv(prefix + "intervention.csv", intervention_table(r.outcomes));
      write_csv(prefix + "transitions.csv", transitions_table(*r.transitions));
    }
    for (const auto& n : r.notes) line(prefix + "note", n);
  }
  for (const auto& n : bundle.notes) line("note", n);
  write("metadata.txt", meta);
  return written;
}

}  // namespace moeprobe

// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/cli.hpp"

#include <algorithm>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "moeprobe/csv.hpp"
#include "moeprobe/diagnostics.hpp"
#include "moeprobe/errors.hpp"
#include "moeprobe/pipeline.hpp"

namespace moeprobe {

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string signal = "activation";
  std::optional<double> gap_threshold;
  std::optional<double> min_avg_magnitude;
  std::size_t top_n = 5;
  std::optional<std::uint64_t> seed;
  bool include_generated_tokens = false;
  std::string labels_path;
  std::size_t max_new_tokens = 16;
  std::string suppression_scope = "whole-run";
  std::string benign_group = "benign";
  std::string malicious_group = "malicious";
};

ModelConfig model_config(const GlobalOptions& g) {
  ModelConfig cfg = g.config_path.empty() ? ModelConfig{} : load_model_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

SuppressionScope parse_scope(const std::string& text) {
  if (text == "whole-run") return SuppressionScope::kWholeRun;
  if (text == "decode-only") return SuppressionScope::kDecodeOnly;
  throw ValidationError("unknown suppression scope '" + text + "' (expected whole-run or decode-only)");
}

ClassifierThresholds thresholds_for(const GlobalOptions& g, Signal signal) {
  ClassifierThresholds t = default_thresholds(analysis_kind(signal));
  if (g.gap_threshold) t.gap_threshold = *g.gap_threshold;
  if (g.min_avg_magnitude) t.min_avg_magnitude = *g.min_avg_magnitude;
  t.validate();
  return t;
}

// "group=path" or a bare path whose stem names the group.
std::vector<PromptInput> load_prompt_specs(const std::vector<std::string>& specs) {
  std::vector<PromptInput> out;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    std::string group;
    std::filesystem::path path;
    if (eq == std::string::npos) {
      path = spec;
      group = path.stem().string();
    } else {
      group = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    auto prompts = load_prompt_file(path, group);
    out.insert(out.end(), prompts.begin(), prompts.end());
  }
  return out;
}

RoutingLog load_logs(const std::vector<std::string>& paths) {
  std::vector<RoutingLog> logs;
  for (const auto& p : paths) logs.push_back(load_routing_log(p).log);
  return logs.size() == 1 ? std::move(logs.front()) : merge_logs(logs);
}

class Output {
 public:
  Output(std::string dir, std::ostream& out) : dir_(std::move(dir)), out_(out) {
    if (!dir_.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(dir_, ec);
      if (ec) throw std::runtime_error("cannot create output directory '" + dir_ + "': " + ec.message());
    }
  }

  void table(const std::string& name, const CsvTable& t) {
    if (dir_.empty()) {
      out_ << "# " << name << "\n" << format_csv(t) << "\n";
    } else {
      write_text_file(std::filesystem::path(dir_) / name, format_csv(t));
    }
  }

 private:
  std::string dir_;
  std::ostream& out_;
};

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Routing analysis for sparse mixture-of-experts models", args.empty() ? "moeprobe" : args[0]};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Model config file (key=value lines)")->check(CLI::ExistingFile);
  app.add_option("--signal", g.signal, "Score signal")->check(CLI::IsMember({"activation", "gradient"}));
  app.add_option("--gap-threshold", g.gap_threshold, "Classifier gap threshold");
  app.add_option("--min-avg-magnitude", g.min_avg_magnitude, "Classifier minimum group average");
  app.add_option("--top-n", g.top_n, "Number of pairs to suppress")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Model initialization seed");
  app.add_flag("--include-generated-tokens", g.include_generated_tokens, "Count routing over generated tokens too");
  app.add_option("--labels", g.labels_path, "Label file: prompt_id,arm,label")->check(CLI::ExistingFile);
  app.add_option("--max-new-tokens", g.max_new_tokens, "Greedy generation length");
  app.add_option("--suppression-scope", g.suppression_scope, "whole-run or decode-only")
      ->check(CLI::IsMember({"whole-run", "decode-only"}));
  app.add_option("--benign-group", g.benign_group, "Benign group name");
  app.add_option("--malicious-group", g.malicious_group, "Malicious group name");

  std::vector<std::string> prompt_specs;
  std::vector<std::string> log_paths;
  std::string out_path;
  std::string level = "both";
  std::string classification_path;
  bool no_gradient = false;

  auto* capture = app.add_subcommand("capture", "Run the toy model over prompt groups and write a routing log");
  capture->add_option("--prompts", prompt_specs, "GROUP=PATH prompt file, one prompt per line")->required();
  capture->add_option("--out", out_path, "Routing log path")->required();
  capture->add_flag("--no-gradient", no_gradient, "Skip router-gate gradient capture");

  auto* experts = app.add_subcommand("analyze-experts", "Coverage statistics over ranked layer-expert pairs");
  auto* layers = app.add_subcommand("analyze-layers", "Per-layer concentration metrics");
  for (auto* sub : {experts, layers}) {
    sub->add_option("--log", log_paths, "Routing log(s)")->required()->check(CLI::ExistingFile);
    sub->add_option("--level", level, "group, prompt or both")->check(CLI::IsMember({"group", "prompt", "both"}));
    sub->add_option("--out", out_path, "Output directory (stdout when omitted)");
  }

  auto* classify = app.add_subcommand("classify", "Six-way classification of layer-expert pairs");
  classify->add_option("--log", log_paths, "Routing log(s) holding both groups")->required()->check(CLI::ExistingFile);
  classify->add_option("--out", out_path, "Output directory (stdout when omitted)");

  auto* intervene = app.add_subcommand("intervene", "Paired baseline/suppressed generation and transitions");
  intervene->add_option("--classification", classification_path, "classification.csv from classify")
      ->check(CLI::ExistingFile);
  intervene->add_option("--log", log_paths, "Routing log(s) to classify instead")->check(CLI::ExistingFile);
  intervene->add_option("--prompts", prompt_specs, "GROUP=PATH prompts to generate from");
  intervene->add_option("--out", out_path, "Output directory (stdout when omitted)");

  auto* report = app.add_subcommand("report", "Capture (or load), analyze, classify, intervene and write a report");
  report->add_option("--prompts", prompt_specs, "GROUP=PATH prompt files");
  report->add_option("--log", log_paths, "Existing routing log(s) instead of capture")->check(CLI::ExistingFile);
  report->add_option("--out", out_path, "Report directory")->required();
  report->add_flag("--no-gradient", no_gradient, "Skip router-gate gradient capture");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("moeprobe");

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const Signal signal = parse_signal(g.signal);
    CaptureOptions capture_options;
    capture_options.include_generated_tokens = g.include_generated_tokens;
    capture_options.max_new_tokens = g.max_new_tokens;
    capture_options.capture_gradient = !no_gradient;
    capture_options.scope = parse_scope(g.suppression_scope);
    InterventionOptions intervention_options{g.max_new_tokens, parse_scope(g.suppression_scope)};
    const GroupNames names{g.benign_group, g.malicious_group};

    if (*capture) {
      const MoeModel model(model_config(g));
      const auto prompts = load_prompt_specs(prompt_specs);
      save_routing_log(capture_log(model, prompts, capture_options), out_path);
      err << "wrote " << prompts.size() << " prompt records to " << out_path << "\n";
      return kExitOk;
    }

    if (*experts || *layers) {
      const auto log = load_logs(log_paths);
      const auto a = analyze_signal(log, signal);
      Output o(out_path, out);
      const std::string prefix = std::string(to_string(signal)) + "_";
      const bool group_level = level != "prompt";
      const bool prompt_level = level != "group";
      if (*experts) {
        if (group_level) o.table(prefix + "expert_summary_group.csv", expert_summary_table(a.group_coverage));
        if (prompt_level) {
          o.table(prefix + "expert_summary_prompts.csv", prompt_summary_table(a.prompt_coverage));
          o.table(prefix + "expert_summary_prompt_mean.csv", prompt_mean_table(a.prompt_means));
        }
      } else {
        const auto blocks = default_layer_blocks(log.meta.num_layers);
        if (group_level) {
          o.table(prefix + "layer_summary_group.csv", layer_summary_table(a.group_layers));
          o.table(prefix + "layer_blocks.csv", block_summary_table(a.group_layers, blocks));
        }
        if (prompt_level) {
          o.table(prefix + "layer_summary_prompt_mean.csv", layer_summary_table(a.prompt_layer_means));
        }
      }
      return kExitOk;
    }

    if (*classify) {
      const auto log = load_logs(log_paths);
      const auto a = analyze_signal(log, signal);
      const auto cls = classify_analysis(a, names, thresholds_for(g, signal));
      Output o(out_path, out);
      const std::string prefix = std::string(to_string(signal)) + "_";
      o.table(prefix + "classification.csv", classification_table(cls.rows));
      o.table(prefix + "category_counts.csv", category_counts_table(cls.counts));
      return kExitOk;
    }

    if (*intervene) {
      std::optional<LabelTable> labels;
      if (!g.labels_path.empty()) labels = load_label_file(g.labels_path);
      std::vector<PairedOutcome> outcomes;
      std::optional<SuppressionMask> mask;
      std::vector<ExpertClassRow> rows;
      if (!classification_path.empty()) {
        rows = parse_classification_table(parse_csv(read_text_file(classification_path)));
      } else if (!log_paths.empty()) {
        rows = classify_analysis(analyze_signal(load_logs(log_paths), signal), names, thresholds_for(g, signal)).rows;
      }
      if (!rows.empty()) mask = select_suppression_set(rows, ExpertCategory::kBenignDominant, g.top_n);

      if (!prompt_specs.empty()) {
        if (!mask) throw ValidationError("intervene: --prompts needs --classification or --log to pick experts");
        const MoeModel model(model_config(g));
        const auto prompts = load_prompt_specs(prompt_specs);
        const Labeler labeler = labels ? label_file_labeler(*labels) : keyword_labeler();
        outcomes = run_paired(model, prompts, *mask, labeler, intervention_options);
      } else if (labels) {
        outcomes = outcomes_from_labels(*labels);
      } else {
        throw ValidationError("intervene: give --prompts (model run) or --labels (accounting only)");
      }
      const auto summary = transition_summary(outcomes);
      Output o(out_path, out);
      const std::string prefix = std::string(to_string(signal)) + "_";
      if (mask) o.table(prefix + "suppression_set.csv", suppression_set_table(rows, *mask));
      o.table(prefix + "intervention.csv", intervention_table(outcomes));
      o.table(prefix + "transitions.csv", transitions_table(summary));
      return kExitOk;
    }

    if (*report) {
      if (prompt_specs.empty() && log_paths.empty()) throw ValidationError("report: give --prompts or --log");
      ReportOptions options;
      options.names = names;
      options.top_n = g.top_n;
      options.intervention = intervention_options;
      if (g.gap_threshold || g.min_avg_magnitude) {
        options.activation_thresholds = thresholds_for(g, Signal::kActivation);
        options.gradient_thresholds = thresholds_for(g, Signal::kGradient);
      }
      if (!g.labels_path.empty()) options.labels = load_label_file(g.labels_path);

      std::optional<MoeModel> model;
      std::vector<PromptInput> prompts;
      RoutingLog log;
      if (!prompt_specs.empty()) {
        model.emplace(model_config(g));
        prompts = load_prompt_specs(prompt_specs);
      }
      if (!log_paths.empty()) {
        log = load_logs(log_paths);
      } else {
        log = capture_log(*model, prompts, capture_options);
      }
      auto bundle = build_report(log, options, model ? &*model : nullptr, prompts);
      if (model) {
        std::string flat;
        for (const auto& line : split_lines(format_model_config(model->config()))) {
          std::string t = trim(line);
          t.erase(std::remove(t.begin(), t.end(), ' '), t.end());
          if (t.empty() || t.front() == '#') continue;
          flat += (flat.empty() ? "" : ";") + t;
        }
        bundle.settings.push_back({"model_config", flat});
      }
      bundle.settings.push_back({"include_generated_tokens", g.include_generated_tokens ? "true" : "false"});
      bundle.settings.push_back({"max_new_tokens", std::to_string(g.max_new_tokens)});
      bundle.settings.push_back({"suppression_scope", g.suppression_scope});
      bundle.settings.push_back({"top_n", std::to_string(g.top_n)});
      bundle.settings.push_back({"labeler", g.labels_path.empty() ? "keyword" : "label-file"});
      std::filesystem::create_directories(out_path);
      save_routing_log(log, std::filesystem::path(out_path) / "routing_log.json");
      const auto files = emit_report(bundle, out_path);
      err << "wrote " << files.size() + 1 << " files to " << out_path << "\n";
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace moeprobe

// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/intervention.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "moeprobe/csv.hpp"
#include "moeprobe/diagnostics.hpp"
#include "moeprobe/errors.hpp"
#include "moeprobe/parallel.hpp"

namespace moeprobe {

std::string_view to_string(Label label) {
  return label == Label::kRestricted ? "restricted" : "non-restricted";
}

std::string_view to_string(Arm arm) { return arm == Arm::kBaseline ? "baseline" : "suppressed"; }

Label parse_label(std::string_view text) {
  if (text == "restricted") return Label::kRestricted;
  if (text == "non-restricted") return Label::kNonRestricted;
  throw ValidationError("unknown label '" + std::string(text) + "' (expected restricted or non-restricted)");
}

Arm parse_arm(std::string_view text) {
  if (text == "baseline") return Arm::kBaseline;
  if (text == "suppressed") return Arm::kSuppressed;
  throw ValidationError("unknown arm '" + std::string(text) + "' (expected baseline or suppressed)");
}

std::string transition_code(Label baseline, Label suppressed) {
  std::string out = baseline == Label::kRestricted ? "R->" : "N->";
  out += suppressed == Label::kRestricted ? 'R' : 'N';
  return out;
}

std::vector<PairedOutcome> run_paired(const MoeModel& model, std::span<const PromptInput> prompts,
                                      const SuppressionMask& mask, const Labeler& labeler,
                                      const InterventionOptions& options) {
  if (prompts.empty()) throw ValidationError("run_paired: no prompts");
  mask.validate(model.config());
  std::vector<PairedOutcome> out(prompts.size());
  parallel_for(prompts.size(), [&](std::size_t i) {
    const auto& prompt = prompts[i];
    const auto tokens = encode_text(prompt.text, model.config().vocab_size);
    if (tokens.empty()) throw ValidationError("run_paired: prompt '" + prompt.id + "' is empty");
    const auto base = model.generate_greedy(tokens, options.max_new_tokens, {}, options.scope);
    const auto supp = model.generate_greedy(tokens, options.max_new_tokens, mask, options.scope);
    PairedOutcome& o = out[i];
    o.prompt_id = prompt.id;
    o.baseline_text = decode_tokens(std::span(base).subspan(tokens.size()));
    o.suppressed_text = decode_tokens(std::span(supp).subspan(tokens.size()));
    try {
      o.baseline_label = labeler(o.prompt_id, Arm::kBaseline, o.baseline_text);
      o.suppressed_label = labeler(o.prompt_id, Arm::kSuppressed, o.suppressed_text);
    } catch (const std::exception& e) {
      o.baseline_label.reset();
      o.suppressed_label.reset();
      o.error = e.what();
    }
  });
  for (const auto& o : out) {
    if (!o.error.empty()) warn("labeler failed for prompt '" + o.prompt_id + "': " + o.error);
  }
  return out;
}

double TransitionSummary::relative_reduction() const {
  if (baseline_restricted == 0) return 0.0;
  return (static_cast<double>(baseline_restricted) - static_cast<double>(suppressed_restricted)) /
         static_cast<double>(baseline_restricted);
}

void TransitionSummary::check_identities() const {
  if (r_to_n + n_to_r + both_r + both_n != n_prompts || baseline_restricted != r_to_n + both_r ||
      suppressed_restricted != n_to_r + both_r) {
    throw std::logic_error("transition summary identities violated");
  }
}

TransitionSummary transition_summary(std::span<const PairedOutcome> outcomes) {
  TransitionSummary s;
  std::size_t skipped = 0;
  for (const auto& o : outcomes) {
    if (!o.labeled()) {
      ++skipped;
      continue;
    }
    const bool b = *o.baseline_label == Label::kRestricted;
    const bool p = *o.suppressed_label == Label::kRestricted;
    ++s.n_prompts;
    if (b) ++s.baseline_restricted;
    if (p) ++s.suppressed_restricted;
    if (b && !p) ++s.r_to_n;
    if (!b && p) ++s.n_to_r;
    if (b && p) ++s.both_r;
    if (!b && !p) ++s.both_n;
  }
  if (skipped) warn("transition summary skipped " + std::to_string(skipped) + " unlabeled outcome(s)");
  s.check_identities();
  return s;
}

Label keyword_label(std::string_view text, std::span<const std::string> markers) {
  if (markers.empty()) throw std::invalid_argument("keyword_label: empty marker list");
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  const std::string hay = lower(text);
  for (const auto& m : markers) {
    if (hay.find(lower(m)) != std::string::npos) return Label::kRestricted;
  }
  return Label::kNonRestricted;
}

Labeler keyword_labeler(std::vector<std::string> markers) {
  if (markers.empty()) throw std::invalid_argument("keyword_labeler: empty marker list");
  return [markers = std::move(markers)](const std::string&, Arm, const std::string& text) {
    return keyword_label(text, markers);
  };
}

LabelTable parse_label_file(std::string_view text) {
  LabelTable table;
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_fields(line, ',');
    auto where = [&] { return "label file line " + std::to_string(line_no); };
    if (fields.size() != 3) throw ValidationError(where() + ": expected prompt_id,arm,label");
    const std::string id = trim(fields[0]);
    if (id.empty()) throw ValidationError(where() + ": empty prompt id");
    if (id == "prompt_id" && line_no == 1) continue;  // header
    try {
      const auto key = std::make_pair(id, parse_arm(trim(fields[1])));
      const Label label = parse_label(trim(fields[2]));
      if (!table.emplace(key, label).second) {
        throw ValidationError("duplicate entry for '" + id + "' " + std::string(to_string(key.second)));
      }
    } catch (const ValidationError& e) {
      throw ValidationError(where() + ": " + e.what());
    }
  }
  return table;
}

LabelTable load_label_file(const std::string& path) {
  return parse_label_file(read_text_file(path));
}

Labeler label_file_labeler(LabelTable table) {
  return [table = std::move(table)](const std::string& id, Arm arm, const std::string&) {
    const auto it = table.find({id, arm});
    if (it == table.end()) {
      throw ValidationError("label file has no " + std::string(to_string(arm)) + " entry for '" + id + "'");
    }
    return it->second;
  };
}

std::vector<PairedOutcome> outcomes_from_labels(const LabelTable& table) {
  std::set<std::string> ids;
  for (const auto& [key, label] : table) ids.insert(key.first);
  std::vector<PairedOutcome> out;
  for (const auto& id : ids) {
    const auto b = table.find({id, Arm::kBaseline});
    const auto s = table.find({id, Arm::kSuppressed});
    if (b == table.end() || s == table.end()) {
      throw ValidationError("label file: prompt '" + id + "' lacks a " +
                            std::string(b == table.end() ? "baseline" : "suppressed") + " entry");
    }
    PairedOutcome o;
    o.prompt_id = id;
    o.baseline_label = b->second;
    o.suppressed_label = s->second;
    out.push_back(std::move(o));
  }
  if (out.empty()) throw ValidationError("label file has no entries");
  return out;
}

}  // namespace moeprobe

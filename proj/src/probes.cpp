// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/probes.hpp"

#include <cmath>

#include "moeprobe/errors.hpp"
#include "moeprobe/parallel.hpp"

namespace moeprobe {

RoutingMap counts_from_trace(const RoutingTrace& trace, std::size_t num_layers, std::size_t num_experts) {
  if (trace.size() != num_layers) throw ShapeError("routing trace has wrong layer count");
  RoutingMap counts(num_layers, num_experts, MapKind::kRawCount);
  for (std::size_t l = 0; l < num_layers; ++l) {
    for (const auto& decision : trace[l]) {
      for (auto e : decision.experts) counts.add(l, e, 1.0);
    }
  }
  return counts;
}

ActivationCapture capture_activations(const MoeModel& model, std::span<const TokenId> prompt,
                                      const SuppressionMask& mask, const CaptureOptions& options) {
  if (prompt.empty()) throw std::invalid_argument("capture_activations: empty prompt");
  const auto& cfg = model.config();
  std::vector<TokenId> processed(prompt.begin(), prompt.end());
  std::size_t suppress_from = 0;
  if (options.scope == SuppressionScope::kDecodeOnly) suppress_from = prompt.size();
  if (options.include_generated_tokens && options.max_new_tokens > 0) {
    processed = model.generate_greedy(prompt, options.max_new_tokens, mask, options.scope);
    // The last generated token is emitted but never fed back through the model.
    processed.pop_back();
  }
  const auto trace = model.route(processed, mask, suppress_from);
  return ActivationCapture{counts_from_trace(trace, cfg.num_layers, cfg.num_experts), processed.size()};
}

RoutingMap capture_gate_gradients(const MoeModel& model, std::span<const TokenId> prompt) {
  if (prompt.size() < 2) throw std::invalid_argument("capture_gate_gradients: prompt needs at least 2 tokens");
  const auto& cfg = model.config();
  Tape tape;
  const auto fwd = model.forward(tape, prompt, {});
  std::vector<ParamId> routers;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) routers.push_back(router_param_id(l));
  const auto grads = tape.backward(fwd.loss, routers);

  RoutingMap out(cfg.num_layers, cfg.num_experts, MapKind::kGradient);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const Tensor& g = grads.at(routers[l]);  // model_dim x num_experts
    for (std::size_t e = 0; e < cfg.num_experts; ++e) {
      double acc = 0.0;
      for (std::size_t d = 0; d < cfg.model_dim; ++d) acc += std::abs(g.at(d, e));
      const double score = acc / static_cast<double>(cfg.model_dim);
      if (!std::isfinite(score)) {
        throw NumericError("non-finite gate gradient at layer " + std::to_string(l) + ", expert " + std::to_string(e));
      }
      out.set(l, e, score);
    }
  }
  return out;
}

RoutingMap normalize_map(const RoutingMap& raw) {
  if (raw.kind() == MapKind::kGradient) {
    throw std::invalid_argument("normalize_map: gradient maps are not layer-normalized");
  }
  std::vector<double> values(raw.values().begin(), raw.values().end());
  const std::size_t experts = raw.num_experts();
  for (std::size_t l = 0; l < raw.num_layers(); ++l) {
    const double s = raw.row_sum(l);
    if (!(s > 0.0)) throw ValidationError("normalize_map: layer " + std::to_string(l) + " has zero total");
    for (std::size_t e = 0; e < experts; ++e) values[l * experts + e] /= s;
  }
  return RoutingMap(raw.num_layers(), experts, std::move(values), MapKind::kLayerNormalized);
}

PromptRecord capture_prompt(const MoeModel& model, const PromptInput& prompt, const CaptureOptions& options) {
  const auto tokens = encode_text(prompt.text, model.config().vocab_size);
  PromptRecord rec;
  rec.id = prompt.id;
  rec.group = prompt.group;
  auto act = capture_activations(model, tokens, {}, options);
  rec.activation = std::move(act.counts);
  rec.token_count = act.token_count;
  if (options.capture_gradient) {
    if (tokens.size() < 2) {
      throw ValidationError("prompt '" + prompt.id + "' has " + std::to_string(tokens.size()) +
                            " token(s); gate gradients need at least 2 (capture without gradients instead)");
    }
    rec.gradient = capture_gate_gradients(model, tokens);
  }
  return rec;
}

std::vector<PromptRecord> capture_batch(const MoeModel& model, std::span<const PromptInput> prompts,
                                        const CaptureOptions& options) {
  std::vector<PromptRecord> out(prompts.size());
  parallel_for(prompts.size(), [&](std::size_t i) { out[i] = capture_prompt(model, prompts[i], options); });
  return out;
}

}  // namespace moeprobe

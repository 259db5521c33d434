// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Decoder-only toy language model whose feed-forward blocks are top-K routed
// mixtures of SwiGLU experts:
//
//   y = sum_{i in TopK} softmax(TopK(x W_g))_i * SwiGLU_i(x)
//
// Each block is pre-norm single-head causal attention followed by the MoE
// block, both residual. The output head is tied to the token embedding.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moeprobe/autodiff.hpp"
#include "moeprobe/tensor.hpp"

namespace moeprobe {

using TokenId = std::size_t;

struct ModelConfig {
  std::size_t num_layers = 8;
  std::size_t num_experts = 8;
  std::size_t top_k = 2;
  std::size_t model_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t vocab_size = 256;
  std::uint64_t seed = 42;
  // Standard deviation of the weight initializer. Not a config-file key.
  double init_scale = 0.02;

  // Throws ValidationError on 0 dims or K outside [1, E].
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// key = value lines; keys exactly num_layers, num_experts, top_k, model_dim,
// hidden_dim, vocab_size, seed. Omitted keys keep their defaults.
ModelConfig parse_model_config(std::string_view text);
ModelConfig load_model_config(const std::filesystem::path& path);
std::string format_model_config(const ModelConfig& config);

struct LayerExpert {
  std::size_t layer = 0;
  std::size_t expert = 0;
  auto operator<=>(const LayerExpert&) const = default;
};

class SuppressionMask {
 public:
  SuppressionMask() = default;
  explicit SuppressionMask(std::initializer_list<LayerExpert> pairs);

  // Throws std::invalid_argument on a duplicate pair.
  void add(LayerExpert pair);

  [[nodiscard]] bool contains(std::size_t layer, std::size_t expert) const {
    return pairs_.count({layer, expert}) != 0;
  }
  [[nodiscard]] bool empty() const { return pairs_.empty(); }
  [[nodiscard]] std::size_t size() const { return pairs_.size(); }
  [[nodiscard]] const std::set<LayerExpert>& pairs() const { return pairs_; }
  [[nodiscard]] std::vector<std::size_t> experts_in_layer(std::size_t layer) const;

  // Indices in range and at least K unmasked experts left in every layer.
  void validate(const ModelConfig& config) const;

 private:
  std::set<LayerExpert> pairs_;
};

// Which positions the suppression mask applies to.
enum class SuppressionScope { kWholeRun, kDecodeOnly };

struct ExpertParams {
  Tensor gate_proj;  // model_dim x hidden_dim
  Tensor up_proj;    // model_dim x hidden_dim
  Tensor down_proj;  // hidden_dim x model_dim
};

struct MoeLayerParams {
  Tensor router;  // model_dim x num_experts; column e belongs to expert e
  std::vector<ExpertParams> experts;
};

struct AttentionParams {
  Tensor wq, wk, wv, wo;  // model_dim x model_dim
};

struct BlockParams {
  AttentionParams attention;
  MoeLayerParams moe;
};

struct ModelWeights {
  Tensor embedding;  // vocab_size x model_dim, also the output head
  std::vector<BlockParams> blocks;

  // Seeded N(0, init_scale^2) initialization.
  static ModelWeights initialize(const ModelConfig& config);
  void validate(const ModelConfig& config) const;
};

std::string router_param_id(std::size_t layer);

struct RouteDecision {
  std::vector<std::size_t> experts;  // descending logit, ties to lower index
  std::vector<double> weights;       // softmax over exactly the selected logits
};

/// Top-K routing for one token. Masked experts take logit -inf before selection.
/// Throws std::invalid_argument if fewer than K experts remain.
RouteDecision route_top_k(std::span<const double> gate_logits, std::size_t top_k,
                          const std::set<std::size_t>& masked = {});

struct MoeLayerVars {
  Var router;
  std::vector<Var> gate_proj, up_proj, down_proj;
};

/// Registers a layer's parameters on a tape under "<prefix>.router",
/// "<prefix>.expert<e>.{gate,up,down}".
MoeLayerVars register_moe_layer(Tape& tape, const MoeLayerParams& params, const std::string& prefix);

/// MoE block over T token rows (T x model_dim). Only the selected experts are
/// evaluated, on the rows routed to them. `blocked` is T x E (or empty).
/// Per-token decisions are appended to `decisions` when non-null.
Var moe_layer_forward(const Var& x, const MoeLayerVars& params, std::size_t top_k,
                      std::span<const std::uint8_t> blocked, std::vector<RouteDecision>* decisions);

/// Convenience form over plain tensors (x is T x model_dim or a model_dim vector).
Tensor moe_layer_forward(const Tensor& x, const MoeLayerParams& params, std::size_t top_k,
                         const std::set<std::size_t>& masked = {});

// routing[layer][token]
using RoutingTrace = std::vector<std::vector<RouteDecision>>;

struct LmOutput {
  Tensor logits;  // T x vocab_size
  double loss = 0.0;
  RoutingTrace routing;
};

class MoeModel {
 public:
  explicit MoeModel(ModelConfig config);
  MoeModel(ModelConfig config, ModelWeights weights);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const ModelWeights& weights() const { return weights_; }

  struct TapeForward {
    Var logits;
    Var loss;  // invalid when fewer than 2 tokens or loss not requested
    RoutingTrace routing;
  };

  /// Records the full forward pass on `tape`. Every weight is registered as a
  /// parameter. The suppression mask applies to positions >= suppress_from.
  TapeForward forward(Tape& tape, std::span<const TokenId> tokens, const SuppressionMask& mask,
                      std::size_t suppress_from = 0, bool with_loss = true) const;

  /// Per-position logits and mean next-token cross-entropy over positions
  /// 1..T-1. Requires T >= 2.
  [[nodiscard]] LmOutput forward_lm(std::span<const TokenId> tokens, const SuppressionMask& mask = {}) const;

  /// Appends argmax tokens one at a time (ties to the lower id). Returns prompt
  /// followed by the new tokens.
  [[nodiscard]] std::vector<TokenId> generate_greedy(std::span<const TokenId> prompt, std::size_t max_new,
                                                     const SuppressionMask& mask = {},
                                                     SuppressionScope scope = SuppressionScope::kWholeRun) const;

  /// Routing decisions for every position of `tokens` without computing a loss.
  [[nodiscard]] RoutingTrace route(std::span<const TokenId> tokens, const SuppressionMask& mask = {},
                                   std::size_t suppress_from = 0) const;

 private:
  void check_tokens(std::span<const TokenId> tokens) const;

  ModelConfig config_;
  ModelWeights weights_;
};

/// Byte-level tokenizer: byte b maps to b mod vocab_size.
std::vector<TokenId> encode_text(std::string_view text, std::size_t vocab_size);
std::string decode_tokens(std::span<const TokenId> tokens);

}  // namespace moeprobe

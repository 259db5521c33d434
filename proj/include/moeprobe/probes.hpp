// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Activation-count and router-gate-gradient capture from the toy model.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "moeprobe/model.hpp"
#include "moeprobe/routing_map.hpp"

namespace moeprobe {

struct CaptureOptions {
  // Count routing decisions for generated tokens as well as the prompt.
  bool include_generated_tokens = false;
  std::size_t max_new_tokens = 16;
  bool capture_gradient = true;
  SuppressionScope scope = SuppressionScope::kWholeRun;
};

/// A[l][e] = number of positions in `trace` for which expert e was among the
/// selected experts at layer l.
RoutingMap counts_from_trace(const RoutingTrace& trace, std::size_t num_layers, std::size_t num_experts);

struct ActivationCapture {
  RoutingMap counts;  // raw-count
  std::size_t token_count = 0;
};

/// Raw selection counts over the prompt tokens, or over every position processed
/// during greedy generation when options.include_generated_tokens is set.
ActivationCapture capture_activations(const MoeModel& model, std::span<const TokenId> prompt,
                                      const SuppressionMask& mask = {}, const CaptureOptions& options = {});

/// G[l][e] = mean over model_dim of |d loss / d W_g[:, e]| at layer l, where the
/// loss is the prompt's teacher-forced sequence loss. Gradients are requested
/// for the router weights only. Requires at least 2 tokens.
RoutingMap capture_gate_gradients(const MoeModel& model, std::span<const TokenId> prompt);

/// Row-normalizes a raw-count (or already normalized) map so each layer sums
/// to 1. An all-zero row is a ValidationError naming the layer.
RoutingMap normalize_map(const RoutingMap& raw);

struct PromptInput {
  std::string id;
  std::string group;
  std::string text;
};

PromptRecord capture_prompt(const MoeModel& model, const PromptInput& prompt, const CaptureOptions& options = {});

/// Captures every prompt, in parallel across prompts. Output order matches input order.
std::vector<PromptRecord> capture_batch(const MoeModel& model, std::span<const PromptInput> prompts,
                                        const CaptureOptions& options = {});

}  // namespace moeprobe

// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over the small set of dense
// operations the MoE model is built from. Every operation evaluates eagerly
// and appends one node to the tape; backward() replays the tape in reverse.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "moeprobe/tensor.hpp"

namespace moeprobe {

using ParamId = std::string;
using GradientMap = std::map<ParamId, Tensor>;

class Tape;

/// Handle to one node of a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] std::size_t index() const { return index_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  enum class Mode { kRecord, kInference };

  /// View handed to a node's local-gradient rule during backward().
  class BackwardContext {
   public:
    [[nodiscard]] std::span<const double> grad_output() const { return grad_output_; }
    [[nodiscard]] const Tensor& output() const;
    [[nodiscard]] const Tensor& input(std::size_t i) const;
    // Empty span when input i does not lead to any requested parameter.
    [[nodiscard]] std::span<double> grad_input(std::size_t i) { return grad_inputs_[i]; }
    [[nodiscard]] bool needs_grad(std::size_t i) const { return !grad_inputs_[i].empty(); }

   private:
    friend class Tape;
    const Tape* tape_ = nullptr;
    std::size_t node_ = 0;
    std::span<const double> grad_output_;
    std::vector<std::span<double>> grad_inputs_;
  };

  using BackwardRule = std::function<void(BackwardContext&)>;

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A named leaf whose gradient can be requested. Ids must be unique per tape.
  Var parameter(const ParamId& id, Tensor value);
  Var constant(Tensor value);

  // Appends an operation node. In inference mode the rule and operand list are dropped.
  Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardRule rule);

  [[nodiscard]] const Tensor& value(const Var& v) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] bool recording() const { return mode_ == Mode::kRecord; }
  [[nodiscard]] const char* op_name(std::size_t index) const { return nodes_.at(index).op; }
  [[nodiscard]] const std::vector<std::size_t>& operands(std::size_t index) const {
    return nodes_.at(index).inputs;
  }

  /// Exact reverse-mode gradients of a scalar loss with respect to the wanted
  /// parameters. Only nodes on a path from a wanted parameter to the loss
  /// receive gradient buffers.
  [[nodiscard]] GradientMap backward(const Var& loss, std::span<const ParamId> wanted) const;

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardRule rule;
  };

  Mode mode_;
  std::deque<Node> nodes_;  // stable references across appends
  std::unordered_map<ParamId, std::size_t> params_;
};

// Operations. Each validates its operands, refuses NaN inputs, and records a
// local-gradient rule.
namespace ad {

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var multiply(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var sum(const Var& a);
Var silu(const Var& a);
// Last-axis softmax. Negative infinity maps to exactly zero probability.
Var softmax(const Var& a);
// Last-axis x / sqrt(mean(x^2) + eps), no learned gain.
Var rms_normalize(const Var& a, double eps = 1e-6);
Var embedding(const Var& table, std::span<const std::size_t> ids);
// Mean over rows of -log softmax(logits)[target].
Var cross_entropy(const Var& logits, std::span<const std::size_t> targets);

// Keeps the k largest entries of every last-axis row and sets the rest to
// -inf. Entries flagged in `blocked` (same size as a, or empty) can never be
// kept. Ties go to the lower column index. Gradient flows only to kept entries.
Var top_k_mask(const Var& a, std::size_t k, std::span<const std::uint8_t> blocked = {});
// Square matrix; entries above the diagonal become -inf.
Var causal_mask(const Var& a);

Var gather_rows(const Var& a, std::span<const std::size_t> rows);
// Inverse of gather_rows: places row i of `a` at rows[i] of a zero matrix.
Var scatter_rows(const Var& a, std::span<const std::size_t> rows, std::size_t total_rows);
Var column(const Var& a, std::size_t col);
// Multiplies row i of `a` (m x n) by s[i] where s is m x 1.
Var scale_rows(const Var& a, const Var& s);

}  // namespace ad

// Stable top-k over one row: indices of the k largest values, descending,
// ties to the lower index. Blocked positions are skipped.
std::vector<std::size_t> select_top_k(std::span<const double> row, std::size_t k,
                                      std::span<const std::uint8_t> blocked = {});

}  // namespace moeprobe

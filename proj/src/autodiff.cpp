// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "moeprobe/errors.hpp"

namespace moeprobe {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_no_nan(const char* op, const Tensor& t) {
  if (t.has_nan()) throw NumericError(std::string(op) + ": NaN in input");
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands recorded on different tapes");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(*this); }

const Tensor& Tape::BackwardContext::output() const { return tape_->nodes_[node_].value; }

const Tensor& Tape::BackwardContext::input(std::size_t i) const {
  return tape_->nodes_[tape_->nodes_[node_].inputs.at(i)].value;
}

Var Tape::parameter(const ParamId& id, Tensor value) {
  if (id.empty()) throw std::invalid_argument("parameter id must be nonempty");
  if (params_.count(id)) throw std::invalid_argument("parameter '" + id + "' registered twice");
  require_no_nan("parameter", value);
  params_.emplace(id, nodes_.size());
  nodes_.push_back(Node{"parameter", std::move(value), {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  require_no_nan("constant", value);
  nodes_.push_back(Node{"constant", std::move(value), {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardRule rule) {
  Node node{op, std::move(value), {}, {}};
  if (recording()) {
    node.inputs.reserve(inputs.size());
    for (const auto& in : inputs) {
      if (&in.tape() != this) throw std::invalid_argument(std::string(op) + ": operand from another tape");
      node.inputs.push_back(in.index());
    }
    node.rule = std::move(rule);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(const Var& v) const {
  if (v.tape_ != this) throw std::invalid_argument("variable belongs to another tape");
  return nodes_.at(v.index_).value;
}

GradientMap Tape::backward(const Var& loss, std::span<const ParamId> wanted) const {
  if (!recording()) throw std::logic_error("backward() on an inference-mode tape");
  if (loss.tape_ != this) throw std::invalid_argument("loss belongs to another tape");
  const Tensor& loss_value = nodes_.at(loss.index_).value;
  if (loss_value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_string(loss_value.shape()));
  }

  const std::size_t last = loss.index_;
  std::vector<std::uint8_t> reaches(last + 1, 0);
  std::vector<std::size_t> wanted_nodes;
  for (const auto& id : wanted) {
    auto it = params_.find(id);
    if (it == params_.end()) throw std::invalid_argument("backward: parameter '" + id + "' is not on the tape");
    wanted_nodes.push_back(it->second);
    if (it->second <= last) reaches[it->second] = 1;
  }
  for (std::size_t i = 0; i <= last; ++i) {
    for (auto in : nodes_[i].inputs) {
      if (reaches[in]) {
        reaches[i] = 1;
        break;
      }
    }
  }

  std::vector<std::vector<double>> grads(last + 1);
  grads[last] = {1.0};
  BackwardContext ctx;
  ctx.tape_ = this;
  for (std::size_t i = last + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (grads[i].empty() || !reaches[i] || !node.rule) continue;
    ctx.node_ = i;
    ctx.grad_output_ = grads[i];
    ctx.grad_inputs_.assign(node.inputs.size(), {});
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const auto in = node.inputs[k];
      if (!reaches[in]) continue;
      if (grads[in].empty()) grads[in].assign(nodes_[in].value.size(), 0.0);
      ctx.grad_inputs_[k] = grads[in];
    }
    node.rule(ctx);
  }

  GradientMap out;
  for (std::size_t w = 0; w < wanted.size(); ++w) {
    const auto idx = wanted_nodes[w];
    const Tensor& param = nodes_[idx].value;
    if (idx <= last && !grads[idx].empty()) {
      out.insert_or_assign(wanted[w], Tensor(param.shape(), grads[idx]));
    } else {
      out.insert_or_assign(wanted[w], Tensor::zeros(param.shape()));
    }
  }
  return out;
}

std::vector<std::size_t> select_top_k(std::span<const double> row, std::size_t k,
                                      std::span<const std::uint8_t> blocked) {
  std::vector<std::size_t> candidates;
  candidates.reserve(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!blocked.empty() && blocked[i]) continue;
    if (row[i] == kNegInf) continue;
    candidates.push_back(i);
  }
  if (k > candidates.size()) {
    throw std::invalid_argument("top-k: k=" + std::to_string(k) + " exceeds the " +
                                std::to_string(candidates.size()) + " selectable entries");
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  candidates.resize(k);
  return candidates;
}

namespace ad {

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank2("matmul", x);
  require_rank2("matmul", y);
  require_no_nan("matmul", x);
  require_no_nan("matmul", y);
  const std::size_t m = x.shape()[0], k = x.shape()[1], n = y.shape()[1];
  if (y.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(x.shape()) + " * " +
                     shape_string(y.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto xd = x.data();
  const auto yd = y.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = xd[i * k + p];
      if (xv == 0.0) continue;
      const double* yrow = yd.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += xv * yrow[j];
    }
  }
  return a.tape().record("matmul", Tensor({m, n}, std::move(out)), {a, b},
                         [m, k, n](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           if (ctx.needs_grad(0)) {
                             // dA = G * B^T
                             const auto yd = ctx.input(1).data();
                             auto ga = ctx.grad_input(0);
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 double acc = 0.0;
                                 for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * yd[p * n + j];
                                 ga[i * k + p] += acc;
                               }
                           }
                           if (ctx.needs_grad(1)) {
                             // dB = A^T * G
                             const auto xd = ctx.input(0).data();
                             auto gb = ctx.grad_input(1);
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 const double xv = xd[i * k + p];
                                 if (xv == 0.0) continue;
                                 for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += xv * g[i * n + j];
                               }
                           }
                         });
}

Var transpose(const Var& a) {
  const Tensor& x = a.value();
  require_rank2("transpose", x);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return a.tape().record("transpose", Tensor({n, m}, std::move(out)), {a},
                         [m, n](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           auto gi = ctx.grad_input(0);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j) gi[i * n + j] += g[j * m + i];
                         });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape("add", x, y);
  require_no_nan("add", x);
  require_no_nan("add", y);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return a.tape().record("add", Tensor(x.shape(), std::move(out)), {a, b}, [](Tape::BackwardContext& ctx) {
    const auto g = ctx.grad_output();
    for (std::size_t in = 0; in < 2; ++in) {
      if (!ctx.needs_grad(in)) continue;
      auto gi = ctx.grad_input(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var multiply(const Var& a, const Var& b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape("multiply", x, y);
  require_no_nan("multiply", x);
  require_no_nan("multiply", y);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return a.tape().record("multiply", Tensor(x.shape(), std::move(out)), {a, b},
                         [](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           for (std::size_t in = 0; in < 2; ++in) {
                             if (!ctx.needs_grad(in)) continue;
                             const auto other = ctx.input(1 - in).data();
                             auto gi = ctx.grad_input(in);
                             for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * other[i];
                           }
                         });
}

Var scale(const Var& a, double factor) {
  const Tensor& x = a.value();
  require_no_nan("scale", x);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return a.tape().record("scale", Tensor(x.shape(), std::move(out)), {a},
                         [factor](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           auto gi = ctx.grad_input(0);
                           for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * factor;
                         });
}

Var sum(const Var& a) {
  const Tensor& x = a.value();
  require_no_nan("sum", x);
  double total = 0.0;
  for (double v : x.data()) total += v;
  return a.tape().record("sum", Tensor::scalar(total), {a}, [](Tape::BackwardContext& ctx) {
    const double g = ctx.grad_output()[0];
    for (auto& gi : ctx.grad_input(0)) gi += g;
  });
}

Var silu(const Var& a) {
  const Tensor& x = a.value();
  require_no_nan("silu", x);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / (1.0 + std::exp(-x[i]));
  return a.tape().record("silu", Tensor(x.shape(), std::move(out)), {a}, [](Tape::BackwardContext& ctx) {
    const auto g = ctx.grad_output();
    const auto xd = ctx.input(0).data();
    auto gi = ctx.grad_input(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-xd[i]));
      gi[i] += g[i] * s * (1.0 + xd[i] * (1.0 - s));
    }
  });
}

Var softmax(const Var& a) {
  const Tensor& x = a.value();
  require_no_nan("softmax", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = x.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    if (mx == kNegInf) throw NumericError("softmax: row " + std::to_string(r) + " is fully masked");
    if (std::isinf(mx)) throw NumericError("softmax: +inf in row " + std::to_string(r));
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = row[c] == kNegInf ? 0.0 : std::exp(row[c] - mx);
      out[r * cols + c] = e;
      z += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= z;
  }
  return a.tape().record("softmax", Tensor(x.shape(), std::move(out)), {a},
                         [rows, cols](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           const auto y = ctx.output().data();
                           auto gi = ctx.grad_input(0);
                           for (std::size_t r = 0; r < rows; ++r) {
                             double dot = 0.0;
                             for (std::size_t c = 0; c < cols; ++c) dot += y[r * cols + c] * g[r * cols + c];
                             for (std::size_t c = 0; c < cols; ++c) {
                               const auto i = r * cols + c;
                               gi[i] += y[i] * (g[i] - dot);
                             }
                           }
                         });
}

Var rms_normalize(const Var& a, double eps) {
  const Tensor& x = a.value();
  require_no_nan("rms_normalize", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (double v : x.row(r)) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(cols) + eps);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x.at(r, c) * inv;
  }
  return a.tape().record("rms_normalize", Tensor(x.shape(), std::move(out)), {a},
                         [rows, cols, eps](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           const auto xd = ctx.input(0).data();
                           auto gi = ctx.grad_input(0);
                           const double n = static_cast<double>(cols);
                           for (std::size_t r = 0; r < rows; ++r) {
                             double ss = 0.0, gx = 0.0;
                             for (std::size_t c = 0; c < cols; ++c) {
                               const double v = xd[r * cols + c];
                               ss += v * v;
                               gx += g[r * cols + c] * v;
                             }
                             const double inv = 1.0 / std::sqrt(ss / n + eps);
                             const double coef = gx * inv * inv * inv / n;
                             for (std::size_t c = 0; c < cols; ++c) {
                               const auto i = r * cols + c;
                               gi[i] += g[i] * inv - xd[i] * coef;
                             }
                           }
                         });
}

Var embedding(const Var& table, std::span<const std::size_t> ids) {
  const Tensor& t = table.value();
  require_rank2("embedding", t);
  require_no_nan("embedding", t);
  const std::size_t vocab = t.shape()[0], dim = t.shape()[1];
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  std::vector<double> out;
  out.reserve(idv.size() * dim);
  for (auto id : idv) {
    if (id >= vocab) {
      throw std::out_of_range("embedding: id " + std::to_string(id) + " >= vocab " + std::to_string(vocab));
    }
    const auto row = t.row(id);
    out.insert(out.end(), row.begin(), row.end());
  }
  Tensor value({idv.size(), dim}, std::move(out));
  return table.tape().record("embedding", std::move(value), {table},
                             [idv = std::move(idv), dim](Tape::BackwardContext& ctx) {
                               const auto g = ctx.grad_output();
                               auto gi = ctx.grad_input(0);
                               for (std::size_t r = 0; r < idv.size(); ++r)
                                 for (std::size_t c = 0; c < dim; ++c) gi[idv[r] * dim + c] += g[r * dim + c];
                             });
}

Var cross_entropy(const Var& logits, std::span<const std::size_t> targets) {
  const Tensor& z = logits.value();
  require_rank2("cross_entropy", z);
  require_no_nan("cross_entropy", z);
  if (!z.all_finite()) throw NumericError("cross_entropy: non-finite logits");
  const std::size_t rows = z.rows(), cols = z.cols();
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  if (rows == 0) throw ShapeError("cross_entropy: no rows");
  std::vector<std::size_t> tv(targets.begin(), targets.end());
  std::vector<double> probs(z.size());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (tv[r] >= cols) throw std::out_of_range("cross_entropy: target out of range");
    const auto row = z.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] = std::exp(row[c] - mx);
      s += probs[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) probs[r * cols + c] /= s;
    total += (mx + std::log(s)) - row[tv[r]];
  }
  const double mean = total / static_cast<double>(rows);
  return logits.tape().record("cross_entropy", Tensor::scalar(mean), {logits},
                              [probs = std::move(probs), tv = std::move(tv), rows, cols](
                                  Tape::BackwardContext& ctx) {
                                const double g = ctx.grad_output()[0] / static_cast<double>(rows);
                                auto gi = ctx.grad_input(0);
                                for (std::size_t r = 0; r < rows; ++r) {
                                  for (std::size_t c = 0; c < cols; ++c) gi[r * cols + c] += g * probs[r * cols + c];
                                  gi[r * cols + tv[r]] -= g;
                                }
                              });
}

Var top_k_mask(const Var& a, std::size_t k, std::span<const std::uint8_t> blocked) {
  const Tensor& x = a.value();
  require_no_nan("top_k_mask", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  if (k == 0 || k > cols) {
    throw std::invalid_argument("top_k_mask: K=" + std::to_string(k) + " outside [1, " + std::to_string(cols) + "]");
  }
  if (!blocked.empty() && blocked.size() != x.size()) throw ShapeError("top_k_mask: blocked mask size mismatch");
  std::vector<double> out(x.size(), kNegInf);
  std::vector<std::uint8_t> kept(x.size(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row_blocked = blocked.empty() ? blocked : blocked.subspan(r * cols, cols);
    for (auto c : select_top_k(x.row(r), k, row_blocked)) {
      out[r * cols + c] = x.at(r, c);
      kept[r * cols + c] = 1;
    }
  }
  return a.tape().record("top_k_mask", Tensor(x.shape(), std::move(out)), {a},
                         [kept = std::move(kept)](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           auto gi = ctx.grad_input(0);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (kept[i]) gi[i] += g[i];
                         });
}

Var causal_mask(const Var& a) {
  const Tensor& x = a.value();
  require_rank2("causal_mask", x);
  require_no_nan("causal_mask", x);
  const std::size_t n = x.shape()[0];
  if (x.shape()[1] != n) throw ShapeError("causal_mask: expected a square matrix");
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out[i * n + j] = kNegInf;
  return a.tape().record("causal_mask", Tensor(x.shape(), std::move(out)), {a},
                         [n](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           auto gi = ctx.grad_input(0);
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j <= i; ++j) gi[i * n + j] += g[i * n + j];
                         });
}

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
  const Tensor& x = a.value();
  require_rank2("gather_rows", x);
  require_no_nan("gather_rows", x);
  const std::size_t cols = x.cols();
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  std::vector<double> out;
  out.reserve(rv.size() * cols);
  for (auto r : rv) {
    if (r >= x.rows()) throw std::out_of_range("gather_rows: row index out of range");
    const auto src = x.row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  Tensor value({rv.size(), cols}, std::move(out));
  return a.tape().record("gather_rows", std::move(value), {a},
                         [rv = std::move(rv), cols](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           auto gi = ctx.grad_input(0);
                           for (std::size_t i = 0; i < rv.size(); ++i)
                             for (std::size_t c = 0; c < cols; ++c) gi[rv[i] * cols + c] += g[i * cols + c];
                         });
}

Var scatter_rows(const Var& a, std::span<const std::size_t> rows, std::size_t total_rows) {
  const Tensor& x = a.value();
  require_rank2("scatter_rows", x);
  require_no_nan("scatter_rows", x);
  if (rows.size() != x.rows()) throw ShapeError("scatter_rows: index count differs from row count");
  const std::size_t cols = x.cols();
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  std::vector<double> out(total_rows * cols, 0.0);
  for (std::size_t i = 0; i < rv.size(); ++i) {
    if (rv[i] >= total_rows) throw std::out_of_range("scatter_rows: row index out of range");
    for (std::size_t c = 0; c < cols; ++c) out[rv[i] * cols + c] += x.at(i, c);
  }
  return a.tape().record("scatter_rows", Tensor({total_rows, cols}, std::move(out)), {a},
                         [rv = std::move(rv), cols](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           auto gi = ctx.grad_input(0);
                           for (std::size_t i = 0; i < rv.size(); ++i)
                             for (std::size_t c = 0; c < cols; ++c) gi[i * cols + c] += g[rv[i] * cols + c];
                         });
}

Var column(const Var& a, std::size_t col) {
  const Tensor& x = a.value();
  require_rank2("column", x);
  require_no_nan("column", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  if (col >= cols) throw std::out_of_range("column: index out of range");
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = x.at(r, col);
  return a.tape().record("column", Tensor({rows, 1}, std::move(out)), {a},
                         [rows, cols, col](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           auto gi = ctx.grad_input(0);
                           for (std::size_t r = 0; r < rows; ++r) gi[r * cols + col] += g[r];
                         });
}

Var scale_rows(const Var& a, const Var& s) {
  require_same_tape(a, s);
  const Tensor& x = a.value();
  const Tensor& sv = s.value();
  require_rank2("scale_rows", x);
  require_no_nan("scale_rows", x);
  require_no_nan("scale_rows", sv);
  const std::size_t rows = x.rows(), cols = x.cols();
  if (sv.shape() != Shape{rows, 1}) {
    throw ShapeError("scale_rows: scale shape " + shape_string(sv.shape()) + " for " + shape_string(x.shape()));
  }
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x.at(r, c) * sv[r];
  return a.tape().record("scale_rows", Tensor(x.shape(), std::move(out)), {a, s},
                         [rows, cols](Tape::BackwardContext& ctx) {
                           const auto g = ctx.grad_output();
                           const auto xd = ctx.input(0).data();
                           const auto sd = ctx.input(1).data();
                           if (ctx.needs_grad(0)) {
                             auto gx = ctx.grad_input(0);
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r * cols + c] * sd[r];
                           }
                           if (ctx.needs_grad(1)) {
                             auto gs = ctx.grad_input(1);
                             for (std::size_t r = 0; r < rows; ++r) {
                               double acc = 0.0;
                               for (std::size_t c = 0; c < cols; ++c) acc += g[r * cols + c] * xd[r * cols + c];
                               gs[r] += acc;
                             }
                           }
                         });
}

}  // namespace ad
}  // namespace moeprobe

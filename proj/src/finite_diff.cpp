// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "moeprobe/errors.hpp"

namespace moeprobe {

GradientMap finite_diff_gradient(const ScalarFunction& f, const ParameterSet& params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be positive");
  GradientMap out;
  ParameterSet probe = params;
  for (const auto& [id, base] : params) {
    std::vector<double> grad(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      probe[id] = base.with_entry(i, base[i] + h);
      const double up = f(probe);
      probe[id] = base.with_entry(i, base[i] - h);
      const double down = f(probe);
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_gradient: non-finite evaluation at " + id + "[" + std::to_string(i) + "]");
      }
      grad[i] = (up - down) / (2.0 * h);
    }
    probe[id] = base;
    out.emplace(id, Tensor(base.shape(), std::move(grad)));
  }
  return out;
}

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

double max_relative_error(const GradientMap& a, const GradientMap& b) {
  double worst = 0.0;
  for (const auto& [id, ta] : a) {
    auto it = b.find(id);
    if (it == b.end()) throw std::invalid_argument("max_relative_error: '" + id + "' missing");
    const Tensor& tb = it->second;
    if (ta.shape() != tb.shape()) throw ShapeError("max_relative_error: shape mismatch for " + id);
    for (std::size_t i = 0; i < ta.size(); ++i) worst = std::max(worst, relative_error(ta[i], tb[i]));
  }
  return worst;
}

}  // namespace moeprobe

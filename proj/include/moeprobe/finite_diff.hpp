// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>

#include "moeprobe/autodiff.hpp"

namespace moeprobe {

using ParameterSet = std::map<ParamId, Tensor>;
using ScalarFunction = std::function<double(const ParameterSet&)>;

/// Central-difference gradient (f(p+h) - f(p-h)) / 2h, one coordinate at a
/// time. Used as the independent oracle for Tape::backward().
/// Throws NumericError if any evaluation is non-finite.
GradientMap finite_diff_gradient(const ScalarFunction& f, const ParameterSet& params, double h = 1e-5);

/// |a - b| / max(|a|, |b|), with 0/0 treated as agreement.
double relative_error(double a, double b);

/// Largest per-entry relative error between two gradient maps with the same keys.
double max_relative_error(const GradientMap& a, const GradientMap& b);

}  // namespace moeprobe

// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace moeprobe {

// Malformed user input: config files, routing logs, label files, CSVs.
// The CLI maps this to exit status 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape contract violated by an operation's inputs.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN or infinity where finite values are required.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace moeprobe

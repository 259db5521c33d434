// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace moeprobe {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor of doubles. Immutable once constructed; derived
/// tensors are built from a fresh data vector.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::vector<double> data);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] std::span<const double> data() const { return data_; }

  // Last axis length, and the number of last-axis rows.
  [[nodiscard]] std::size_t cols() const;
  [[nodiscard]] std::size_t rows() const;

  [[nodiscard]] double operator[](std::size_t i) const { return data_[i]; }
  [[nodiscard]] double at(std::size_t row, std::size_t col) const { return data_[row * cols() + col]; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const;

  // Scalar tensors (size 1) only.
  [[nodiscard]] double item() const;

  [[nodiscard]] bool has_nan() const;
  [[nodiscard]] bool all_finite() const;

  // Returns a copy with one entry replaced; used by perturbation oracles.
  [[nodiscard]] Tensor with_entry(std::size_t i, double value) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace moeprobe

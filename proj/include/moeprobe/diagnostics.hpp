// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace moeprobe {

using WarningHandler = std::function<void(std::string_view)>;

// Non-fatal conditions (fewer suppression candidates than requested, non-finite
// classifier inputs, ...) are reported here. Default handler writes to stderr.
void warn(std::string_view message);

// Installs a handler and returns the previous one. Thread-safe.
WarningHandler set_warning_handler(WarningHandler handler);

// Captures warnings for the lifetime of the object; restores the previous handler after.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  [[nodiscard]] const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningHandler previous_;
};

}  // namespace moeprobe

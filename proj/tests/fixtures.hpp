// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

namespace moeprobe::fixture {

// Label-file text with the given number of prompts in each transition cell.
inline std::string transition_label_file(std::size_t r_to_n, std::size_t n_to_r, std::size_t both_r,
                                         std::size_t both_n) {
  std::string out = "prompt_id,arm,label\n";
  std::size_t id = 0;
  auto emit = [&](std::size_t count, const char* base, const char* supp) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string name = "p" + std::to_string(++id);
      out += name + ",baseline," + base + "\n";
      out += name + ",suppressed," + supp + "\n";
    }
  };
  emit(r_to_n, "restricted", "non-restricted");
  emit(n_to_r, "non-restricted", "restricted");
  emit(both_r, "restricted", "restricted");
  emit(both_n, "non-restricted", "non-restricted");
  return out;
}

}  // namespace moeprobe::fixture

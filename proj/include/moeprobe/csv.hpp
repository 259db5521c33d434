// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal CSV and text helpers for reports and label files.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace moeprobe {

std::vector<std::string> split_lines(std::string_view text);  // handles \n and \r\n
std::string trim(std::string_view s);
std::vector<std::string> split_fields(std::string_view line, char delimiter);

/// 6 significant digits ("%.6g"); -0 prints as 0.
std::string format_number(double value);
std::string format_number(std::size_t value);

/// Strict whole-string parses; ValidationError names `what` on failure.
double parse_double(std::string_view text, std::string_view what);
std::size_t parse_size(std::string_view text, std::string_view what);

using CsvRow = std::vector<std::string>;

struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;

  /// Index of `name` in the header; throws ValidationError when absent.
  [[nodiscard]] std::size_t column(std::string_view name) const;
};

/// Fields containing the delimiter, quotes or newlines are quoted RFC 4180 style.
std::string format_csv(const CsvTable& table);
/// Parses quoted or unquoted fields; every row must match the header width.
CsvTable parse_csv(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
/// Writes bytes exactly (binary mode). Throws std::runtime_error when unwritable.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace moeprobe

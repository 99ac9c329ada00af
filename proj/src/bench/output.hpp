// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

// CSV, metadata and SVG writers shared by the experiment runners.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "trainflow/bench.hpp"

namespace trainflow::bench::detail {

std::string format_real(double v);

/// Comma-separated, LF-terminated, reals with 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  template <class... Fields>
  void row(const Fields&... fields) {
    std::string line;
    bool first = true;
    (append(line, fields, first), ...);
    line.push_back('\n');
    out_ << line;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  template <class T>
  static void append(std::string& line, const T& value, bool& first) {
    if (!first) line.push_back(',');
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      line += format_real(static_cast<double>(value));
    } else if constexpr (std::is_same_v<T, bool>) {
      line += value ? "1" : "0";
    } else if constexpr (std::is_integral_v<T>) {
      line += fmt::format("{}", value);
    } else {
      line += std::string_view(value);
    }
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

/// Writes metadata at construction (wall_seconds = null) and rewrites it
/// with the elapsed time when finish() is called.
class RunRecorder {
 public:
  RunRecorder(const ExperimentConfig& config, RunArtifacts& artifacts);

  std::filesystem::path csv(std::string_view name);
  void finish();

 private:
  void write_metadata(const nlohmann::json& wall_seconds) const;

  const ExperimentConfig& config_;
  RunArtifacts& artifacts_;
  std::string started_at_;
  std::chrono::steady_clock::time_point start_;
};

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

void write_line_plot_svg(const std::filesystem::path& path, std::string_view title,
                         std::string_view x_label, std::string_view y_label,
                         const std::vector<Series>& series);

void write_histogram_svg(const std::filesystem::path& path, std::string_view title,
                         const initgen::Histogram2D& histogram);

}  // namespace trainflow::bench::detail

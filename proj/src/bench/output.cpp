// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "output.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <limits>

#include "trainflow/errors.hpp"

namespace trainflow::bench::detail {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(fmt::format("cannot write '{}'", path.string()));
  std::string line;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) line.push_back(',');
    line += header[i];
  }
  line.push_back('\n');
  out_ << line;
}

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunRecorder::RunRecorder(const ExperimentConfig& config, RunArtifacts& artifacts)
    : config_(config),
      artifacts_(artifacts),
      started_at_(utc_now()),
      start_(std::chrono::steady_clock::now()) {
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) {
    throw Error(fmt::format("cannot create output directory '{}': {}",
                            config.output_dir.string(), ec.message()));
  }
  artifacts_.metadata_path = config.output_dir / "metadata.json";
  write_metadata(nullptr);
}

std::filesystem::path RunRecorder::csv(std::string_view name) {
  auto path = config_.output_dir / std::string(name);
  artifacts_.csv_paths.push_back(path);
  return path;
}

void RunRecorder::finish() {
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  write_metadata(wall);
}

void RunRecorder::write_metadata(const nlohmann::json& wall_seconds) const {
  nlohmann::json meta;
  meta["config"] = to_json(config_);
  meta["base_seed"] = config_.base_seed;
  meta["derived_seed_rule"] = "trial k uses seed base_seed + k";
  meta["version"] = std::string(kVersion);
  meta["started_at"] = started_at_;
  meta["wall_seconds"] = wall_seconds;
  std::ofstream out(artifacts_.metadata_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", artifacts_.metadata_path.string()));
  out << meta.dump(2) << '\n';
}

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 480;
constexpr double kMargin = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

void open_svg(std::ofstream& out, std::string_view title) {
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"16\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, escape(title));
}

}  // namespace

void write_line_plot_svg(const std::filesystem::path& path, std::string_view title,
                         std::string_view x_label, std::string_view y_label,
                         const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    for (double x : s.xs) x0 = std::min(x0, x), x1 = std::max(x1, x);
    for (double y : s.ys)
      if (std::isfinite(y)) y0 = std::min(y0, y), y1 = std::max(y1, y);
  }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
  const double pw = kWidth - 2 * kMargin, ph = kHeight - 2 * kMargin;
  auto px = [&](double x) { return kMargin + pw * (x - x0) / (x1 - x0); };
  auto py = [&](double y) { return kHeight - kMargin - ph * (y - y0) / (y1 - y0); };

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  open_svg(out, title);
  out << fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      kMargin, kMargin, pw, ph);
  out << fmt::format(
      "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"12\">{}</text>\n",
      kWidth / 2, kHeight - 20, escape(x_label));
  out << fmt::format(
      "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\" "
      "font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
      kHeight / 2, kHeight / 2, escape(y_label));
  out << fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{:.3g}</text>\n"
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{:.3g}</text>\n",
      4, py(y0), y0, 4, py(y1) + 10, y1);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    std::string points;
    for (std::size_t k = 0; k < s.xs.size() && k < s.ys.size(); ++k) {
      if (!std::isfinite(s.ys[k])) continue;
      points += fmt::format("{:.2f},{:.2f} ", px(s.xs[k]), py(s.ys[k]));
    }
    out << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                       color, points);
    out << fmt::format(
        "<text x=\"{}\" y=\"{}\" fill=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        kWidth - kMargin + 4 - 120, kMargin + 14 + 14 * i, color, escape(s.label));
  }
  out << "</svg>\n";
}

void write_histogram_svg(const std::filesystem::path& path, std::string_view title,
                         const initgen::Histogram2D& histogram) {
  const auto& g = histogram.grid;
  long peak = 1;
  for (long c : histogram.counts) peak = std::max(peak, c);
  const double side = std::min(kWidth, kHeight) - 2 * kMargin;
  const double cw = side / g.bins_re, ch = side / g.bins_im;
  const double left = (kWidth - side) / 2, top = kMargin;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  open_svg(out, title);
  for (int i = 0; i < g.bins_re; ++i) {
    for (int j = 0; j < g.bins_im; ++j) {
      const long c = histogram.at(i, j);
      if (c == 0) continue;
      // log-scaled grey level
      const double level = std::log1p(static_cast<double>(c)) / std::log1p(static_cast<double>(peak));
      const int shade = static_cast<int>(std::lround(255 * (1 - level)));
      out << fmt::format(
          "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
          "fill=\"rgb({},{},{})\"/>\n",
          left + i * cw, top + (g.bins_im - 1 - j) * ch, cw, ch, shade, shade, 255);
    }
  }
  // unit circle
  const double sx = side / (g.re_max - g.re_min), sy = side / (g.im_max - g.im_min);
  out << fmt::format(
      "<ellipse cx=\"{:.2f}\" cy=\"{:.2f}\" rx=\"{:.2f}\" ry=\"{:.2f}\" fill=\"none\" "
      "stroke=\"black\" stroke-dasharray=\"4 3\"/>\n",
      left + (0 - g.re_min) * sx, top + (g.im_max - 0) * sy, sx, sy);
  out << fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      left, top, side, side);
  out << "</svg>\n";
}

}  // namespace trainflow::bench::detail

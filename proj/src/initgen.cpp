// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "trainflow/initgen.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "trainflow/errors.hpp"
#include "trainflow/parallel.hpp"
#include "trainflow/rng.hpp"

namespace trainflow::initgen {

std::string_view to_string(InitKind kind) {
  switch (kind) {
    case InitKind::glorot_normal: return "glorot_normal";
    case InitKind::glorot_uniform: return "glorot_uniform";
    case InitKind::gershgorin_discrete: return "gershgorin_discrete";
    case InitKind::gershgorin_discrete_rownorm: return "gershgorin_discrete_rownorm";
    case InitKind::gershgorin_continuous: return "gershgorin_continuous";
  }
  return "unknown";
}

InitKind parse_init_kind(std::string_view name) {
  for (InitKind k : {InitKind::glorot_normal, InitKind::glorot_uniform,
                     InitKind::gershgorin_discrete, InitKind::gershgorin_discrete_rownorm,
                     InitKind::gershgorin_continuous}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError(fmt::format("unknown initialization scheme '{}'", name));
}

void InitScheme::validate() const {
  const bool gershgorin = kind != InitKind::glorot_normal && kind != InitKind::glorot_uniform;
  if (n < 1 || (gershgorin && n < 2)) {
    throw ConfigError(fmt::format("{} needs n >= {}, got {}", to_string(kind),
                                  gershgorin ? 2 : 1, n));
  }
}

Mat sample_init(const InitScheme& scheme, std::uint64_t seed) {
  scheme.validate();
  const int n = scheme.n;
  Rng rng(seed);
  Mat a = Mat::Zero(n, n);

  // Entries are filled row by row so that a given seed always produces the
  // same matrix regardless of storage order.
  switch (scheme.kind) {
    case InitKind::glorot_normal: {
      const double stddev = 1.0 / std::sqrt(static_cast<double>(n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.normal(0.0, stddev);
      return a;
    }
    case InitKind::glorot_uniform: {
      const double limit = std::sqrt(3.0 / n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-limit, limit);
      return a;
    }
    case InitKind::gershgorin_discrete:
    case InitKind::gershgorin_discrete_rownorm:
    case InitKind::gershgorin_continuous:
      break;
  }

  const double limit = 1.0 / (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) a(i, j) = rng.uniform(-limit, limit);

  if (scheme.kind == InitKind::gershgorin_discrete_rownorm) {
    for (int i = 0; i < n; ++i) {
      const double radius = a.row(i).cwiseAbs().sum();
      if (radius > 0.0) a.row(i) /= radius;
    }
  } else if (scheme.kind == InitKind::gershgorin_continuous) {
    for (int i = 0; i < n; ++i) a(i, i) = -a.row(i).cwiseAbs().sum();
  }
  return a;
}

void HistogramGrid::validate() const {
  if (!(re_max > re_min) || !(im_max > im_min) || bins_re < 1 || bins_im < 1) {
    throw ConfigError("histogram grid needs max > min and at least one bin per axis");
  }
}

long Histogram2D::total() const {
  long sum = 0;
  for (long c : counts) sum += c;
  return sum;
}

int default_trials(int n) {
  if (n < 1) throw ConfigError("default_trials: n must be >= 1");
  return static_cast<int>((100000 + n - 1) / n);
}

namespace {

int bin_index(double v, double lo, double width, int bins, bool& clamped) {
  auto i = static_cast<long>(std::floor((v - lo) / width));
  if (i < 0 || i >= bins) clamped = true;
  return static_cast<int>(std::clamp<long>(i, 0, bins - 1));
}

SpectrumStats summarize(std::vector<ComplexList> per_trial, const HistogramGrid& grid,
                        int n) {
  grid.validate();
  SpectrumStats stats;
  stats.trials = static_cast<int>(per_trial.size());
  stats.n = n;
  stats.histogram.grid = grid;
  stats.histogram.counts.assign(static_cast<std::size_t>(grid.bins_re) * grid.bins_im, 0);

  long outside = 0;
  long positive = 0;
  for (ComplexList& values : per_trial) {
    for (const Complex& z : values) {
      if (std::abs(z) > 1.0) ++outside;
      if (z.real() > 0.0) ++positive;
      bool clamped = false;
      const int i = bin_index(z.real(), grid.re_min, grid.re_width(), grid.bins_re, clamped);
      const int j = bin_index(z.imag(), grid.im_min, grid.im_width(), grid.bins_im, clamped);
      ++stats.histogram.counts[static_cast<std::size_t>(i) * grid.bins_im + j];
      if (clamped) ++stats.histogram.out_of_window;
      stats.eigenvalues.push_back(z);
    }
  }
  const auto total = static_cast<double>(stats.eigenvalues.size());
  if (total > 0) {
    stats.phi = static_cast<double>(outside) / total;
    stats.frac_positive_real = static_cast<double>(positive) / total;
  }
  return stats;
}

}  // namespace

SpectrumStats spectrum_stats(const InitScheme& scheme, int trials, std::uint64_t base_seed,
                             const HistogramGrid& grid, unsigned threads) {
  scheme.validate();
  grid.validate();
  if (trials < 1) throw ConfigError("spectrum_stats: trials must be >= 1");
  auto per_trial = parallel_map(
      static_cast<std::size_t>(trials),
      [&](std::size_t k) {
        return matcore::eig(sample_init(scheme, derive_seed(base_seed, k)));
      },
      threads);
  SpectrumStats stats = summarize(std::move(per_trial), grid, scheme.n);
  stats.base_seed = base_seed;
  return stats;
}

SpectrumStats spectrum_stats_of(std::span<const Mat> matrices, const HistogramGrid& grid) {
  if (matrices.empty()) throw ConfigError("spectrum_stats_of: no matrices");
  std::vector<ComplexList> per_trial;
  per_trial.reserve(matrices.size());
  for (const Mat& m : matrices) per_trial.push_back(matcore::eig(m));
  return summarize(std::move(per_trial), grid, static_cast<int>(matrices.front().rows()));
}

}  // namespace trainflow::initgen

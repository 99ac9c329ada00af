// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

// Weight-initialization samplers for a square single-layer linear map and
// eigenvalue statistics over seeded realizations.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "trainflow/matcore.hpp"

namespace trainflow::initgen {

enum class InitKind {
  glorot_normal,
  glorot_uniform,
  gershgorin_discrete,
  gershgorin_discrete_rownorm,
  gershgorin_continuous,
};

std::string_view to_string(InitKind kind);
/// Throws ConfigError for unknown names.
InitKind parse_init_kind(std::string_view name);

struct InitScheme {
  InitKind kind = InitKind::glorot_normal;
  int n = 0;

  /// Throws ConfigError (n < 1, or n < 2 for the Gershgorin family).
  void validate() const;
};

/// Draws one n x n initialization.
///
/// Glorot uses fan_in = fan_out = n (variance 1/n).  The Gershgorin family
/// draws off-diagonal entries uniformly on [-1/(n-1), 1/(n-1)] with a zero
/// diagonal, so every disk sits at the origin with radius < 1.  The rownorm
/// variant rescales each row to an absolute off-diagonal sum of exactly 1.
/// The continuous variant moves each disk center to minus its radius,
/// keeping the disks in the closed left half plane.
Mat sample_init(const InitScheme& scheme, std::uint64_t seed);

struct HistogramGrid {
  double re_min = -1.5;
  double re_max = 1.5;
  double im_min = -1.5;
  double im_max = 1.5;
  int bins_re = 151;
  int bins_im = 151;

  void validate() const;
  double re_width() const { return (re_max - re_min) / bins_re; }
  double im_width() const { return (im_max - im_min) / bins_im; }
};

struct Histogram2D {
  HistogramGrid grid;
  /// counts[i_re * bins_im + i_im]; eigenvalues outside the window land in
  /// the nearest edge bin so the total equals the number of eigenvalues.
  std::vector<long> counts;
  long out_of_window = 0;

  long at(int i_re, int i_im) const {
    return counts[static_cast<std::size_t>(i_re) * grid.bins_im + i_im];
  }
  long total() const;
};

struct SpectrumStats {
  ComplexList eigenvalues;  // trial-major, each trial sorted
  double phi = 0.0;                 // fraction with |lambda| > 1
  double frac_positive_real = 0.0;  // fraction with Re lambda > 0
  Histogram2D histogram;
  int trials = 0;
  int n = 0;
  std::uint64_t base_seed = 0;
};

/// Eigenvalues of `trials` samples seeded base_seed + k, merged in trial
/// order.  `threads` = 0 uses the hardware concurrency.
SpectrumStats spectrum_stats(const InitScheme& scheme, int trials, std::uint64_t base_seed,
                             const HistogramGrid& grid = {}, unsigned threads = 0);

/// Same statistics over explicitly supplied matrices (one per trial).
SpectrumStats spectrum_stats_of(std::span<const Mat> matrices,
                                const HistogramGrid& grid = {});

/// Default trial count for an n x n spectrum: ceil(1e5 / n).
int default_trials(int n);

}  // namespace trainflow::initgen

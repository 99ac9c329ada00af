// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

// Construction of linear systems and snapshot datasets, structured noise,
// and the data-side remedies (whitening, projection onto the data subspace).

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "trainflow/matcore.hpp"

namespace trainflow::sysgen {

enum class NoiseStructure { none, iid, trajectory_shifted };

std::string_view to_string(NoiseStructure s);

/// Paired snapshot matrices.  Column j of xsharp is the image of column j
/// of x under the dynamics.  Columns are grouped trajectory by trajectory,
/// `trajectory_length` columns each.
struct SnapshotData {
  Mat x;
  Mat xsharp;
  std::optional<double> dt;  // present iff continuous-time
  double noise_sigma = 0.0;
  NoiseStructure noise_structure = NoiseStructure::none;
  int trajectory_length = 1;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index m() const { return x.cols(); }
  bool continuous() const { return dt.has_value(); }

  /// Throws DimensionError / ConfigError if the invariants do not hold.
  void validate() const;
};

/// Orthogonal basis whose first r columns span the data (or invariant)
/// subspace.
struct BasisPair {
  Mat u;
  int r = 0;

  Mat leading() const { return u.leftCols(r); }
  Mat complement() const { return u.rightCols(u.cols() - r); }
};

struct BlockSpec {
  int n = 0;
  int r = 0;
  ComplexList learnable_eigenvalues;  // length r
  double coupling_scale = 1.0;
  /// Length n - r; nullopt draws a Glorot-normal complement block.
  std::optional<ComplexList> complement_eigenvalues;
};

struct BlockSystem {
  Mat a;
  BasisPair basis;
};

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, R's diagonal
/// made positive).
Mat random_orthogonal(int n, std::uint64_t seed);

/// Real matrix with the given spectrum: real eigenvalues become 1x1 blocks,
/// conjugate pairs 2x2 rotation-scaling blocks, then a random orthogonal
/// similarity mixes them.  Throws DomainError if `eigenvalues` is not closed
/// under conjugation.
Mat real_matrix_with_spectrum(const ComplexList& eigenvalues, std::uint64_t seed);

/// A = U [[A11, A12], [0, A22]] U^T with eig(A11) = learnable eigenvalues.
BlockSystem build_block_system(const BlockSpec& spec, std::uint64_t seed);

/// Iterates x <- A x from each column of `initial_states` for `steps` steps.
SnapshotData discrete_pairs(const Mat& a, const Mat& initial_states, int steps);

enum class Propagator { exact, euler };

/// Snapshots separated by dt of dx/dt = A x; exact uses e^{A dt}, euler
/// uses I + A dt.
SnapshotData continuous_pairs(const Mat& a, double dt, const Mat& initial_states,
                              int steps, Propagator method);

/// Snapshot matrix U_r diag(s) V^T with prescribed singular values along the
/// leading columns of `basis` and Haar-random right singular vectors;
/// xsharp = step * x.  Not tied to trajectories (trajectory_length = 1).
SnapshotData snapshots_with_spectrum(const Mat& step, const BasisPair& basis,
                                     const Vec& singular_values, int m,
                                     std::uint64_t seed);

struct NoisePair {
  Mat n;
  Mat nsharp;
};

/// Zero-mean Gaussian noise of standard deviation sigma shaped like `data`.
/// With a mask, noise = U_2 G where U_2 spans the complement of the mask's
/// leading r columns.
NoisePair draw_noise(const SnapshotData& data, double sigma, std::uint64_t seed,
                     NoiseStructure structure, const BasisPair* mask = nullptr);

/// Returns (X + N, X# + N#).
SnapshotData inject_noise(const SnapshotData& data, double sigma, std::uint64_t seed,
                          NoiseStructure structure = NoiseStructure::iid,
                          const BasisPair* mask = nullptr);

struct WhitenResult {
  SnapshotData data;
  Mat w;
  int rank = 0;
  /// True when W was computed from data that already carried noise.
  bool from_noisy_data = false;
};

/// W = U diag(w) U^T with w_i = 1/sigma_i above tol and 1 otherwise, so the
/// retained singular values of W X are all one.
WhitenResult whiten(const SnapshotData& data, double tol = 0.0);

struct ProjectionResult {
  SnapshotData data;  // r x m
  BasisPair basis;
};

ProjectionResult project_to_data_subspace(const SnapshotData& data, double tol = 0.0);

/// U^T Ahat U.
Mat to_svd_basis(const Mat& ahat, const BasisPair& basis);

}  // namespace trainflow::sysgen

// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "trainflow/sysgen.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "trainflow/errors.hpp"
#include "trainflow/rng.hpp"

namespace trainflow::sysgen {

std::string_view to_string(NoiseStructure s) {
  switch (s) {
    case NoiseStructure::none: return "none";
    case NoiseStructure::iid: return "iid";
    case NoiseStructure::trajectory_shifted: return "trajectory_shifted";
  }
  return "unknown";
}

void SnapshotData::validate() const {
  if (x.rows() != xsharp.rows() || x.cols() != xsharp.cols()) {
    throw DimensionError(fmt::format("snapshot matrices differ in shape: {}x{} vs {}x{}",
                                     x.rows(), x.cols(), xsharp.rows(), xsharp.cols()));
  }
  if (x.cols() < 1) throw DimensionError("snapshot data needs at least one pair");
  if (dt && !(*dt > 0.0)) throw ConfigError("dt must be positive");
  if (trajectory_length < 1 || x.cols() % trajectory_length != 0) {
    throw ConfigError(fmt::format("trajectory length {} does not divide m = {}",
                                  trajectory_length, x.cols()));
  }
}

namespace {

Mat gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev = 1.0) {
  Mat g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = stddev * rng.normal();
  return g;
}

// Thin Q of a Gaussian matrix with the sign of R's diagonal folded in.
Mat orthonormal_columns(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  const Mat g = gaussian(rows, cols, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(rows, cols);
  const Mat& r = qr.matrixQR();
  for (Eigen::Index i = 0; i < cols; ++i) {
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  }
  return q;
}

bool is_real(const Complex& z) {
  return std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z));
}

SnapshotData iterate_map(const Mat& step, const Mat& initial_states, int steps) {
  matcore::require_square(step, "snapshot generation");
  if (initial_states.rows() != step.rows()) {
    throw DimensionError(fmt::format("initial states have {} rows, system has dimension {}",
                                     initial_states.rows(), step.rows()));
  }
  if (initial_states.cols() < 1) throw DimensionError("need at least one initial state");
  if (steps < 1) throw ConfigError("steps per trajectory must be >= 1");

  const Eigen::Index n = step.rows();
  const Eigen::Index k = initial_states.cols();
  SnapshotData data;
  data.x.resize(n, k * steps);
  data.xsharp.resize(n, k * steps);
  data.trajectory_length = steps;
  for (Eigen::Index j = 0; j < k; ++j) {
    Vec state = initial_states.col(j);
    for (int s = 0; s < steps; ++s) {
      const Eigen::Index c = j * steps + s;
      data.x.col(c) = state;
      state = step * data.x.col(c);
      data.xsharp.col(c) = state;
    }
  }
  return data;
}

}  // namespace

Mat random_orthogonal(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("random_orthogonal: n must be >= 1");
  return orthonormal_columns(n, n, seed);
}

Mat real_matrix_with_spectrum(const ComplexList& eigenvalues, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(eigenvalues.size());
  Mat d = Mat::Zero(n, n);
  std::vector<bool> used(eigenvalues.size(), false);
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    const Complex z = eigenvalues[i];
    if (is_real(z)) {
      d(pos, pos) = z.real();
      ++pos;
      continue;
    }
    std::size_t partner = eigenvalues.size();
    for (std::size_t j = i + 1; j < eigenvalues.size(); ++j) {
      if (!used[j] && std::abs(eigenvalues[j] - std::conj(z)) <=
                          1e-10 * std::max(1.0, std::abs(z))) {
        partner = j;
        break;
      }
    }
    if (partner == eigenvalues.size()) {
      throw DomainError(fmt::format("eigenvalue {}{:+}i has no conjugate partner",
                                    z.real(), z.imag()));
    }
    used[partner] = true;
    const double b = std::abs(z.imag());
    d(pos, pos) = z.real();
    d(pos, pos + 1) = b;
    d(pos + 1, pos) = -b;
    d(pos + 1, pos + 1) = z.real();
    pos += 2;
  }
  if (n == 0) return d;
  const Mat q = random_orthogonal(static_cast<int>(n), seed);
  return q * d * q.transpose();
}

BlockSystem build_block_system(const BlockSpec& spec, std::uint64_t seed) {
  if (spec.n < 1 || spec.r < 1 || spec.r > spec.n) {
    throw ConfigError(fmt::format("block system needs 1 <= r <= n, got n={}, r={}", spec.n,
                                  spec.r));
  }
  if (static_cast<int>(spec.learnable_eigenvalues.size()) != spec.r) {
    throw ConfigError(fmt::format("expected {} learnable eigenvalues, got {}", spec.r,
                                  spec.learnable_eigenvalues.size()));
  }
  const int c = spec.n - spec.r;
  if (spec.complement_eigenvalues &&
      static_cast<int>(spec.complement_eigenvalues->size()) != c) {
    throw ConfigError(fmt::format("expected {} complement eigenvalues, got {}", c,
                                  spec.complement_eigenvalues->size()));
  }

  Mat tilde = Mat::Zero(spec.n, spec.n);
  tilde.topLeftCorner(spec.r, spec.r) =
      real_matrix_with_spectrum(spec.learnable_eigenvalues, sub_seed(seed, 1));
  if (c > 0) {
    Rng coupling_rng(sub_seed(seed, 2));
    tilde.topRightCorner(spec.r, c) = gaussian(spec.r, c, coupling_rng, spec.coupling_scale);
    if (spec.complement_eigenvalues) {
      tilde.bottomRightCorner(c, c) =
          real_matrix_with_spectrum(*spec.complement_eigenvalues, sub_seed(seed, 3));
    } else {
      Rng glorot_rng(sub_seed(seed, 3));
      tilde.bottomRightCorner(c, c) =
          gaussian(c, c, glorot_rng, 1.0 / std::sqrt(static_cast<double>(spec.n)));
    }
  }

  BlockSystem system;
  system.basis.u = random_orthogonal(spec.n, sub_seed(seed, 0));
  system.basis.r = spec.r;
  system.a = system.basis.u * tilde * system.basis.u.transpose();
  return system;
}

SnapshotData discrete_pairs(const Mat& a, const Mat& initial_states, int steps) {
  matcore::require_finite(a, "discrete_pairs");
  return iterate_map(a, initial_states, steps);
}

SnapshotData continuous_pairs(const Mat& a, double dt, const Mat& initial_states, int steps,
                              Propagator method) {
  if (!(dt > 0.0)) throw ConfigError(fmt::format("dt must be positive, got {}", dt));
  matcore::require_square(a, "continuous_pairs");
  matcore::require_finite(a, "continuous_pairs");
  const Mat step = method == Propagator::exact
                       ? matcore::matexp(a * dt)
                       : Mat(Mat::Identity(a.rows(), a.cols()) + a * dt);
  SnapshotData data = iterate_map(step, initial_states, steps);
  data.dt = dt;
  return data;
}

SnapshotData snapshots_with_spectrum(const Mat& step, const BasisPair& basis,
                                     const Vec& singular_values, int m, std::uint64_t seed) {
  matcore::require_square(step, "snapshots_with_spectrum");
  const Eigen::Index k = singular_values.size();
  if (basis.u.rows() != step.rows() || basis.u.cols() != step.rows()) {
    throw DimensionError("snapshots_with_spectrum: basis does not match the system");
  }
  if (k > step.rows() || k < 1) {
    throw ConfigError("snapshots_with_spectrum: need 1 <= #singular values <= n");
  }
  if (m < k) throw ConfigError("snapshots_with_spectrum: need m >= #singular values");
  const Mat v = orthonormal_columns(m, k, seed);
  SnapshotData data;
  data.x = basis.u.leftCols(k) * singular_values.asDiagonal() * v.transpose();
  data.xsharp = step * data.x;
  return data;
}

NoisePair draw_noise(const SnapshotData& data, double sigma, std::uint64_t seed,
                     NoiseStructure structure, const BasisPair* mask) {
  data.validate();
  if (!(sigma >= 0.0)) throw ConfigError(fmt::format("sigma must be >= 0, got {}", sigma));
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  if (mask && (mask->u.rows() != n || mask->u.cols() != n || mask->r < 0 || mask->r > n)) {
    throw DimensionError("noise mask basis does not match the data dimension");
  }
  const Eigen::Index d = mask ? n - mask->r : n;

  Mat g = Mat::Zero(d, m);
  Mat gsharp = Mat::Zero(d, m);
  Rng rng(seed);
  switch (structure) {
    case NoiseStructure::none:
      break;
    case NoiseStructure::iid:
      g = gaussian(d, m, rng, sigma);
      gsharp = gaussian(d, m, rng, sigma);
      break;
    case NoiseStructure::trajectory_shifted: {
      const int len = data.trajectory_length;
      for (Eigen::Index t0 = 0; t0 < m; t0 += len) {
        const Mat z = gaussian(d, len + 1, rng, sigma);
        g.middleCols(t0, len) = z.leftCols(len);
        gsharp.middleCols(t0, len) = z.rightCols(len);
      }
      break;
    }
  }
  if (!mask) return {std::move(g), std::move(gsharp)};
  const Mat u2 = mask->complement();
  return {u2 * g, u2 * gsharp};
}

SnapshotData inject_noise(const SnapshotData& data, double sigma, std::uint64_t seed,
                          NoiseStructure structure, const BasisPair* mask) {
  const NoisePair noise = draw_noise(data, sigma, seed, structure, mask);
  if (sigma == 0.0 || structure == NoiseStructure::none) return data;
  SnapshotData out = data;
  out.x += noise.n;
  out.xsharp += noise.nsharp;
  out.noise_sigma = std::hypot(data.noise_sigma, sigma);
  out.noise_structure = structure;
  return out;
}

WhitenResult whiten(const SnapshotData& data, double tol) {
  data.validate();
  const matcore::SvdResult f = matcore::svd(data.x, tol);
  if (f.rank == 0) throw DomainError("whiten: data matrix has no energy");
  Vec gain = Vec::Ones(data.n());
  for (int i = 0; i < f.rank; ++i) gain(i) = 1.0 / f.singular_values(i);

  WhitenResult result;
  result.w = f.U * gain.asDiagonal() * f.U.transpose();
  result.rank = f.rank;
  result.from_noisy_data = data.noise_sigma > 0.0;
  result.data = data;
  result.data.x = result.w * data.x;
  result.data.xsharp = result.w * data.xsharp;
  return result;
}

ProjectionResult project_to_data_subspace(const SnapshotData& data, double tol) {
  data.validate();
  const matcore::SvdResult f = matcore::svd(data.x, tol);
  ProjectionResult result;
  result.basis.u = f.U;
  result.basis.r = f.rank;
  const Mat u1t = f.range_basis().transpose();
  result.data = data;
  result.data.x = u1t * data.x;
  result.data.xsharp = u1t * data.xsharp;
  return result;
}

Mat to_svd_basis(const Mat& ahat, const BasisPair& basis) {
  if (ahat.rows() != basis.u.rows() || ahat.cols() != basis.u.cols()) {
    throw DimensionError(fmt::format("to_svd_basis: operator {}x{} vs basis {}x{}",
                                     ahat.rows(), ahat.cols(), basis.u.rows(),
                                     basis.u.cols()));
  }
  return basis.u.transpose() * ahat * basis.u;
}

}  // namespace trainflow::sysgen

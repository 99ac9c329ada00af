// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "trainflow/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "trainflow/errors.hpp"

namespace trainflow::matcore {

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) {
    throw DomainError(fmt::format("{}: matrix has non-finite entries", what));
  }
}

void require_square(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(
        fmt::format("{}: expected a square matrix, got {}x{}", what, m.rows(), m.cols()));
  }
}

double default_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) *
         std::numeric_limits<double>::epsilon() * sigma_max;
}

SvdResult svd(const Mat& m, double tol) {
  require_finite(m, "svd");
  if (tol < 0.0) throw ConfigError("svd: tolerance must be non-negative");

  Eigen::JacobiSVD<Mat> solver(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdResult result;
  result.U = solver.matrixU();
  result.V = solver.matrixV();
  result.singular_values = solver.singularValues();

  const double sigma_max =
      result.singular_values.size() > 0 ? result.singular_values(0) : 0.0;
  result.tolerance = tol > 0.0 ? tol : default_tolerance(m.rows(), m.cols(), sigma_max);
  result.rank = static_cast<int>(
      (result.singular_values.array() > result.tolerance).count());
  return result;
}

Mat pinv(const Mat& m, double tol) {
  const SvdResult f = svd(m, tol);
  const int k = f.rank;
  // V_k * diag(1/s_k) * U_k^T
  Mat left = f.V.leftCols(k);
  for (int i = 0; i < k; ++i) left.col(i) /= f.singular_values(i);
  return left * f.U.leftCols(k).transpose();
}

Mat matexp(const Mat& m) {
  require_square(m, "matexp");
  require_finite(m, "matexp");
  if (m.size() == 0) return m;
  // Eigen's MatrixExponential: Higham's scaling and squaring, Pade degree
  // chosen from the 1-norm, up to degree 13.
  return m.exp();
}

ComplexList eig(const Mat& m) {
  require_square(m, "eig");
  require_finite(m, "eig");
  ComplexList values;
  if (m.rows() == 0) return values;

  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError(fmt::format(
        "eig: QR iteration did not converge (dimension {}, Frobenius norm {:.6g})",
        m.rows(), m.norm()));
  }
  const auto& ev = solver.eigenvalues();
  values.reserve(static_cast<std::size_t>(ev.size()));
  for (Eigen::Index i = 0; i < ev.size(); ++i) values.push_back(ev(i));
  std::sort(values.begin(), values.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return values;
}

double spectral_radius(const Mat& m) {
  double radius = 0.0;
  for (const Complex& lambda : eig(m)) radius = std::max(radius, std::abs(lambda));
  return radius;
}

}  // namespace trainflow::matcore

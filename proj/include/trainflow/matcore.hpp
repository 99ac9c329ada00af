// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

// Dense real-matrix kernels used by every other module: SVD with numerical
// rank, Moore-Penrose pseudoinverse, matrix exponential, eigenvalues and
// spectral radius.  All functions are pure.

#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace trainflow {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Complex = std::complex<double>;

/// Eigenvalues sorted by real part, then imaginary part.
using ComplexList = std::vector<Complex>;

namespace matcore {

struct SvdResult {
  Mat U;                 // rows x rows, orthogonal
  Vec singular_values;   // min(rows, cols), descending
  Mat V;                 // cols x cols, orthogonal
  int rank = 0;          // count of singular values > tolerance
  double tolerance = 0;  // the tolerance actually applied

  /// First `rank` columns of U.
  Mat range_basis() const { return U.leftCols(rank); }
};

/// max(rows, cols) * eps * sigma_max.
double default_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max);

/// Full SVD.  tol == 0 selects default_tolerance.  Throws DomainError on
/// non-finite input and ConfigError on tol < 0.
SvdResult svd(const Mat& m, double tol = 0.0);

/// Moore-Penrose pseudoinverse, truncating singular values <= tol.
Mat pinv(const Mat& m, double tol = 0.0);

/// e^M by scaling and squaring with a degree-13 Pade approximant.
Mat matexp(const Mat& m);

/// Eigenvalues, sorted by (real, imag).  Throws NumericalError when the
/// QR iteration fails to converge.
ComplexList eig(const Mat& m);

/// max |lambda_i|.
double spectral_radius(const Mat& m);

/// Throws DomainError unless every entry is finite.
void require_finite(const Mat& m, const char* what);

/// Throws DimensionError unless m is square.
void require_square(const Mat& m, const char* what);

}  // namespace matcore
}  // namespace trainflow

// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "doctest.h"
#include "test_support.hpp"
#include "trainflow/errors.hpp"
#include "trainflow/matcore.hpp"

using namespace trainflow;
using namespace trainflow::matcore;
using trainflow::testing::max_diff;
using trainflow::testing::random_matrix;

TEST_CASE("svd of simple matrices") {
  const SvdResult eye = svd(Mat::Identity(3, 3));
  CHECK(eye.rank == 3);
  CHECK(max_diff(eye.singular_values, Vec::Ones(3)) < 1e-15);

  Mat d(2, 2);
  d << 3, 0, 0, 0;
  const SvdResult f = svd(d);
  CHECK(f.singular_values(0) == doctest::Approx(3.0));
  CHECK(f.singular_values(1) == 0.0);
  CHECK(f.rank == 1);
}

TEST_CASE("svd factors reconstruct and are orthogonal") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Mat m = random_matrix(4, 3, seed);
    const SvdResult f = svd(m);
    Mat sigma = Mat::Zero(4, 3);
    sigma.diagonal() = f.singular_values;
    const double smax = f.singular_values(0);
    CHECK(max_diff(f.U * sigma * f.V.transpose(), m) < 1e-10 * smax);
    CHECK(max_diff(f.U.transpose() * f.U, Mat::Identity(4, 4)) < 1e-10);
    CHECK(max_diff(f.V.transpose() * f.V, Mat::Identity(3, 3)) < 1e-10);
    for (int i = 0; i + 1 < 3; ++i) CHECK(f.singular_values(i) >= f.singular_values(i + 1));
    CHECK(f.rank == 3);
  }
}

TEST_CASE("svd default tolerance and explicit tolerance") {
  Mat m = Mat::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 1) = 1e-20;
  CHECK(svd(m).rank == 1);
  CHECK(svd(m, 1e-30).rank == 2);
  CHECK(svd(m).tolerance == doctest::Approx(3 * std::numeric_limits<double>::epsilon()));
  CHECK(svd(Mat::Zero(2, 2)).rank == 0);
}

TEST_CASE("singular values are square roots of eig(M^T M)") {
  const Mat m = random_matrix(5, 4, 42);
  const SvdResult f = svd(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(m.transpose() * m);
  Vec roots = es.eigenvalues().cwiseSqrt().reverse();
  CHECK(max_diff(roots, f.singular_values) < 1e-8);
}

TEST_CASE("svd rejects non-finite input and negative tolerance") {
  Mat m = Mat::Identity(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(svd(m), DomainError);
  CHECK_THROWS_AS(pinv(m), DomainError);
  CHECK_THROWS_AS(svd(Mat::Identity(2, 2), -1.0), ConfigError);
}

TEST_CASE("pinv examples and Moore-Penrose conditions") {
  CHECK(max_diff(pinv(Mat::Identity(4, 4)), Mat::Identity(4, 4)) < 1e-15);

  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 2.0;
  Mat expected = Mat::Zero(2, 2);
  expected(0, 0) = 0.5;
  CHECK(max_diff(pinv(d), expected) < 1e-15);

  const Mat sq = random_matrix(3, 3, 7);
  CHECK(max_diff(pinv(sq) * sq, Mat::Identity(3, 3)) < 1e-9);

  // Rank-deficient 5x4.
  const Mat m = random_matrix(5, 2, 3) * random_matrix(2, 4, 4);
  const Mat p = pinv(m);
  CHECK(max_diff(m * p * m, m) < 1e-9);
  CHECK(max_diff(p * m * p, p) < 1e-9);
  CHECK(max_diff(m * p, (m * p).transpose()) < 1e-9);
  CHECK(max_diff(p * m, (p * m).transpose()) < 1e-9);
}

TEST_CASE("pinv matches normal equations on full-rank tall matrices") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const Mat m = random_matrix(7, 3, seed);
    const Mat normal = (m.transpose() * m).inverse() * m.transpose();
    CHECK(max_diff(pinv(m), normal) < 1e-8);
  }
}

TEST_CASE("matexp examples") {
  CHECK(max_diff(matexp(Mat::Zero(3, 3)), Mat::Identity(3, 3)) < 1e-15);

  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = -1.0;
  Mat e = Mat::Zero(2, 2);
  e(0, 0) = std::exp(1.0);
  e(1, 1) = std::exp(-1.0);
  CHECK(max_diff(matexp(d), e) < 1e-14);

  Mat nil(2, 2);
  nil << 0, 1, 0, 0;
  Mat expected(2, 2);
  expected << 1, 1, 0, 1;
  CHECK(max_diff(matexp(nil), expected) < 1e-15);
}

TEST_CASE("matexp agrees with a long Taylor series and inverts") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Mat m = random_matrix(4, 4, seed);
    m *= 2.0 / m.norm();  // ||M|| = 2 keeps the Taylor oracle well inside double range
    const Mat ref = trainflow::testing::taylor_exp(m);
    CHECK((matexp(m) - ref).norm() / ref.norm() < 1e-12);

    Mat big = random_matrix(5, 5, seed + 100);
    big *= 5.0 / big.norm();
    CHECK(max_diff(matexp(big) * matexp(-big), Mat::Identity(5, 5)) < 1e-8);
  }
}

TEST_CASE("matexp relative accuracy for norms up to 10") {
  // Similarity to a known diagonal keeps an exact reference available.
  const Mat p = random_matrix(4, 4, 77) + 4.0 * Mat::Identity(4, 4);
  const Mat p_inv = p.inverse();
  Vec lambdas(4);
  lambdas << -6.0, -2.5, 1.0, 3.0;
  const Mat m = p * lambdas.asDiagonal() * p_inv;
  REQUIRE(m.norm() < 20.0);
  const Mat ref = p * lambdas.array().exp().matrix().asDiagonal() * p_inv;
  CHECK((matexp(m) - ref).norm() / ref.norm() < 1e-10);
}

TEST_CASE("matexp rejects non-square input") {
  CHECK_THROWS_AS(matexp(Mat::Zero(2, 3)), DimensionError);
}

TEST_CASE("eig examples") {
  Mat rot(2, 2);
  rot << 0, 1, -1, 0;
  const ComplexList r = eig(rot);
  REQUIRE(r.size() == 2);
  CHECK(std::abs(r[0] - Complex(0, -1)) < 1e-14);
  CHECK(std::abs(r[1] - Complex(0, 1)) < 1e-14);

  Mat upper(3, 3);
  upper << 3, 1, 2, 0, -1, 5, 0, 0, 0.5;
  const ComplexList u = eig(upper);
  CHECK(std::abs(u[0] - Complex(-1, 0)) < 1e-12);
  CHECK(std::abs(u[1] - Complex(0.5, 0)) < 1e-12);
  CHECK(std::abs(u[2] - Complex(3, 0)) < 1e-12);

  // Companion matrix of x^2 - x - 1; roots from the quadratic formula.
  Mat companion(2, 2);
  companion << 1, 1, 1, 0;
  const ComplexList c = eig(companion);
  const double s5 = std::sqrt(5.0);
  CHECK(std::abs(c[0].real() - (1 - s5) / 2) < 1e-10);
  CHECK(std::abs(c[1].real() - (1 + s5) / 2) < 1e-10);
}

TEST_CASE("eig output is sorted and closed under conjugation") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mat m = random_matrix(7, 7, seed);
    const ComplexList values = eig(m);
    REQUIRE(values.size() == 7);
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      CHECK((values[i].real() < values[i + 1].real() ||
             (values[i].real() == values[i + 1].real() &&
              values[i].imag() <= values[i + 1].imag())));
    }
    for (const Complex& z : values) {
      double best = 1e300;
      for (const Complex& w : values) best = std::min(best, std::abs(w - std::conj(z)));
      CHECK(best < 1e-10);
    }
  }
}

TEST_CASE("eigenvalues are similarity invariant") {
  const Mat m = random_matrix(5, 5, 3);
  const Mat p = random_matrix(5, 5, 4) + 5.0 * Mat::Identity(5, 5);
  const ComplexList a = eig(m);
  const ComplexList b = eig(p.inverse() * m * p);
  // Multiset comparison: each eigenvalue of one has a partner in the other.
  for (const Complex& z : a) {
    double best = 1e300;
    for (const Complex& w : b) best = std::min(best, std::abs(w - z));
    CHECK(best < 1e-8);
  }
}

TEST_CASE("eig rejects non-square input") {
  CHECK_THROWS_AS(eig(Mat::Zero(3, 2)), DimensionError);
  CHECK_THROWS_AS(spectral_radius(Mat::Zero(3, 2)), DimensionError);
}

TEST_CASE("spectral radius examples") {
  CHECK(spectral_radius(0.5 * Mat::Identity(3, 3)) == doctest::Approx(0.5));
  Mat nil(2, 2);
  nil << 0, 2, 0, 0;
  CHECK(spectral_radius(nil) == 0.0);
}

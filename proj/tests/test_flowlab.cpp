// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "test_support.hpp"
#include "trainflow/errors.hpp"
#include "trainflow/flowlab.hpp"
#include "trainflow/sysgen.hpp"

using namespace trainflow;
using namespace trainflow::flowlab;
using trainflow::testing::max_diff;
using trainflow::testing::random_matrix;

namespace {

SnapshotData discrete_data(const Mat& a, const Mat& x) {
  SnapshotData d;
  d.x = x;
  d.xsharp = a * x;
  return d;
}

SnapshotData euler_data(const Mat& a, const Mat& x, double dt) {
  SnapshotData d;
  d.x = x;
  d.xsharp = x + dt * a * x;
  d.dt = dt;
  return d;
}

// Element-wise loops; shares no code with the library.
double naive_loss(const Mat& ahat, const Mat& x, const Mat& xsharp) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  double total = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double pred = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) pred += ahat(i, k) * x(k, j);
      total += (xsharp(i, j) - pred) * (xsharp(i, j) - pred);
    }
  }
  return total / (2.0 * static_cast<double>(m * n));
}

template <class Loss>
Mat central_difference(const Mat& ahat, Loss loss, double h) {
  Mat g(ahat.rows(), ahat.cols());
  for (Eigen::Index i = 0; i < ahat.rows(); ++i) {
    for (Eigen::Index j = 0; j < ahat.cols(); ++j) {
      Mat up = ahat, down = ahat;
      up(i, j) += h;
      down(i, j) -= h;
      g(i, j) = (loss(up) - loss(down)) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace

TEST_CASE("pseudo-time") {
  CHECK(PseudoTime(2.5).value() == 2.5);
  CHECK_FALSE(PseudoTime(0.0).is_infinite());
  CHECK(PseudoTime::infinity().is_infinite());
  CHECK_THROWS_AS(PseudoTime::infinity().value(), std::logic_error);
  CHECK_THROWS_AS(PseudoTime(-1.0), ConfigError);
  CHECK_THROWS_AS(PseudoTime(std::numeric_limits<double>::infinity()), ConfigError);
}

TEST_CASE("discrete loss and gradient against naive loops and finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Mat a = random_matrix(4, 4, seed, 0.5);
    const Mat x = random_matrix(4, 9, seed + 100);
    const SnapshotData d = discrete_data(a, x);
    const Mat ahat = random_matrix(4, 4, seed + 200, 0.5);
    CHECK(loss_discrete(ahat, d) == doctest::Approx(naive_loss(ahat, d.x, d.xsharp)).epsilon(1e-12));
    CHECK(loss_discrete(a, d) < 1e-28);
    const Mat fd = central_difference(
        ahat, [&](const Mat& m) { return naive_loss(m, d.x, d.xsharp); }, 1e-5);
    CHECK((grad_discrete(ahat, d) - fd).norm() / fd.norm() < 1e-8);
  }
}

TEST_CASE("Euler loss and gradient against finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double dt = 0.05;
    const Mat a = random_matrix(3, 3, seed);
    const SnapshotData d = euler_data(a, random_matrix(3, 7, seed + 1), dt);
    const Mat ahat = random_matrix(3, 3, seed + 2);
    const Mat target = d.xsharp;
    const auto naive = [&](const Mat& m) {
      return naive_loss(Mat::Identity(3, 3) + dt * m, d.x, target);
    };
    CHECK(loss_continuous_euler(ahat, d) == doctest::Approx(naive(ahat)).epsilon(1e-12));
    const Mat fd = central_difference(ahat, naive, 1e-4);
    CHECK((grad_continuous_euler(ahat, d) - fd).norm() / fd.norm() < 1e-7);
  }
}

TEST_CASE("loss preconditions") {
  const SnapshotData d = discrete_data(Mat::Identity(3, 3), random_matrix(3, 4, 0));
  CHECK_THROWS_AS(loss_discrete(Mat::Zero(2, 2), d), DimensionError);
  CHECK_THROWS_AS(loss_continuous_euler(Mat::Zero(3, 3), d), ConfigError);
  CHECK_THROWS_AS(fd_grad_exact(Mat::Zero(3, 3), euler_data(Mat::Zero(3, 3), d.x, 0.1), 0.0),
                  ConfigError);
}

TEST_CASE("exact continuous loss vanishes at the generator and its gradient is small nearby") {
  const Mat a = random_matrix(3, 3, 4, 0.4);
  const sysgen::SnapshotData d =
      sysgen::continuous_pairs(a, 0.1, random_matrix(3, 5, 5), 3, sysgen::Propagator::exact);
  CHECK(loss_continuous_exact(a, d) < 1e-25);
  CHECK(fd_grad_exact(a, d, 1e-4).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(loss_continuous_exact(a + Mat::Constant(3, 3, 0.1), d) > 1e-6);
}

TEST_CASE("curvature is the top Hessian eigenvalue") {
  const Mat x = random_matrix(3, 6, 8);
  const SnapshotData d = euler_data(Mat::Zero(3, 3), x, 0.2);
  Eigen::SelfAdjointEigenSolver<Mat> es(x * x.transpose() / 18.0);
  CHECK(curvature(d, LossKind::discrete) == doctest::Approx(es.eigenvalues().maxCoeff()));
  CHECK(curvature(d, LossKind::continuous_euler) ==
        doctest::Approx(0.04 * es.eigenvalues().maxCoeff()));
}

TEST_CASE("gradient descent matches an explicit loop over the library gradient") {
  const Mat a = random_matrix(3, 3, 1, 0.5);
  const SnapshotData d = discrete_data(a, random_matrix(3, 10, 2));
  const Mat ahat0 = random_matrix(3, 3, 3, 0.3);
  const TrainConfig cfg{0.05, 37, 10};
  const FlowResult r = gd_train(ahat0, d, cfg, LossKind::discrete);

  Mat ahat = ahat0;
  for (int k = 0; k < 37; ++k) ahat -= 0.05 * grad_discrete(ahat, d);
  CHECK(max_diff(r.final, ahat) < 1e-13);

  REQUIRE(r.checkpoints.size() == 5);  // steps 0, 10, 20, 30, 37
  CHECK(r.checkpoints.front().tau == 0.0);
  CHECK(r.checkpoints.back().tau == doctest::Approx(37 * 0.05));
  for (std::size_t i = 1; i < r.checkpoints.size(); ++i) {
    CHECK(r.checkpoints[i].tau > r.checkpoints[i - 1].tau);
    CHECK(r.checkpoints[i].loss <= r.checkpoints[i - 1].loss);
  }
  CHECK(r.warnings.empty());
}

TEST_CASE("gradient descent warns and diverges above the stability limit") {
  const SnapshotData d = discrete_data(Mat::Identity(3, 3), 10.0 * random_matrix(3, 10, 2));
  const double lr = 3.0 / curvature(d, LossKind::discrete);
  CHECK_THROWS_AS(gd_train(Mat::Zero(3, 3), d, {lr, 5000, 100}, LossKind::discrete),
                  DivergenceError);
  try {
    gd_train(Mat::Zero(3, 3), d, {lr, 5000, 100}, LossKind::discrete);
  } catch (const DivergenceError& e) {
    CHECK(e.step() > 1);
  }
  const FlowResult short_run = gd_train(Mat::Zero(3, 3), d, {lr, 2, 1}, LossKind::discrete);
  CHECK(short_run.warnings.size() == 1);
  CHECK_THROWS_AS(gd_train(Mat::Zero(3, 3), d, {-1.0, 5, 1}, LossKind::discrete), ConfigError);
}

TEST_CASE("clean closed form: endpoints, ODE and frozen unlearnable columns") {
  const int n = 5;
  const Mat a = random_matrix(n, n, 11, 0.4);
  const Mat u = sysgen::random_orthogonal(n, 12);
  const Mat x = u.leftCols(3) * random_matrix(3, 20, 13);  // rank 3
  const Mat ahat0 = random_matrix(n, n, 14, 0.4);
  const SnapshotData d = discrete_data(a, x);

  CHECK(max_diff(flow_closed_discrete(ahat0, a, x, PseudoTime(0.0)), ahat0) < 1e-14);

  // dAhat/dtau = -grad(Ahat).
  const double tau = 2.0, h = 1e-4;
  const Mat deriv = (flow_closed_discrete(ahat0, a, x, PseudoTime(tau + h)) -
                     flow_closed_discrete(ahat0, a, x, PseudoTime(tau - h))) /
                    (2 * h);
  const Mat grad = grad_discrete(flow_closed_discrete(ahat0, a, x, PseudoTime(tau)), d);
  CHECK((deriv + grad).norm() / grad.norm() < 1e-6);

  const Mat inf = flow_closed_discrete(ahat0, a, x, PseudoTime::infinity());
  CHECK(max_diff(inf * u.leftCols(3), a * u.leftCols(3)) < 1e-10);
  CHECK(max_diff(inf * u.rightCols(2), ahat0 * u.rightCols(2)) < 1e-10);
  // Finite tau columns in the null space never move.
  const Mat mid = flow_closed_discrete(ahat0, a, x, PseudoTime(0.7));
  CHECK(max_diff(mid * u.rightCols(2), ahat0 * u.rightCols(2)) < 1e-12);
}

TEST_CASE("closed forms agree with small-step gradient descent") {
  const Mat a = random_matrix(3, 3, 21, 0.5);
  const Mat x = random_matrix(3, 12, 22);
  const Mat ahat0 = random_matrix(3, 3, 23, 0.3);
  const double lr = 1e-3;
  const long steps = 2000;

  const FlowResult disc = gd_train(ahat0, discrete_data(a, x), {lr, steps, steps},
                                   LossKind::discrete);
  const Mat closed = flow_closed_discrete(ahat0, a, x, PseudoTime(lr * steps));
  CHECK(max_diff(disc.final, closed) < 1e-3 * a.norm());

  const double dt = 0.5;
  const FlowResult cont = gd_train(ahat0, euler_data(a, x, dt), {lr, steps, steps},
                                   LossKind::continuous_euler);
  const Mat closed_c = flow_closed_continuous(ahat0, a, x, dt, PseudoTime(lr * steps));
  CHECK(max_diff(cont.final, closed_c) < 1e-3 * a.norm());
}

TEST_CASE("noisy closed form solves the flow and converges to least squares") {
  const int n = 4;
  const Mat a = random_matrix(n, n, 31, 0.4);
  const Mat x = sysgen::random_orthogonal(n, 32).leftCols(2) * random_matrix(2, 50, 33);
  const Mat noise = 0.3 * random_matrix(n, 50, 34);
  const Mat noise_sharp = 0.3 * random_matrix(n, 50, 35);
  const Mat ahat0 = random_matrix(n, n, 36, 0.3);

  SnapshotData noisy;
  noisy.x = x + noise;
  noisy.xsharp = a * x + noise_sharp;

  CHECK(max_diff(flow_closed_discrete_noisy(ahat0, a, x, noise, noise_sharp, PseudoTime(0.0)),
                 ahat0) < 1e-13);
  const double tau = 3.0, h = 1e-4;
  const auto at = [&](double t) {
    return flow_closed_discrete_noisy(ahat0, a, x, noise, noise_sharp, PseudoTime(t));
  };
  const Mat deriv = (at(tau + h) - at(tau - h)) / (2 * h);
  const Mat grad = grad_discrete(at(tau), noisy);
  CHECK((deriv + grad).norm() / grad.norm() < 1e-6);

  const Mat inf = flow_closed_discrete_noisy(ahat0, a, x, noise, noise_sharp,
                                             PseudoTime::infinity());
  const Mat lstsq = noisy.xsharp * matcore::pinv(noisy.x);
  CHECK(max_diff(inf, lstsq) < 1e-9);
  CHECK(max_diff(at(1e6), inf) < 1e-8);
}

TEST_CASE("continuous noisy closed form matches least squares on Euler data") {
  const int n = 3;
  const double dt = 0.1;
  const Mat a = random_matrix(n, n, 41, 0.5);
  const Mat x = random_matrix(n, 30, 42);
  const Mat noise = 0.2 * random_matrix(n, 30, 43);
  const Mat noise_sharp = 0.2 * random_matrix(n, 30, 44);
  const Mat y = x + noise;
  const Mat ysharp = x + dt * a * x + noise_sharp;
  const Mat lstsq = (ysharp - y) * matcore::pinv(y) / dt;
  const Mat inf = flow_closed_continuous_noisy(Mat::Zero(n, n), a, x, noise, noise_sharp, dt,
                                               PseudoTime::infinity());
  CHECK(max_diff(inf, lstsq) < 1e-9);

  SnapshotData noisy;
  noisy.x = y;
  noisy.xsharp = ysharp;
  noisy.dt = dt;
  const FlowResult gd =
      gd_train(Mat::Zero(n, n), noisy, {1.0, 4000, 4000}, LossKind::continuous_euler);
  const Mat closed = flow_closed_continuous_noisy(Mat::Zero(n, n), a, x, noise, noise_sharp, dt,
                                                  PseudoTime(4000.0));
  CHECK(max_diff(gd.final, closed) < 1e-3 * a.norm());
}

TEST_CASE("noiseless noisy closed form reduces to the clean one when X has full rank") {
  const Mat a = random_matrix(3, 3, 51, 0.5);
  const Mat x = random_matrix(3, 8, 52);
  const Mat z = Mat::Zero(3, 8);
  const Mat ahat0 = random_matrix(3, 3, 53);
  for (double t : {0.0, 0.5, 5.0}) {
    CHECK(max_diff(flow_closed_discrete_noisy(ahat0, a, x, z, z, PseudoTime(t)),
                   flow_closed_discrete(ahat0, a, x, PseudoTime(t))) < 1e-12);
  }
}

TEST_CASE("singular noisy data are rejected") {
  const Mat a = Mat::Identity(3, 3);
  const Mat x = sysgen::random_orthogonal(3, 1).leftCols(2) * random_matrix(2, 10, 2);
  const Mat z = Mat::Zero(3, 10);
  CHECK_THROWS_AS(flow_closed_discrete_noisy(a, a, x, z, z, PseudoTime(1.0)), SingularityError);
  try {
    flow_closed_continuous_noisy(a, a, x, z, z, 0.1, PseudoTime::infinity());
    FAIL("expected SingularityError");
  } catch (const SingularityError& e) {
    CHECK(std::abs(e.smallest_eigenvalue()) < 1e-10);
  }
}

TEST_CASE("bias prediction examples") {
  Mat atilde(2, 2);
  atilde << 0.8, 0.1, -0.2, 0.5;
  Vec s(2);
  s << 10.0, 0.0;
  // m sigma^2 = 100 * 0.01 = 1, so the factor is 100 / 101.
  const BiasPrediction p = predict_bias_discrete(atilde, s, 100, 0.01);
  CHECK(p.multiplicative_factors(0) == doctest::Approx(100.0 / 101.0));
  CHECK(p.multiplicative_factors(1) == 0.0);
  CHECK(p.snr(0) == doctest::Approx(100.0));
  CHECK(p.additive_diagonal.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.predicted_atilde(1, 0) == doctest::Approx(-0.2 * 100.0 / 101.0));
  CHECK(p.predicted_atilde(0, 1) == 0.0);

  const BiasPrediction c = predict_bias_continuous(atilde, s, 100, 0.01, 0.1);
  CHECK(c.additive_diagonal(0) == doctest::Approx(-10.0 / 101.0));
  CHECK(c.additive_diagonal(1) == doctest::Approx(-10.0));
  CHECK(c.predicted_atilde(1, 1) == doctest::Approx(-10.0));

  const BiasPrediction clean = predict_bias_continuous(atilde, s, 100, 0.0, 0.1);
  CHECK(clean.multiplicative_factors(0) == 1.0);
  CHECK(clean.additive_diagonal(0) == 0.0);
  CHECK(clean.additive_diagonal(1) == doctest::Approx(-10.0));
  CHECK(std::isinf(clean.snr(0)));
}

TEST_CASE("bias factors lie in [0, 1] and grow with signal energy") {
  const Mat atilde = random_matrix(5, 5, 1);
  Vec s(5);
  s << 30.0, 10.0, 3.0, 1.0, 0.3;
  for (double sigma2 : {1e-4, 1e-2, 1.0}) {
    const BiasPrediction p = predict_bias_discrete(atilde, s, 50, sigma2);
    for (int i = 0; i < 5; ++i) {
      CHECK(p.multiplicative_factors(i) > 0.0);
      CHECK(p.multiplicative_factors(i) < 1.0);
      if (i > 0) CHECK(p.multiplicative_factors(i) < p.multiplicative_factors(i - 1));
    }
  }
  CHECK_THROWS_AS(predict_bias_discrete(atilde, Vec::Ones(6), 10, 0.1), DimensionError);
  CHECK_THROWS_AS(predict_bias_discrete(atilde, s, 10, -0.1), ConfigError);
  CHECK_THROWS_AS(predict_bias_continuous(atilde, s, 10, 0.1, 0.0), ConfigError);
}

TEST_CASE("unlearnable decay rate") {
  CHECK(unlearnable_decay_rate(0.04, 4) == doctest::Approx(0.01));
  CHECK(unlearnable_decay_rate(0.0, 3) == 0.0);
  CHECK_THROWS_AS(unlearnable_decay_rate(0.1, 0), ConfigError);
}

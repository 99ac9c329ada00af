// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "trainflow/flowlab.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "trainflow/errors.hpp"

namespace trainflow::flowlab {

PseudoTime::PseudoTime(double tau) : tau_(tau), infinite_(false) {
  if (!(tau >= 0.0) || std::isinf(tau)) {
    throw ConfigError(fmt::format("pseudo-time must be finite and >= 0, got {}", tau));
  }
}

double PseudoTime::value() const {
  if (infinite_) throw std::logic_error("PseudoTime::value called on infinity");
  return tau_;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError(fmt::format("learning rate must be positive, got {}", learning_rate));
  }
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
}

namespace {

double scale(const SnapshotData& data) {
  return 1.0 / (static_cast<double>(data.m()) * static_cast<double>(data.n()));
}

void check_operator(const Mat& ahat, const SnapshotData& data, const char* what) {
  data.validate();
  if (ahat.rows() != data.n() || ahat.cols() != data.n()) {
    throw DimensionError(fmt::format("{}: operator is {}x{} but the state dimension is {}",
                                     what, ahat.rows(), ahat.cols(), data.n()));
  }
}

double require_dt(const SnapshotData& data, const char* what) {
  if (!data.dt) throw ConfigError(fmt::format("{}: data carry no dt (discrete-time data)", what));
  return *data.dt;
}

Mat euler_residual(const Mat& ahat, const SnapshotData& data, double dt) {
  return data.xsharp - data.x - dt * (ahat * data.x);
}

// exp(-C tau) at finite tau, or the projector onto ker(C) at infinity.
Mat decay_factor(const Mat& x, double rate_scale, PseudoTime tau) {
  const Eigen::Index n = x.rows();
  if (tau.is_infinite()) {
    const matcore::SvdResult f = matcore::svd(x);
    const Mat u1 = f.range_basis();
    return Mat::Identity(n, n) - u1 * u1.transpose();
  }
  return matcore::matexp(-(x * x.transpose()) * (rate_scale * tau.value()));
}

void check_flow_inputs(const Mat& ahat0, const Mat& a, const Mat& x, const char* what) {
  matcore::require_square(a, what);
  if (ahat0.rows() != a.rows() || ahat0.cols() != a.cols() || x.rows() != a.rows()) {
    throw DimensionError(fmt::format("{}: inconsistent dimensions (Ahat0 {}x{}, A {}x{}, X {}x{})",
                                     what, ahat0.rows(), ahat0.cols(), a.rows(), a.cols(),
                                     x.rows(), x.cols()));
  }
  if (x.cols() < 1) throw DimensionError(fmt::format("{}: X has no columns", what));
  matcore::require_finite(ahat0, what);
  matcore::require_finite(a, what);
  matcore::require_finite(x, what);
}

// E(tau) = E0 e^{-K tau} + S K^{-1} (I - e^{-K tau}) with K = decay * G.
Mat noisy_flow(const Mat& ahat0, const Mat& a, const Mat& y, const Mat& source, double decay,
               PseudoTime tau, const char* what) {
  const Eigen::Index n = a.rows();
  const double mn = static_cast<double>(y.cols()) * static_cast<double>(n);
  const Mat gram = (y * y.transpose()) / mn;

  Eigen::SelfAdjointEigenSolver<Mat> spectrum(gram, Eigen::EigenvaluesOnly);
  const double lo = spectrum.eigenvalues().minCoeff();
  const double hi = spectrum.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * hi)) {
    throw SingularityError(
        fmt::format("{}: (X+N)(X+N)^T is singular (smallest eigenvalue {:.3e}, largest {:.3e})",
                    what, lo, hi),
        lo * mn);
  }

  const Mat k = decay * gram;
  // S K^{-1} = (K^{-1} S^T)^T since K is symmetric.
  const Mat steady = Eigen::LDLT<Mat>(k).solve(source.transpose()).transpose();
  if (tau.is_infinite()) return a + steady;

  const Mat e = matcore::matexp(-k * tau.value());
  const Mat identity = Mat::Identity(n, n);
  return a + (ahat0 - a) * e + steady * (identity - e);
}

void check_noise(const Mat& x, const Mat& n, const Mat& nsharp, const char* what) {
  if (n.rows() != x.rows() || n.cols() != x.cols() || nsharp.rows() != x.rows() ||
      nsharp.cols() != x.cols()) {
    throw DimensionError(fmt::format("{}: noise matrices must match X ({}x{})", what,
                                     x.rows(), x.cols()));
  }
  matcore::require_finite(n, what);
  matcore::require_finite(nsharp, what);
}

}  // namespace

double loss_discrete(const Mat& ahat, const SnapshotData& data) {
  check_operator(ahat, data, "loss_discrete");
  return 0.5 * scale(data) * (data.xsharp - ahat * data.x).squaredNorm();
}

Mat grad_discrete(const Mat& ahat, const SnapshotData& data) {
  check_operator(ahat, data, "grad_discrete");
  return -scale(data) * (data.xsharp - ahat * data.x) * data.x.transpose();
}

double loss_continuous_euler(const Mat& ahat, const SnapshotData& data) {
  check_operator(ahat, data, "loss_continuous_euler");
  const double dt = require_dt(data, "loss_continuous_euler");
  return 0.5 * scale(data) * euler_residual(ahat, data, dt).squaredNorm();
}

Mat grad_continuous_euler(const Mat& ahat, const SnapshotData& data) {
  check_operator(ahat, data, "grad_continuous_euler");
  const double dt = require_dt(data, "grad_continuous_euler");
  return -(dt * scale(data)) * euler_residual(ahat, data, dt) * data.x.transpose();
}

double loss_continuous_exact(const Mat& ahat, const SnapshotData& data) {
  check_operator(ahat, data, "loss_continuous_exact");
  const double dt = require_dt(data, "loss_continuous_exact");
  return 0.5 * scale(data) * (data.xsharp - matcore::matexp(ahat * dt) * data.x).squaredNorm();
}

Mat fd_grad_exact(const Mat& ahat, const SnapshotData& data, double h) {
  check_operator(ahat, data, "fd_grad_exact");
  require_dt(data, "fd_grad_exact");
  if (!(h > 0.0)) throw ConfigError(fmt::format("finite-difference step must be > 0, got {}", h));
  Mat grad(ahat.rows(), ahat.cols());
  Mat probe = ahat;
  for (Eigen::Index j = 0; j < ahat.cols(); ++j) {
    for (Eigen::Index i = 0; i < ahat.rows(); ++i) {
      const double saved = probe(i, j);
      probe(i, j) = saved + h;
      const double up = loss_continuous_exact(probe, data);
      probe(i, j) = saved - h;
      const double down = loss_continuous_exact(probe, data);
      probe(i, j) = saved;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

double curvature(const SnapshotData& data, LossKind kind) {
  data.validate();
  const Mat gram = scale(data) * (data.x * data.x.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> spectrum(gram, Eigen::EigenvaluesOnly);
  double lambda = spectrum.eigenvalues().maxCoeff();
  if (kind == LossKind::continuous_euler) {
    const double dt = require_dt(data, "curvature");
    lambda *= dt * dt;
  }
  return lambda;
}

FlowResult gd_train(const Mat& ahat0, const SnapshotData& data, const TrainConfig& config,
                    LossKind kind) {
  config.validate();
  check_operator(ahat0, data, "gd_train");
  matcore::require_finite(ahat0, "gd_train");
  const bool euler = kind == LossKind::continuous_euler;
  const double dt = euler ? require_dt(data, "gd_train") : 1.0;

  FlowResult result;
  const double stiffness = config.learning_rate * curvature(data, kind);
  if (stiffness >= 2.0) {
    result.warnings.push_back(fmt::format(
        "learning rate {} times curvature is {:.4g} >= 2; gradient descent is unstable",
        config.learning_rate, stiffness));
  }

  // The gradient is affine in Ahat: grad = (dt^2 Ahat C - dt B) / (mn) with
  // C = X X^T and B = (X# - X) X^T (Euler) or X# X^T (discrete).
  const double s = scale(data);
  const Mat c = data.x * data.x.transpose();
  const Mat target = euler ? Mat(data.xsharp - data.x) : data.xsharp;
  const Mat b = target * data.x.transpose();
  const double target_energy = target.squaredNorm();
  const auto loss_of = [&](const Mat& ahat) {
    return euler ? loss_continuous_euler(ahat, data) : loss_discrete(ahat, data);
  };
  // Cheap Gram-form loss used for the per-step divergence guard.
  const auto quick_loss = [&](const Mat& ahat) {
    const Mat scaled = dt * ahat;
    return 0.5 * s *
           (target_energy - 2.0 * (scaled.cwiseProduct(b)).sum() +
            (scaled * c).cwiseProduct(scaled).sum());
  };

  Mat ahat = ahat0;
  result.checkpoints.push_back({0.0, ahat, loss_of(ahat)});
  for (long k = 1; k <= config.steps; ++k) {
    const Mat grad = s * (dt * dt * (ahat * c) - dt * b);
    ahat -= config.learning_rate * grad;
    const double guard = quick_loss(ahat);
    if (!std::isfinite(guard) || guard > 1e12 || !ahat.allFinite()) {
      throw DivergenceError(
          fmt::format("gradient descent diverged at step {} (loss {:.3e})", k, guard), k);
    }
    if (k % config.record_every == 0 || k == config.steps) {
      result.checkpoints.push_back(
          {static_cast<double>(k) * config.learning_rate, ahat, loss_of(ahat)});
    }
  }
  result.final = ahat;
  return result;
}

Mat flow_closed_discrete(const Mat& ahat0, const Mat& a, const Mat& x, PseudoTime tau) {
  check_flow_inputs(ahat0, a, x, "flow_closed_discrete");
  const double s = 1.0 / (static_cast<double>(x.cols()) * static_cast<double>(x.rows()));
  return a + (ahat0 - a) * decay_factor(x, s, tau);
}

Mat flow_closed_continuous(const Mat& ahat0, const Mat& a, const Mat& x, double dt,
                           PseudoTime tau) {
  check_flow_inputs(ahat0, a, x, "flow_closed_continuous");
  if (!(dt > 0.0)) throw ConfigError(fmt::format("dt must be positive, got {}", dt));
  const double s = dt * dt / (static_cast<double>(x.cols()) * static_cast<double>(x.rows()));
  return a + (ahat0 - a) * decay_factor(x, s, tau);
}

Mat flow_closed_discrete_noisy(const Mat& ahat0, const Mat& a, const Mat& x, const Mat& n,
                               const Mat& nsharp, PseudoTime tau) {
  constexpr const char* what = "flow_closed_discrete_noisy";
  check_flow_inputs(ahat0, a, x, what);
  check_noise(x, n, nsharp, what);
  const Mat y = x + n;
  const double mn = static_cast<double>(x.cols()) * static_cast<double>(x.rows());
  const Mat source = (nsharp - a * n) * y.transpose() / mn;
  return noisy_flow(ahat0, a, y, source, 1.0, tau, what);
}

Mat flow_closed_continuous_noisy(const Mat& ahat0, const Mat& a, const Mat& x, const Mat& n,
                                 const Mat& nsharp, double dt, PseudoTime tau) {
  constexpr const char* what = "flow_closed_continuous_noisy";
  check_flow_inputs(ahat0, a, x, what);
  check_noise(x, n, nsharp, what);
  if (!(dt > 0.0)) throw ConfigError(fmt::format("dt must be positive, got {}", dt));
  const Eigen::Index dim = a.rows();
  const Mat y = x + n;
  const double mn = static_cast<double>(x.cols()) * static_cast<double>(dim);
  const Mat step = Mat::Identity(dim, dim) + a * dt;
  const Mat source = (dt / mn) * (nsharp - step * n) * y.transpose();
  return noisy_flow(ahat0, a, y, source, dt * dt, tau, what);
}

namespace {

BiasPrediction predict(const Mat& atilde, const Vec& singular_values, long m, double sigma2,
                       const double* dt) {
  matcore::require_square(atilde, "predict_bias");
  const Eigen::Index n = atilde.rows();
  if (singular_values.size() > n) {
    throw DimensionError("predict_bias: more singular values than state dimensions");
  }
  if (!(sigma2 >= 0.0)) throw ConfigError("predict_bias: sigma2 must be >= 0");
  if (m < 1) throw ConfigError("predict_bias: m must be >= 1");

  const double noise_energy = static_cast<double>(m) * sigma2;
  BiasPrediction p;
  p.multiplicative_factors = Vec::Zero(n);
  p.additive_diagonal = Vec::Zero(n);
  p.snr = Vec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = i < singular_values.size() ? singular_values(i) : 0.0;
    const double energy = s > 0.0 ? s * s : 0.0;
    if (energy > 0.0) {
      p.multiplicative_factors(i) = energy / (energy + noise_energy);
      p.snr(i) = noise_energy > 0.0 ? energy / noise_energy
                                    : std::numeric_limits<double>::infinity();
      if (dt) p.additive_diagonal(i) = -(noise_energy / (energy + noise_energy)) / *dt;
    } else if (dt) {
      p.additive_diagonal(i) = -1.0 / *dt;
    }
  }
  p.predicted_atilde = atilde * p.multiplicative_factors.asDiagonal();
  p.predicted_atilde.diagonal() += p.additive_diagonal;
  return p;
}

}  // namespace

BiasPrediction predict_bias_discrete(const Mat& atilde, const Vec& singular_values, long m,
                                     double sigma2) {
  return predict(atilde, singular_values, m, sigma2, nullptr);
}

BiasPrediction predict_bias_continuous(const Mat& atilde, const Vec& singular_values, long m,
                                       double sigma2, double dt) {
  if (!(dt > 0.0)) throw ConfigError(fmt::format("dt must be positive, got {}", dt));
  return predict(atilde, singular_values, m, sigma2, &dt);
}

double unlearnable_decay_rate(double sigma2, long n) {
  if (n < 1) throw ConfigError("unlearnable_decay_rate: n must be >= 1");
  if (!(sigma2 >= 0.0)) throw ConfigError("unlearnable_decay_rate: sigma2 must be >= 0");
  return sigma2 / static_cast<double>(n);
}

}  // namespace trainflow::flowlab

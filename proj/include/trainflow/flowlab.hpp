// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

// Training a single-layer linear model Ahat on snapshot pairs: losses,
// gradients, gradient descent, closed-form gradient-flow solutions (clean
// and noisy, discrete and forward-Euler continuous) and the predicted
// noise-induced bias.

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "trainflow/matcore.hpp"
#include "trainflow/sysgen.hpp"

namespace trainflow::flowlab {

using sysgen::SnapshotData;

/// Gradient-flow pseudo-time.  Infinity is a distinct state, not a large
/// number: closed forms drop the decaying exponential entirely.
class PseudoTime {
 public:
  explicit PseudoTime(double tau);
  static PseudoTime infinity() { return PseudoTime(); }

  bool is_infinite() const { return infinite_; }
  /// Throws std::logic_error when infinite.
  double value() const;

 private:
  PseudoTime() : tau_(std::numeric_limits<double>::infinity()), infinite_(true) {}
  double tau_;
  bool infinite_;
};

enum class LossKind { discrete, continuous_euler };

struct TrainConfig {
  double learning_rate = 1e-3;
  long steps = 1000;
  long record_every = 100;

  void validate() const;
};

struct Checkpoint {
  double tau = 0.0;
  Mat ahat;
  double loss = 0.0;
};

struct FlowResult {
  std::vector<Checkpoint> checkpoints;  // tau strictly increasing, first at tau = 0
  Mat final;
  std::vector<std::string> warnings;
};

/// ||X# - Ahat X||_F^2 / (2 m n).
double loss_discrete(const Mat& ahat, const SnapshotData& data);
/// -(1/mn) (X# - Ahat X) X^T.
Mat grad_discrete(const Mat& ahat, const SnapshotData& data);

/// ||X# - (I + Ahat dt) X||_F^2 / (2 m n).  Requires data.dt.
double loss_continuous_euler(const Mat& ahat, const SnapshotData& data);
/// -(dt/mn) (X# - X - dt Ahat X) X^T.
Mat grad_continuous_euler(const Mat& ahat, const SnapshotData& data);

/// ||X# - exp(Ahat dt) X||_F^2 / (2 m n).
double loss_continuous_exact(const Mat& ahat, const SnapshotData& data);
/// Central differences of loss_continuous_exact with step h, entry by entry.
/// A validation oracle only; there is no training path through it.
Mat fd_grad_exact(const Mat& ahat, const SnapshotData& data, double h);

/// Largest eigenvalue of the Hessian of the chosen loss (X X^T/(mn), times
/// dt^2 for the Euler loss).  Gradient descent is stable for lr < 2 / this.
double curvature(const SnapshotData& data, LossKind kind);

/// Plain gradient descent Ahat <- Ahat - lr * grad.  Checkpoints are taken at
/// step 0, every `record_every` steps and at the final step, with tau = k lr.
/// Throws DivergenceError when the loss exceeds 1e12 or turns non-finite.
FlowResult gd_train(const Mat& ahat0, const SnapshotData& data, const TrainConfig& config,
                    LossKind kind);

/// Ahat(tau) = A + (Ahat0 - A) exp(-X X^T tau / (mn)).  At infinity the
/// exponential becomes the projector onto the null space of X^T, so columns
/// outside the range of X keep their initial values.
Mat flow_closed_discrete(const Mat& ahat0, const Mat& a, const Mat& x, PseudoTime tau);

/// Euler-consistent clean continuous flow: the decay rate carries dt^2.
Mat flow_closed_continuous(const Mat& ahat0, const Mat& a, const Mat& x, double dt,
                           PseudoTime tau);

/// Gradient flow on noisy data (X + N, A X + N#).  With Y = X + N and
/// G = Y Y^T/(mn), S = (N# - A N) Y^T/(mn):
///   Ahat(tau) = A + (Ahat0 - A) e^{-G tau} + S G^{-1} (I - e^{-G tau}).
/// Throws SingularityError when lambda_min(G) <= 1e-12 lambda_max(G).
Mat flow_closed_discrete_noisy(const Mat& ahat0, const Mat& a, const Mat& x, const Mat& n,
                               const Mat& nsharp, PseudoTime tau);

/// Continuous counterpart on Euler data (X + N, (I + A dt) X + N#): decay
/// matrix dt^2 G and source (dt/mn) (N# - (I + A dt) N) Y^T.
Mat flow_closed_continuous_noisy(const Mat& ahat0, const Mat& a, const Mat& x, const Mat& n,
                                 const Mat& nsharp, double dt, PseudoTime tau);

struct BiasPrediction {
  Vec multiplicative_factors;  // sigma_i^2 / (sigma_i^2 + m sigma^2), 0 where sigma_i = 0
  Vec additive_diagonal;       // zero for discrete systems
  Vec snr;                     // sigma_i^2 / (m sigma^2)
  Mat predicted_atilde;        // Atilde diag(factors) + diag(additive)
};

/// Expected tau = infinity operator in the left-singular basis of the clean
/// data.  `singular_values` may be shorter than n; missing entries and
/// non-positive ones count as zero-energy directions.
BiasPrediction predict_bias_discrete(const Mat& atilde, const Vec& singular_values, long m,
                                     double sigma2);

/// Adds the -(1/dt) m sigma^2 / (sigma_i^2 + m sigma^2) diagonal, which is
/// -1/dt in zero-energy directions.
BiasPrediction predict_bias_continuous(const Mat& atilde, const Vec& singular_values, long m,
                                       double sigma2, double dt);

/// sigma^2 / n: expected rate at which noise erases the initialization in
/// zero-energy directions.
double unlearnable_decay_rate(double sigma2, long n);

}  // namespace trainflow::flowlab

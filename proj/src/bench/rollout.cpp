// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "trainflow/bench.hpp"
#include "trainflow/errors.hpp"

namespace trainflow::bench {

RolloutResult rollout(const Mat& ahat, const Vec& x0, long steps, RolloutMode mode,
                      std::optional<double> dt, double bound) {
  matcore::require_square(ahat, "rollout");
  if (x0.size() != ahat.rows()) {
    throw DimensionError(fmt::format("rollout: x0 has length {}, operator is {}x{}", x0.size(),
                                     ahat.rows(), ahat.cols()));
  }
  if (!(bound > 0.0)) throw ConfigError("rollout: bound must be > 0");
  if (steps < 0) throw ConfigError("rollout: steps must be >= 0");
  Mat step = ahat;
  if (mode == RolloutMode::continuous_euler) {
    if (!dt || !(*dt > 0.0)) throw ConfigError("rollout: continuous mode needs dt > 0");
    step = Mat::Identity(ahat.rows(), ahat.cols()) + ahat * *dt;
  }

  RolloutResult result;
  const double limit = bound * x0.norm();
  Vec x = x0;
  result.trajectory.push_back({0, x.norm(), x});
  for (long k = 1; k <= steps; ++k) {
    x = step * x;
    const double norm = x.norm();
    result.trajectory.push_back({k, norm, x});
    if (!(norm <= limit)) {
      result.diverged = true;
      result.diverged_step = k;
      break;
    }
  }
  return result;
}

bool is_stable_discrete(const ComplexList& eigenvalues) {
  for (const Complex& z : eigenvalues)
    if (!(std::abs(z) < 1.0 - 1e-9)) return false;
  return true;
}

bool is_stable_continuous(const ComplexList& eigenvalues) {
  for (const Complex& z : eigenvalues)
    if (!(z.real() < -1e-9)) return false;
  return true;
}

bool is_stable_euler(const ComplexList& eigenvalues, double dt) {
  for (const Complex& z : eigenvalues)
    if (!(std::abs(1.0 + z * dt) < 1.0)) return false;
  return true;
}

}  // namespace trainflow::bench

namespace trainflow::bench {

namespace {

// Permutation of b minimizing the worst-case distance to a.
std::vector<std::size_t> best_assignment(const ComplexList& a, const ComplexList& b) {
  const std::size_t n = a.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  if (n > 8) {
    std::vector<bool> used(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (!used[j] && (best == n || std::abs(a[i] - b[j]) < std::abs(a[i] - b[best]))) best = j;
      }
      used[best] = true;
      perm[i] = best;
    }
    return perm;
  }
  std::vector<std::size_t> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  double best_sum = best_cost;
  do {
    double cost = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::abs(a[i] - b[perm[i]]);
      cost = std::max(cost, d);
      sum += d;
    }
    if (cost < best_cost || (cost == best_cost && sum < best_sum)) {
      best_cost = cost;
      best_sum = sum;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

double max_matched_distance(const ComplexList& a, const ComplexList& b) {
  if (a.size() != b.size()) throw DimensionError("max_matched_distance: lists differ in length");
  const auto perm = best_assignment(a, b);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[perm[i]]));
  return worst;
}

ComplexList track_eigenvalues(const ComplexList& previous, const ComplexList& current) {
  if (previous.size() != current.size()) {
    throw DimensionError("track_eigenvalues: lists differ in length");
  }
  const auto perm = best_assignment(previous, current);
  ComplexList out(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) out[i] = current[perm[i]];
  return out;
}

}  // namespace trainflow::bench

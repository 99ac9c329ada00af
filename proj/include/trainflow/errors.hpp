// Copyright 2026 The trainflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace trainflow {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or parameter value (negative sigma, dt <= 0, n < 2, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation (non-finite
/// entries, eigenvalue lists not closed under conjugation, degenerate data).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: non-convergence, singular systems, blowup.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public NumericalError {
 public:
  SingularityError(const std::string& what, double smallest_eigenvalue)
      : NumericalError(what), smallest_eigenvalue_(smallest_eigenvalue) {}
  double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

 private:
  double smallest_eigenvalue_;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long step)
      : NumericalError(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace trainflow

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedfisher {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when two operands disagree on the parameter dimension.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A Gram matrix (or other system matrix) that is too ill-conditioned to solve.
class SingularDesign : public std::runtime_error {
 public:
  SingularDesign(const std::string& what, double condition, long round = -1)
      : std::runtime_error(what), condition_(condition), round_(round) {}

  double condition() const noexcept { return condition_; }
  /// Iteration at which the failure occurred, or -1 outside an iterative run.
  long round() const noexcept { return round_; }

 private:
  double condition_;
  long round_;
};

/// General numerical failure (singular local Hessian, negative variance, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(got) +
                            ", expected " + std::to_string(want));
  }
}

}  // namespace fedfisher

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace roughflow {

using Index = Eigen::Index;

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr const char* kVersion = "0.3.0";

/// Bad shapes, out-of-range parameters, mismatched references.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base of every failure that comes from the numerics rather than the caller.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// State blew up, or the fixed-point map stopped contracting.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Iteration budget exhausted before the tolerance was met.
class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A path-space flow step moved too far off the manifold.
class StepSizeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A convergence sweep whose metric is already at round-off level.
class ScaleRangeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

/// Any state component above this magnitude aborts a solve.
inline constexpr double kBlowUpThreshold = 1e10;

}  // namespace roughflow

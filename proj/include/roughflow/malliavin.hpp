#pragma once

// Malliavin covariance from the derivative flow, and a Monte Carlo check of
// the reversibility identity under a Brownian rotation of the driver.

#include <cstdint>
#include <functional>
#include <vector>

#include "roughflow/rde.hpp"
#include "roughflow/rough_path.hpp"

namespace roughflow {

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kEigenFloor = -1e-10;
/// Largest fraction of failed Monte Carlo samples tolerated.
inline constexpr double kMaxFailureFraction = 0.01;

struct CovarianceMatrix {
  Eigen::MatrixXd gamma;
  Grid quadrature;
  [[nodiscard]] double symmetry_defect() const { return (gamma - gamma.transpose()).norm(); }
  [[nodiscard]] double min_eigenvalue() const;
};

/// Gamma = sum_i int_0^1 (U_r^{-1} V_i(x_r)) (U_r^{-1} V_i(x_r))^T dr, with V_i
/// the columns of F, trapezoid rule on the grid of x.
CovarianceMatrix malliavin_covariance(const OneForm& f, const RoughPathPtr& x, const Eigen::VectorXd& x0);

/// Givens rotation of the given angle in coordinates (0, 1) of R^l.
Eigen::MatrixXd plane_rotation(Index l, double angle);

/// Rotation angles W_0 (uniform on [0, 2 pi)) and W_s = W_0 + sqrt(s) N(0, 1).
struct RotationAngles {
  double w0 = 0.0;
  double ws = 0.0;
};
RotationAngles sample_rotation_angles(double s, std::uint64_t seed);

/// M X with M the plane rotation of angle w. l < 2 is an input error.
RoughPath rotation_path(const RoughPath& x, double w);

using ScalarFunction = std::function<double(const Eigen::VectorXd&)>;

struct IbpConfig {
  double s = 0.1;
  Index n_samples = 10000;
  double hurst = 0.5;
  Index grid_n = 256;
  std::uint64_t seed = 1;
  /// Exchange the roles of X^0 and X^s in every summand.
  bool swap_roles = false;
  /// Worker count; 0 reads ROUGHFLOW_THREADS, then the hardware count.
  unsigned threads = 0;
};

struct McSample {
  Index id = 0;
  double lhs = 0.0;  // (f1 - f0)(g1 - g0)
  double rhs = 0.0;  // -2 f0 (g1 - g0)
  bool failed = false;
};

struct MCReport {
  double lhs_estimate = 0.0;
  double rhs_estimate = 0.0;
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  Index n_samples = 0;
  Index failures = 0;
  std::uint64_t seed = 0;
  double s_parameter = 0.0;
  std::vector<McSample> samples;
  [[nodiscard]] double combined_se() const;
  /// |lhs - rhs| <= k * combined standard error.
  [[nodiscard]] bool agrees(double k = 3.0) const;
};

/// Paired estimates of E[(f(J(X^s)) - f(J(X^0)))(g(J(X^s)) - g(J(X^0)))] and
/// -2 E[f(J(X^0))(g(J(X^s)) - g(J(X^0)))] with X^u = M(W_u) X, X the lift of
/// an l-dimensional fBM (l = F.cols()) and J the time-one value of the
/// solution from x0. Samples whose solve fails are dropped; more than 1%
/// failures throws NumericalError.
MCReport ibp_reversibility_mc(const OneForm& f, const Eigen::VectorXd& x0, const ScalarFunction& fn,
                              const ScalarFunction& g, const IbpConfig& config);

/// Worker count from ROUGHFLOW_THREADS, else the hardware count (at least 1).
unsigned worker_count();

}  // namespace roughflow

#pragma once

// Shared helpers and brute-force oracles for the unit and acceptance tests.

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "roughflow/controlled.hpp"
#include "roughflow/fields.hpp"
#include "roughflow/rough_path.hpp"

namespace rftest {

using roughflow::Grid;
using roughflow::Index;
using roughflow::RoughPath;
using roughflow::RoughPathPtr;

inline RoughPathPtr share(RoughPath x) { return std::make_shared<const RoughPath>(std::move(x)); }

inline RoughPathPtr smooth_lift(const std::string& id, Index n, double alpha = 0.5) {
  const Grid grid = Grid::uniform(n);
  return share(roughflow::lift_piecewise_linear(grid, roughflow::smooth_driver_samples(id, grid), alpha));
}

inline RoughPathPtr samples_lift(const Eigen::MatrixXd& samples, double alpha = 0.5) {
  return share(roughflow::lift_piecewise_linear(Grid::uniform(samples.cols() - 1), samples, alpha));
}

/// Brownian samples by summing independent Gaussian increments (not the
/// library's fBM sampler).
inline Eigen::MatrixXd brownian(Index dim, Index n, std::uint64_t seed, double horizon = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(horizon / static_cast<double>(n)));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, n + 1);
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < dim; ++i) out(i, k + 1) = out(i, k) + g(rng);
  return out;
}

/// Exhaustive double loop over node pairs.
inline double brute_holder(const Grid& grid, const Eigen::MatrixXd& values, double exponent) {
  double best = 0.0;
  for (Index i = 0; i < values.cols(); ++i)
    for (Index j = i + 1; j < values.cols(); ++j)
      best = std::max(best, (values.col(j) - values.col(i)).norm() /
                                std::pow(grid.t(j) - grid.t(i), exponent));
  return best;
}

/// Controlled norm from its definition with exhaustive pair loops.
inline double brute_controlled_norm(const roughflow::ControlledPath& z) {
  const Grid& grid = z.grid();
  const double a = z.alpha();
  double zp = 0.0;
  double rem = 0.0;
  for (Index i = 0; i < z.size(); ++i)
    for (Index j = i + 1; j < z.size(); ++j) {
      const double dt = grid.t(j) - grid.t(i);
      zp = std::max(zp, (z.derivs().col(j) - z.derivs().col(i)).norm() / std::pow(dt, a));
      const Eigen::VectorXd r =
          z.values().col(j) - z.values().col(i) -
          z.deriv(i) * (z.reference()->path().col(j) - z.reference()->path().col(i));
      rem = std::max(rem, r.norm() / std::pow(dt, 2.0 * a));
    }
  return zp + rem + z.values().col(0).norm();
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

/// Classical fourth-order Runge-Kutta for x' = g(t, x), returning the
/// trajectory at the `out_every`-th step.
template <class G>
std::vector<Eigen::VectorXd> rk4(G&& g, Eigen::VectorXd x, double t0, double t1, Index steps,
                                 Index out_every = 1) {
  std::vector<Eigen::VectorXd> out{x};
  const double h = (t1 - t0) / static_cast<double>(steps);
  for (Index k = 0; k < steps; ++k) {
    const double t = t0 + h * static_cast<double>(k);
    const Eigen::VectorXd k1 = g(t, x);
    const Eigen::VectorXd k2 = g(t + h / 2, x + h / 2 * k1);
    const Eigen::VectorXd k3 = g(t + h / 2, x + h / 2 * k2);
    const Eigen::VectorXd k4 = g(t + h, x + h * k3);
    x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    if ((k + 1) % out_every == 0) out.push_back(x);
  }
  return out;
}

/// Smooth 3-dimensional driver (sin 2t, cos 3t - 1, t^2 / 2) lifted on [0, 1].
inline RoughPathPtr smooth_driver3(Index n) { return smooth_lift("wave", n); }

}  // namespace rftest

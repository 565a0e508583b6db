#pragma once

#include <functional>

#include "roughflow/controlled.hpp"

namespace roughflow {

/// Two-index map (s, t) -> R^m with a claimed almost-additivity exponent.
struct Germ {
  Index dim = 1;
  double zeta = 2.0;
  std::function<Eigen::VectorXd(double s, double t)> evaluate;
};

/// Path started at 0 whose increment over [t_k, t_{k+1}] is mu(t_k, t_{k+1});
/// m x nodes.
Eigen::MatrixXd sew(const Germ& mu, const Grid& grid);

/// Measured almost-additivity: for dyadic blocks of 2^k steps, the max over
/// aligned blocks of |mu_ts - mu_tu - mu_us| with u the block midpoint.
struct DefectReport {
  Eigen::VectorXd scales;   // t - s
  Eigen::VectorXd defects;  // max defect at that scale
  double exponent = 0.0;    // least-squares slope of log defect vs log scale
  double r_squared = 0.0;
};
DefectReport germ_defect(const Germ& mu, const Grid& grid, int min_level = 1, int max_level = -1);

/// Germ a_s X_ts + sum_b a'_s[b] A_ts[b, .] for a with values in L(R^l, R^m)
/// (stored as the column-major vec of an m x l matrix).
Germ controlled_germ(const ControlledPath& a, Index out_dim);
/// Germ F(z_s) y_ts + sum_a DF(z_s)[Z'_s e_a] (y'_s A_ts^T) e_a.
Germ oneform_germ(const OneForm& f, const ControlledPath& z, const ControlledPath& y);

/// int a dX with Gubinelli derivative a; `out_dim` is m.
ControlledPath rough_integral_controlled(const ControlledPath& a, Index out_dim);
/// int F(z) dy with Gubinelli derivative F(z) y'.
ControlledPath rough_integral_oneform(const OneForm& f, const ControlledPath& z,
                                      const ControlledPath& y);

/// Least-squares fit y = slope * x + c with the coefficient of determination.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

}  // namespace roughflow

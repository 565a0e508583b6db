#pragma once

#include <string>
#include <vector>

#include "roughflow/controlled.hpp"
#include "roughflow/sewing.hpp"

namespace roughflow {

/// One adaptive subinterval of a Picard solve.
struct PatchRecord {
  Index first = 0;
  Index last = 0;
  double contraction = 0.0;  // measured on the probe pair
  int iterations = 0;
};

enum class Method { picard, davie };

struct SolveOptions {
  Method method = Method::picard;
  double tol = 1e-12;
  int max_iter = 500;
};

/// Solution of dx = F(x) dy, x_0 given, as a controlled path with x' = F(x) y'.
struct Solution {
  ControlledPath x;
  std::vector<PatchRecord> patches;  // empty for the Davie scheme
  Method method = Method::picard;
  [[nodiscard]] int total_iterations() const;
};

/// (z, z') -> (int F(x0 + z) dy, F(x0 + z) y'), started at 0.
ControlledPath picard_map(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0,
                          const ControlledPath& z);

/// Fixed point of the Picard map by contraction on adaptively chosen
/// subintervals, patched left to right.
Solution solve_picard(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0,
                      double tol = 1e-12, int max_iter = 500);

/// Explicit two-term scheme driven by the rough path itself (y = X, y' = Id).
Solution solve_davie(const OneForm& f, const RoughPathPtr& x, const Eigen::VectorXd& x0);
/// Same scheme for a general controlled driver y.
Solution solve_davie(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0);

Solution solve(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0,
               const SolveOptions& options = {});

/// Jacobian flow U of x0 -> x_t and its inverse, each stored as vec(U) with
/// the matching Gubinelli derivative.
struct DerivativeFlow {
  Solution solution;
  ControlledPath u;
  ControlledPath u_inv;
  [[nodiscard]] Eigen::MatrixXd u_at(Index k) const;
  [[nodiscard]] Eigen::MatrixXd u_inv_at(Index k) const;
};
DerivativeFlow derivative_flow(const OneForm& f, const RoughPathPtr& x, const Eigen::VectorXd& x0);

// Joint one-forms for the variational equations. State blocks are stacked
// vertically; driver blocks are stacked horizontally.

/// (x, v) driven by (y, h): [[F, 0], [DF[v], F]].
OneForm variation_field(const OneForm& f);
/// (x, w) driven by y: [F; DF[w] + dF].
OneForm variation_field(const OneForm& f, const OneForm& df);
/// (x, v, v2) driven by (y, h): [[F, 0], [DF[v], F], [DF[v2] + D2F[v, v], 2 DF[v]]].
OneForm second_variation_field(const OneForm& f);

/// Gateaux derivative of y -> J(F, y) in direction h.
ControlledPath directional_derivative_y(const OneForm& f, const ControlledPath& y,
                                        const Eigen::VectorXd& x0, const ControlledPath& h,
                                        const SolveOptions& options = {});
/// Gateaux derivative of F -> J(F, y) in direction dF.
ControlledPath directional_derivative_F(const OneForm& f, const ControlledPath& y,
                                        const Eigen::VectorXd& x0, const OneForm& df,
                                        const SolveOptions& options = {});
struct SecondVariation {
  ControlledPath v;
  ControlledPath v2;
};
SecondVariation second_directional_derivative_y(const OneForm& f, const ControlledPath& y,
                                                const Eigen::VectorXd& x0, const ControlledPath& h,
                                                const SolveOptions& options = {});

/// Finite-ratio estimate of the operator norm of the Picard map's derivative
/// at z, sup over `probes` random directions of |Phi(z + d) - Phi(z)| / |d|.
double picard_derivative_norm_estimate(const OneForm& f, const ControlledPath& y,
                                       const Eigen::VectorXd& x0, const ControlledPath& z,
                                       int probes = 8, std::uint64_t seed = 3);

/// A family eps -> (sigma(eps, .), b(eps, .)) given as fields on R^{d+1}
/// with input (x, eps): sigma is d x l, b is d x l'.
struct OneFormFamily {
  MatrixField sigma;
  MatrixField drift;
  [[nodiscard]] Index state_dim() const { return sigma.in_dim() - 1; }
  /// [sigma | b] as a field on R^{d+1}.
  [[nodiscard]] MatrixField joint() const;
  /// x -> [sigma(eps, x) | b(eps, x)].
  [[nodiscard]] OneForm at(double eps) const;
};

/// Jet system (x, u1, u2) of the family at eps = 0; u1 = dx/deps,
/// u2 = d^2x/deps^2.
OneForm taylor_jet_field(const MatrixField& joint_family, int order);

struct TaylorResult {
  RoughPathPtr driver;                // joint lift of (X, Lambda)
  std::vector<ControlledPath> terms;  // Z^0, ..., Z^m
  Eigen::VectorXd epsilons;
  Eigen::VectorXd residuals;  // sup_t |z^eps - sum eps^i Z^i|
  LineFit fit;                // log residual vs log eps
};
TaylorResult taylor_expand(const OneFormFamily& family, const Eigen::MatrixXd& lambda_samples,
                           const RoughPath& x, const Eigen::VectorXd& x0, int order,
                           const std::vector<double>& epsilons, const SolveOptions& options = {});

/// max over nodes of |a_t - b_t|.
double sup_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace roughflow

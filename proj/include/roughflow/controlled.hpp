#pragma once

#include <string>
#include <vector>

#include "roughflow/field.hpp"
#include "roughflow/rough_path.hpp"

namespace roughflow {

/// A pair (Z, Z') controlled by a reference rough path X: values Z in R^m and
/// Gubinelli derivatives Z' in L(R^l, R^m) at every grid node, with remainder
/// R_ts = Z_ts - Z'_s X_ts.
class ControlledPath {
 public:
  /// `values` is m x nodes; `derivs` is (m*l) x nodes, each column the
  /// column-major vec of an m x l matrix.
  ControlledPath(RoughPathPtr reference, Eigen::MatrixXd values, Eigen::MatrixXd derivs);

  [[nodiscard]] Index dim() const { return values_.rows(); }
  [[nodiscard]] Index ref_dim() const { return reference_->dim(); }
  [[nodiscard]] Index size() const { return values_.cols(); }
  [[nodiscard]] const RoughPathPtr& reference() const { return reference_; }
  [[nodiscard]] const Grid& grid() const { return reference_->grid(); }
  [[nodiscard]] double alpha() const { return reference_->alpha(); }

  [[nodiscard]] const Eigen::MatrixXd& values() const { return values_; }
  [[nodiscard]] const Eigen::MatrixXd& derivs() const { return derivs_; }
  [[nodiscard]] Eigen::VectorXd value(Index i) const { return values_.col(i); }
  [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> deriv(Index i) const {
    return {derivs_.col(i).data(), dim(), ref_dim()};
  }
  [[nodiscard]] Eigen::VectorXd increment(Index i, Index j) const {
    return values_.col(j) - values_.col(i);
  }
  [[nodiscard]] Eigen::VectorXd remainder(Index i, Index j) const;

  /// Rows [row, row + rows) of Z together with the matching rows of Z'.
  [[nodiscard]] ControlledPath block(Index row, Index rows) const;
  [[nodiscard]] bool same_reference(const ControlledPath& other) const;

  ControlledPath& operator+=(const ControlledPath& other);
  ControlledPath& operator-=(const ControlledPath& other);
  ControlledPath& operator*=(double c);
  /// Z + c, Z' unchanged.
  [[nodiscard]] ControlledPath shifted(const Eigen::VectorXd& c) const;

 private:
  RoughPathPtr reference_;
  Eigen::MatrixXd values_;
  Eigen::MatrixXd derivs_;
};

ControlledPath operator+(ControlledPath a, const ControlledPath& b);
ControlledPath operator-(ControlledPath a, const ControlledPath& b);
ControlledPath operator*(double c, ControlledPath a);

/// True when both references carry the same grid, samples, areas and alpha.
bool same_rough_path(const RoughPath& a, const RoughPath& b);

/// z = c, Z' = 0.
ControlledPath from_constant(const Eigen::VectorXd& c, RoughPathPtr reference);
/// z = x, Z' = Id.
ControlledPath from_reference(RoughPathPtr reference);
/// (phi(z), Dphi(z) Z'); phi is an n x 1 field on R^m.
ControlledPath compose_smooth(const SmoothMap& phi, const ControlledPath& z);
/// Stacks values and derivatives: (z_a; z_b).
ControlledPath stack(const ControlledPath& a, const ControlledPath& b);
ControlledPath stack(const std::vector<ControlledPath>& parts);

/// Hoelder(Z', alpha) + Hoelder(R, 2 alpha) + |z_0| on the whole grid.
double controlled_norm(const ControlledPath& z);
/// Same, with Hoelder sups restricted to nodes first..last and the start
/// value read at `first`.
double controlled_norm(const ControlledPath& z, Index first, Index last);
/// controlled_norm plus |z'_first|: a norm (not a seminorm) on paths whose
/// Gubinelli derivative is constant.
double controlled_norm_with_derivative(const ControlledPath& z);
double controlled_norm_with_derivative(const ControlledPath& z, Index first, Index last);

struct ControlledNormParts {
  double derivative = 0.0;
  double remainder = 0.0;
  double start = 0.0;
  [[nodiscard]] double total() const { return derivative + remainder + start; }
};
ControlledNormParts controlled_norm_parts(const ControlledPath& z, Index first, Index last);

// CSV `t,z1..zm,zp11..zpml` (zp_ij is row i, driver column j).
std::string controlled_path_csv(const ControlledPath& z);
void write_controlled_path_csv(const std::string& file, const ControlledPath& z);
ControlledPath read_controlled_path_csv(const std::string& file, RoughPathPtr reference);

}  // namespace roughflow

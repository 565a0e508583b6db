#pragma once

// Geometry on the unit sphere S^n in R^{n+1}: projector fields with a radial
// cutoff, parallel transport of frames along controlled paths, anti-development
// and development, Driver's flow on path space, and the first variation of
// development in the projector.

#include <string>
#include <vector>

#include "roughflow/controlled.hpp"
#include "roughflow/field.hpp"
#include "roughflow/rde.hpp"

namespace roughflow {

/// Tolerance for |y| = 1 and tangency of Gubinelli derivatives.
inline constexpr double kManifoldTol = 1e-6;
/// Radial band [lo, hi] outside which the sphere projector vanishes; it is
/// undamped on [plateau_lo, plateau_hi].
inline constexpr double kCutoffLo = 0.5;
inline constexpr double kCutoffPlateauLo = 0.75;
inline constexpr double kCutoffPlateauHi = 1.25;
inline constexpr double kCutoffHi = 1.5;
/// Largest frame condition number accepted by anti_development.
inline constexpr double kMaxFrameCondition = 1e8;
/// Largest retraction displacement accepted in one flow step.
inline constexpr double kMaxRetraction = 1e-3;

/// Smooth radial cutoff: 1 on the plateau, 0 outside [kCutoffLo, kCutoffHi].
double radial_cutoff(double r);

/// chi(|x|) (I - x x^T / |x|^2). |x| = 0 is an input error.
Eigen::MatrixXd sphere_projector(const Eigen::VectorXd& x);

/// Projector-valued field x -> P(x) on R^d, d x d, with derivatives.
class ProjectorField {
 public:
  ProjectorField() = default;
  ProjectorField(MatrixField field, double band_lo, double band_hi);

  [[nodiscard]] Index dim() const { return field_.in_dim(); }
  [[nodiscard]] const MatrixField& field() const { return field_; }
  [[nodiscard]] double band_lo() const { return band_lo_; }
  [[nodiscard]] double band_hi() const { return band_hi_; }
  [[nodiscard]] Eigen::MatrixXd eval(const Eigen::VectorXd& x) const { return field_.value(x); }
  /// DP(x)[v].
  [[nodiscard]] Eigen::MatrixXd deriv(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const {
    return field_.d1(x, v);
  }

 private:
  MatrixField field_;
  double band_lo_ = 0.0;
  double band_hi_ = 0.0;
};

ProjectorField sphere_projector_field(Index d);

/// x -> P(x) K P(x) for a fixed d x d matrix K: a direction in projector
/// space whose range stays tangent.
MatrixField sandwiched_direction(const ProjectorField& p, const Eigen::MatrixXd& k);

/// A controlled path with values on the unit sphere and tangent Gubinelli
/// derivative columns.
class ManifoldPath {
 public:
  explicit ManifoldPath(ControlledPath path, double tol = kManifoldTol);

  [[nodiscard]] const ControlledPath& path() const { return path_; }
  [[nodiscard]] Index dim() const { return path_.dim(); }
  [[nodiscard]] Index tangent_dim() const { return path_.dim() - 1; }
  [[nodiscard]] Index size() const { return path_.size(); }
  [[nodiscard]] Eigen::VectorXd value(Index k) const { return path_.value(k); }

 private:
  ControlledPath path_;
};

/// max_k | |y_k| - 1 |.
double sphere_constraint_defect(const ControlledPath& y);
/// max_k |y_k^T Y'_k|.
double derivative_tangency_defect(const ControlledPath& y);
/// Normalizes values and projects Gubinelli derivatives onto the tangent
/// space; node 0 is kept bit-for-bit when it is already on the sphere.
ControlledPath retract_to_sphere(const ControlledPath& y);

/// dy = P(y) dX from y0 (Davie), retracted onto the sphere.
ManifoldPath sphere_path(const RoughPathPtr& x, const Eigen::VectorXd& y0);
/// Constant-speed circle of the given colatitude on S^2, one full turn over
/// [0, 1], starting at (sin c, 0, cos c). Controlled by X_t = t.
ManifoldPath latitude_circle(double colatitude, Index steps);
/// Unit-speed great circle y_t = cos(L t) y0 + sin(L t) u over [0, 1].
ManifoldPath great_circle_arc(const Eigen::VectorXd& y0, const Eigen::VectorXd& u, double length,
                              Index steps);

/// Orthonormal frame whose first n columns span T_{y0}M and whose last
/// column is y0.
Eigen::MatrixXd tangent_frame(const Eigen::VectorXd& y0);

/// Parallel-transported frame along y, stored as vec(T) (column-major).
struct Transport {
  ControlledPath frame;
  [[nodiscard]] Index dim() const;
  [[nodiscard]] Eigen::MatrixXd at(Index k) const;
  /// max_k |T_k[:, :n]^T T_k[:, :n] - I|.
  [[nodiscard]] double orthonormality_defect() const;
  /// max_k |y_k^T T_k[:, :n]|.
  [[nodiscard]] double tangency_defect(const ControlledPath& y) const;
};

/// A_P(x)[v] = DP(x)[v] P(x) - P(x) DP(x)[v]: the skew generator of
/// transport along the projector connection.
Eigen::MatrixXd transport_generator(const ProjectorField& p, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& v);

/// One-form on (y, vec T), driven by y itself: column a is (e_a, vec(A_P(y)[e_a] T)).
OneForm transport_field(const ProjectorField& p);

Transport parallel_transport(const ControlledPath& y, const Eigen::MatrixXd& t0,
                             const ProjectorField& p);
Transport parallel_transport(const ManifoldPath& y, const Eigen::MatrixXd& t0);

/// Net rotation angle in (-pi, pi] of the first two frame columns between
/// two frames: the angle of T0[:, :2]^T T1[:, :2].
double holonomy_angle(const Eigen::MatrixXd& t0, const Eigen::MatrixXd& t1);

/// dz = T^{-1} P(y) dy, first n components; z_0 = 0.
ControlledPath anti_development(const ControlledPath& y, const Transport& t, const ProjectorField& p);
ControlledPath anti_development(const ManifoldPath& y, const Transport& t);

/// One-form on (w, vec T) driven by z in R^n: column j is (v, vec(A_P(w)[v] T))
/// with v = P(w) T e_j.
OneForm development_field(const MatrixField& p, Index n);
/// d/deps of development_field(P + eps Q) at eps = 0.
OneForm development_field_variation(const MatrixField& p, const MatrixField& q, Index n);

/// The w-component of the development of z from (y0, T0) under projector P.
ControlledPath development(const MatrixField& p, const ControlledPath& z, const Eigen::VectorXd& y0,
                           const Eigen::MatrixXd& t0, const SolveOptions& options = {});

/// d/deps of the development of the anti-development of y under P + eps Q;
/// the anti-development and frame use P and tangent_frame(y_0).
ControlledPath connection_variation_field(const ProjectorField& p, const MatrixField& q,
                                          const ManifoldPath& y, const SolveOptions& options = {});

/// Pieces shared by the connection variation and its finite-difference check.
struct DevelopmentSetup {
  Eigen::MatrixXd t0;
  Transport transport;
  ControlledPath z;  // anti-development of y
};
DevelopmentSetup development_setup(const ProjectorField& p, const ManifoldPath& y);

/// P(y_s) T_s[:, :n] h_s with its Gubinelli derivative; h is n x N+1 with
/// h_0 = 0 and zero Gubinelli derivative.
ControlledPath driver_field(const ControlledPath& y, const Transport& t, const Eigen::MatrixXd& h,
                            const ProjectorField& p);
ControlledPath driver_field(const ManifoldPath& y, const Eigen::MatrixXd& h);

enum class FlowScheme { euler, rk4 };
FlowScheme parse_flow_scheme(const std::string& name);

struct FlowDiagnostics {
  double time = 0.0;
  double constraint = 0.0;    // after retraction
  double frame_defect = 0.0;      // orthonormality of the transported frame
  double frame_tangency = 0.0;    // max_k |y_k^T T_k[:, :n]|
  double retraction = 0.0;    // max node displacement of the retraction
};

struct FlowResult {
  std::vector<ManifoldPath> trajectory;  // flow times 0, dt, ..., steps * dt
  std::vector<FlowDiagnostics> diagnostics;
};

/// dy/dt = driver_field(y, h), explicit Euler or RK4 in flow time, each
/// step followed by retraction onto the sphere.
FlowResult flow_integrate(const ManifoldPath& y0, const Eigen::MatrixXd& h, double dt, int steps,
                          FlowScheme scheme);

}  // namespace roughflow

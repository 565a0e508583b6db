#include "roughflow/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "roughflow/sewing.hpp"

namespace roughflow {

namespace {

/// C-infinity step: 0 for u <= 0, 1 for u >= 1. The tails below 1e-2 are
/// cut to exact constants (the neglected values are below 1e-40).
template <class S>
S smooth_unit_step(const S& u) {
  const double b = base_value(u);
  if (b <= 1e-2) return S(0.0);
  if (b >= 1.0 - 1e-2) return S(1.0);
  using std::exp;
  const S a = exp(S(-1.0) / u);
  const S c = exp(S(-1.0) / (S(1.0) - u));
  return a / (a + c);
}

template <class S>
S cutoff_t(const S& r) {
  const double b = base_value(r);
  if (b >= kCutoffPlateauLo && b <= kCutoffPlateauHi) return S(1.0);
  return smooth_unit_step((r - kCutoffLo) / (kCutoffPlateauLo - kCutoffLo)) *
         smooth_unit_step((kCutoffHi - r) / (kCutoffHi - kCutoffPlateauHi));
}

template <class S>
Mat<S> identity(Index n) {
  Mat<S> out = Mat<S>::Constant(n, n, S(0.0));
  for (Index i = 0; i < n; ++i) out(i, i) = S(1.0);
  return out;
}

template <class S>
Mat<S> sphere_projector_t(const Vec<S>& x) {
  const S r2 = x.squaredNorm();
  if (!(base_value(r2) > 0.0)) throw InputError("sphere projector: |x| = 0");
  using std::sqrt;
  const S r = sqrt(r2);
  Mat<S> p = identity<S>(x.size());
  p -= (x * x.transpose()) / r2;
  return cutoff_t(r) * p;
}

/// Gauss-Jordan inverse with partial pivoting on the primal values.
template <class S>
Mat<S> inverse_t(Mat<S> a) {
  const Index n = a.rows();
  Mat<S> inv = identity<S>(n);
  for (Index c = 0; c < n; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < n; ++r)
      if (std::abs(base_value(a(r, c))) > std::abs(base_value(a(piv, c)))) piv = r;
    if (base_value(a(piv, c)) == 0.0) throw NumericalError("singular frame");
    a.row(c).swap(a.row(piv));
    inv.row(c).swap(inv.row(piv));
    const S scale = S(1.0) / a(c, c);
    a.row(c) *= scale;
    inv.row(c) *= scale;
    for (Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const S f = a(r, c);
      a.row(r) -= f * a.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

template <class S>
Mat<S> unvec(const Vec<S>& v, Index d) {
  return Eigen::Map<const Mat<S>>(v.data(), d, d);
}

template <class S>
Vec<S> vec(const Mat<S>& m) {
  return Eigen::Map<const Vec<S>>(m.data(), m.size());
}

template <class S>
Vec<S> unit_vec(Index n, Index i) {
  Vec<S> e = Vec<S>::Constant(n, S(0.0));
  e(i) = S(1.0);
  return e;
}

/// A_P(x)[v] at any jet level, from P(x) and DP(x)[v].
template <class S>
Mat<S> generator_t(const MatrixField& p, const Mat<S>& px, const Vec<S>& x, const Vec<S>& v) {
  const Mat<S> dp = p.derivative(x, v);
  return dp * px - px * dp;
}

void check_frame(const Eigen::MatrixXd& t0, const Eigen::VectorXd& y0) {
  const Index d = y0.size();
  require(t0.rows() == d && t0.cols() == d, "frame: T0 must be d x d");
  require((t0.transpose() * t0 - Eigen::MatrixXd::Identity(d, d)).norm() < 1e-10,
          "frame: T0 is not orthogonal");
  require((y0.transpose() * t0.leftCols(d - 1)).norm() < 1e-10,
          "frame: first n columns of T0 are not tangent at y0");
}

}  // namespace

// ---------------------------------------------------------------- projectors

double radial_cutoff(double r) { return cutoff_t(r); }

Eigen::MatrixXd sphere_projector(const Eigen::VectorXd& x) { return sphere_projector_t<double>(x); }

ProjectorField::ProjectorField(MatrixField field, double band_lo, double band_hi)
    : field_(std::move(field)), band_lo_(band_lo), band_hi_(band_hi) {
  require(field_.valid() && field_.rows() == field_.in_dim() && field_.cols() == field_.in_dim(),
          "projector field must map R^d to d x d matrices");
}

ProjectorField sphere_projector_field(Index d) {
  require(d >= 2, "sphere projector needs d >= 2");
  return {MatrixField::generic(
              d, d, d, [](const auto& x) { return sphere_projector_t(x); }, kMaxJetLevel,
              "sphere-projector"),
          kCutoffLo, kCutoffHi};
}

MatrixField sandwiched_direction(const ProjectorField& p, const Eigen::MatrixXd& k) {
  const Index d = p.dim();
  require(k.rows() == d && k.cols() == d, "sandwiched_direction: K must be d x d");
  const MatrixField pf = p.field();
  return MatrixField::generic(
      d, d, d,
      [pf, k](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        const Mat<S> px = pf(x);
        return Mat<S>(px * detail::promote<S>(k) * px);
      },
      pf.max_level(), "P K P");
}

// ---------------------------------------------------------------- manifold paths

double sphere_constraint_defect(const ControlledPath& y) {
  double worst = 0.0;
  for (Index k = 0; k < y.size(); ++k) worst = std::max(worst, std::abs(y.values().col(k).norm() - 1.0));
  return worst;
}

double derivative_tangency_defect(const ControlledPath& y) {
  double worst = 0.0;
  for (Index k = 0; k < y.size(); ++k)
    worst = std::max(worst, (y.value(k).transpose() * y.deriv(k)).norm());
  return worst;
}

ManifoldPath::ManifoldPath(ControlledPath path, double tol) : path_(std::move(path)) {
  require(path_.dim() >= 2, "manifold path: dimension must be at least 2");
  const double c = sphere_constraint_defect(path_);
  require(c <= tol, "manifold path: values leave the sphere by " + std::to_string(c));
  const double t = derivative_tangency_defect(path_);
  require(t <= tol, "manifold path: Gubinelli derivative not tangent (" + std::to_string(t) + ")");
}

ControlledPath retract_to_sphere(const ControlledPath& y) {
  const Index d = y.dim();
  const Index l = y.ref_dim();
  Eigen::MatrixXd values = y.values();
  Eigen::MatrixXd derivs = y.derivs();
  for (Index k = 0; k < y.size(); ++k) {
    const Eigen::VectorXd v = y.value(k);
    const double r = v.norm();
    if (r == 0.0) throw NumericalError("retraction: path passes through the origin");
    if (k == 0 && std::abs(r - 1.0) < 1e-14 &&
        (v.transpose() * y.deriv(0)).norm() < 1e-14)
      continue;
    const Eigen::VectorXd u = v / r;
    const Eigen::MatrixXd dr = (Eigen::MatrixXd::Identity(d, d) - u * u.transpose()) / r;
    values.col(k) = u;
    Eigen::Map<Eigen::MatrixXd>(derivs.col(k).data(), d, l) = dr * y.deriv(k);
  }
  return {y.reference(), std::move(values), std::move(derivs)};
}

ManifoldPath sphere_path(const RoughPathPtr& x, const Eigen::VectorXd& y0) {
  require(x->dim() == y0.size(), "sphere_path: driver and y0 dimensions differ");
  require(std::abs(y0.norm() - 1.0) < 1e-12, "sphere_path: y0 must be a unit vector");
  const Solution sol = solve_davie(sphere_projector_field(y0.size()).field(), x, y0);
  return ManifoldPath(retract_to_sphere(sol.x));
}

namespace {

RoughPathPtr time_reference(Index steps) {
  const Grid grid = Grid::uniform(steps);
  return std::make_shared<const RoughPath>(
      lift_piecewise_linear(grid, grid.nodes().transpose(), 0.5));
}

}  // namespace

ManifoldPath latitude_circle(double colatitude, Index steps) {
  const RoughPathPtr ref = time_reference(steps);
  const double s = std::sin(colatitude), c = std::cos(colatitude);
  const double w = 2.0 * std::numbers::pi;
  Eigen::MatrixXd values(3, steps + 1), derivs(3, steps + 1);
  for (Index k = 0; k <= steps; ++k) {
    const double t = ref->grid().t(k);
    values.col(k) << s * std::cos(w * t), s * std::sin(w * t), c;
    derivs.col(k) << -w * s * std::sin(w * t), w * s * std::cos(w * t), 0.0;
  }
  return ManifoldPath(ControlledPath(ref, std::move(values), std::move(derivs)));
}

ManifoldPath great_circle_arc(const Eigen::VectorXd& y0, const Eigen::VectorXd& u, double length,
                              Index steps) {
  require(std::abs(y0.norm() - 1.0) < 1e-12 && std::abs(u.norm() - 1.0) < 1e-12,
          "great_circle_arc: y0 and u must be unit vectors");
  require(std::abs(y0.dot(u)) < 1e-12, "great_circle_arc: u must be orthogonal to y0");
  const RoughPathPtr ref = time_reference(steps);
  Eigen::MatrixXd values(y0.size(), steps + 1), derivs(y0.size(), steps + 1);
  for (Index k = 0; k <= steps; ++k) {
    const double a = length * ref->grid().t(k);
    values.col(k) = std::cos(a) * y0 + std::sin(a) * u;
    derivs.col(k) = length * (-std::sin(a) * y0 + std::cos(a) * u);
  }
  return ManifoldPath(ControlledPath(ref, std::move(values), std::move(derivs)));
}

Eigen::MatrixXd tangent_frame(const Eigen::VectorXd& y0) {
  require(std::abs(y0.norm() - 1.0) < 1e-10, "tangent_frame: y0 must be a unit vector");
  const Index d = y0.size();
  const Eigen::MatrixXd col = y0;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(col);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd t(d, d);
  t.leftCols(d - 1) = q.rightCols(d - 1);
  t.col(d - 1) = y0;
  return t;
}

// ---------------------------------------------------------------- transport

Index Transport::dim() const {
  return static_cast<Index>(std::lround(std::sqrt(static_cast<double>(frame.dim()))));
}

Eigen::MatrixXd Transport::at(Index k) const {
  const Index d = dim();
  return Eigen::Map<const Eigen::MatrixXd>(frame.values().col(k).data(), d, d);
}

double Transport::orthonormality_defect() const {
  const Index d = dim();
  double worst = 0.0;
  for (Index k = 0; k < frame.size(); ++k) {
    const Eigen::MatrixXd tn = at(k).leftCols(d - 1);
    worst = std::max(worst, (tn.transpose() * tn - Eigen::MatrixXd::Identity(d - 1, d - 1)).norm());
  }
  return worst;
}

double Transport::tangency_defect(const ControlledPath& y) const {
  const Index d = dim();
  require(y.size() == frame.size() && y.dim() == d, "tangency_defect: path and frame differ");
  double worst = 0.0;
  for (Index k = 0; k < frame.size(); ++k)
    worst = std::max(worst, (y.value(k).transpose() * at(k).leftCols(d - 1)).norm());
  return worst;
}

Eigen::MatrixXd transport_generator(const ProjectorField& p, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& v) {
  return generator_t<double>(p.field(), p.eval(x), x, v);
}

OneForm transport_field(const ProjectorField& p) {
  const Index d = p.dim();
  const MatrixField pf = p.field();
  return MatrixField::generic(
      d + d * d, d + d * d, d,
      [pf, d](const auto& q) {
        using S = typename std::decay_t<decltype(q)>::Scalar;
        const Vec<S> y = q.head(d);
        const Mat<S> t = unvec<S>(q.tail(d * d), d);
        const Mat<S> py = pf(y);
        Mat<S> out = Mat<S>::Constant(d + d * d, d, S(0.0));
        for (Index a = 0; a < d; ++a) {
          out(a, a) = S(1.0);
          out.col(a).tail(d * d) = vec<S>(generator_t<S>(pf, py, y, unit_vec<S>(d, a)) * t);
        }
        return out;
      },
      pf.max_level() - 1, "transport");
}

Transport parallel_transport(const ControlledPath& y, const Eigen::MatrixXd& t0, const ProjectorField& p) {
  const Index d = y.dim();
  const Index l = y.ref_dim();
  const Index dd = d * d;
  require(p.dim() == d, "parallel_transport: projector and path dimensions differ");
  check_frame(t0, y.value(0));
  const OneForm f = transport_field(p);
  const RoughPath& ref = *y.reference();
  Eigen::MatrixXd values(dd, y.size());
  Eigen::MatrixXd derivs(dd * l, y.size());
  Eigen::MatrixXd t = t0;
  Eigen::VectorXd q(d + dd);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  q.tail(dd) = Eigen::Map<const Eigen::VectorXd>(eye.data(), dd);
  auto block_of = [d, dd](const auto& column) {
    return Eigen::Map<const Eigen::MatrixXd>(column.tail(dd).eval().data(), d, d).eval();
  };
  for (Index k = 0; k < y.size(); ++k) {
    q.head(d) = y.value(k);
    const Eigen::MatrixXd fq = f.value(q);  // column c: (e_c, vec A_c)
    values.col(k) = Eigen::Map<const Eigen::VectorXd>(t.data(), dd);
    const auto yp = y.deriv(k);
    for (Index a = 0; a < l; ++a) {
      Eigen::MatrixXd ta = Eigen::MatrixXd::Zero(d, d);
      for (Index c = 0; c < d; ++c) ta += yp(c, a) * block_of(fq.col(c));
      derivs.col(k).segment(a * dd, dd) = Eigen::Map<const Eigen::VectorXd>((ta * t).eval().data(), dd);
    }
    if (k + 1 == y.size()) break;
    // Two-term germ M of the linear equation dT = A(y)[dy] T over one step,
    // applied through the Cayley transform of its skew part.
    const Eigen::VectorXd dy = y.value(k + 1) - y.value(k);
    const Eigen::MatrixXd w = yp * ref.step_area(k) * yp.transpose();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (Index c = 0; c < d; ++c) m += dy(c) * block_of(fq.col(c));
    for (Index b = 0; b < d; ++b) {
      if (w.row(b).isZero(0.0)) continue;
      const Eigen::MatrixXd dfb = f.d1(q, fq.col(b));
      for (Index c = 0; c < d; ++c)
        if (w(b, c) != 0.0) m += w(b, c) * block_of(dfb.col(c));
    }
    const Eigen::MatrixXd omega = 0.5 * (m - m.transpose());
    t = (eye - 0.5 * omega).partialPivLu().solve((eye + 0.5 * omega) * t);
    if (!t.allFinite()) throw DivergenceError("parallel_transport: non-finite frame at node " + std::to_string(k + 1));
  }
  return {ControlledPath(y.reference(), std::move(values), std::move(derivs))};
}

Transport parallel_transport(const ManifoldPath& y, const Eigen::MatrixXd& t0) {
  return parallel_transport(y.path(), t0, sphere_projector_field(y.dim()));
}

double holonomy_angle(const Eigen::MatrixXd& t0, const Eigen::MatrixXd& t1) {
  require(t0.cols() >= 2 && t1.cols() >= 2 && t0.rows() == t1.rows(), "holonomy_angle: bad frames");
  const Eigen::MatrixXd r = t0.leftCols(2).transpose() * t1.leftCols(2);
  return std::atan2(r(1, 0), r(0, 0));
}

// ---------------------------------------------------------------- (anti-)development

ControlledPath anti_development(const ControlledPath& y, const Transport& t, const ProjectorField& p) {
  const Index d = y.dim();
  const Index n = d - 1;
  require(t.frame.size() == y.size() && t.dim() == d, "anti_development: frame and path differ");
  for (Index k = 0; k < y.size(); ++k) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(t.at(k));
    const auto& s = svd.singularValues();
    const double cond = s(0) / s(d - 1);
    if (!(cond <= kMaxFrameCondition))
      throw NumericalError("anti_development: frame condition number " + std::to_string(cond) +
                           " at node " + std::to_string(k));
  }
  const MatrixField pf = p.field();
  const OneForm f = MatrixField::generic(
      d + d * d, n, d,
      [pf, d, n](const auto& q) {
        using S = typename std::decay_t<decltype(q)>::Scalar;
        const Vec<S> y = q.head(d);
        const Mat<S> tinv = inverse_t<S>(unvec<S>(q.tail(d * d), d));
        return Mat<S>((tinv * pf(y)).topRows(n));
      },
      pf.max_level(), "anti-development");
  return rough_integral_oneform(f, stack(y, t.frame), y);
}

ControlledPath anti_development(const ManifoldPath& y, const Transport& t) {
  return anti_development(y.path(), t, sphere_projector_field(y.dim()));
}

OneForm development_field(const MatrixField& p, Index n) {
  const Index d = p.in_dim();
  require(n >= 1 && n < d, "development_field: need 1 <= n < d");
  return MatrixField::generic(
      d + d * d, d + d * d, n,
      [p, d, n](const auto& q) {
        using S = typename std::decay_t<decltype(q)>::Scalar;
        const Vec<S> w = q.head(d);
        const Mat<S> t = unvec<S>(q.tail(d * d), d);
        const Mat<S> pw = p(w);
        Mat<S> out(d + d * d, n);
        for (Index j = 0; j < n; ++j) {
          const Vec<S> v = pw * t.col(j);
          out.col(j).head(d) = v;
          out.col(j).tail(d * d) = vec<S>(generator_t<S>(p, pw, w, v) * t);
        }
        return out;
      },
      p.max_level() - 1, "development");
}

OneForm development_field_variation(const MatrixField& p, const MatrixField& q, Index n) {
  const Index d = p.in_dim();
  require(q.in_dim() == d && q.rows() == d && q.cols() == d, "development variation: Q must be d x d");
  return MatrixField::generic(
      d + d * d, d + d * d, n,
      [p, q, d, n](const auto& state) {
        using S = typename std::decay_t<decltype(state)>::Scalar;
        const Vec<S> w = state.head(d);
        const Mat<S> t = unvec<S>(state.tail(d * d), d);
        const Mat<S> pw = p(w);
        const Mat<S> qw = q(w);
        Mat<S> out(d + d * d, n);
        for (Index j = 0; j < n; ++j) {
          const Vec<S> v = pw * t.col(j);
          const Vec<S> dv = qw * t.col(j);
          const Mat<S> dp = p.derivative(w, v);
          const Mat<S> dq = q.derivative(w, v);
          // Product rule on A_P[v] = DP[v] P - P DP[v], with v = P T e_j.
          Mat<S> da = dq * pw + dp * qw - qw * dp - pw * dq;
          da += generator_t<S>(p, pw, w, dv);
          out.col(j).head(d) = dv;
          out.col(j).tail(d * d) = vec<S>(da * t);
        }
        return out;
      },
      std::min(p.max_level(), q.max_level()) - 1, "development-variation");
}

ControlledPath development(const MatrixField& p, const ControlledPath& z, const Eigen::VectorXd& y0,
                           const Eigen::MatrixXd& t0, const SolveOptions& options) {
  const Index d = p.in_dim();
  require(y0.size() == d && z.dim() == d - 1, "development: z must be (d-1)-dimensional");
  check_frame(t0, y0);
  Eigen::VectorXd q0(d + d * d);
  q0.head(d) = y0;
  q0.tail(d * d) = Eigen::Map<const Eigen::VectorXd>(t0.data(), d * d);
  return solve(development_field(p, d - 1), z, q0, options).x.block(0, d);
}

DevelopmentSetup development_setup(const ProjectorField& p, const ManifoldPath& y) {
  const Eigen::MatrixXd t0 = tangent_frame(y.value(0));
  Transport tr = parallel_transport(y.path(), t0, p);
  ControlledPath z = anti_development(y.path(), tr, p);
  return {t0, std::move(tr), std::move(z)};
}

ControlledPath connection_variation_field(const ProjectorField& p, const MatrixField& q,
                                          const ManifoldPath& y, const SolveOptions& options) {
  const Index d = y.dim();
  const DevelopmentSetup setup = development_setup(p, y);
  Eigen::VectorXd q0(d + d * d);
  q0.head(d) = y.value(0);
  q0.tail(d * d) = Eigen::Map<const Eigen::VectorXd>(setup.t0.data(), d * d);
  const OneForm g = development_field(p.field(), d - 1);
  const OneForm dg = development_field_variation(p.field(), q, d - 1);
  return directional_derivative_F(g, setup.z, q0, dg, options).block(0, d);
}

// ---------------------------------------------------------------- Driver's flow

ControlledPath driver_field(const ControlledPath& y, const Transport& t, const Eigen::MatrixXd& h,
                            const ProjectorField& p) {
  const Index d = y.dim();
  const Index n = d - 1;
  const Index l = y.ref_dim();
  require(h.rows() == n && h.cols() == y.size(), "driver_field: h must be n x (N+1)");
  require(h.col(0).isZero(0.0), "driver_field: h_0 must be 0");
  require(t.frame.size() == y.size() && t.dim() == d, "driver_field: frame and path differ");
  Eigen::MatrixXd values(d, y.size());
  Eigen::MatrixXd derivs(d * l, y.size());
  Eigen::VectorXd hh = Eigen::VectorXd::Zero(d);
  for (Index k = 0; k < y.size(); ++k) {
    const Eigen::VectorXd yk = y.value(k);
    const Eigen::MatrixXd tk = t.at(k);
    const Eigen::MatrixXd pk = p.eval(yk);
    hh.head(n) = h.col(k);
    const Eigen::VectorXd th = tk * hh;
    values.col(k) = pk * th;
    const auto yp = y.deriv(k);
    const Eigen::Map<const Eigen::MatrixXd> tp(t.frame.derivs().col(k).data(), d * d, l);
    for (Index a = 0; a < l; ++a) {
      const Eigen::Map<const Eigen::MatrixXd> ta(tp.col(a).data(), d, d);
      derivs.col(k).segment(a * d, d) = p.deriv(yk, yp.col(a)) * th + pk * (ta * hh);
    }
  }
  return {y.reference(), std::move(values), std::move(derivs)};
}

ControlledPath driver_field(const ManifoldPath& y, const Eigen::MatrixXd& h) {
  const ProjectorField p = sphere_projector_field(y.dim());
  return driver_field(y.path(), parallel_transport(y.path(), tangent_frame(y.value(0)), p), h, p);
}

FlowScheme parse_flow_scheme(const std::string& name) {
  if (name == "euler") return FlowScheme::euler;
  if (name == "rk4") return FlowScheme::rk4;
  throw InputError("unknown flow scheme '" + name + "' (expected euler or rk4)");
}

FlowResult flow_integrate(const ManifoldPath& y0, const Eigen::MatrixXd& h, double dt, int steps,
                          FlowScheme scheme) {
  require(dt >= 0.0 && std::isfinite(dt), "flow_integrate: dt must be finite and nonnegative");
  require(steps >= 0, "flow_integrate: steps must be nonnegative");
  const Index d = y0.dim();
  const ProjectorField p = sphere_projector_field(d);
  const Eigen::MatrixXd t0 = tangent_frame(y0.value(0));

  auto field = [&](const ControlledPath& y) { return driver_field(y, parallel_transport(y, t0, p), h, p); };
  auto diagnose = [&](const ControlledPath& y, double time, double moved) {
    const Transport tr = parallel_transport(y, t0, p);
    return FlowDiagnostics{time, sphere_constraint_defect(y), tr.orthonormality_defect(), tr.tangency_defect(y), moved};
  };

  FlowResult out;
  out.trajectory.push_back(y0);
  out.diagnostics.push_back(diagnose(y0.path(), 0.0, 0.0));
  if (dt == 0.0 || steps == 0) return out;

  for (int s = 0; s < steps; ++s) {
    const ControlledPath& y = out.trajectory.back().path();
    ControlledPath raw = y;
    if (scheme == FlowScheme::euler) {
      raw += dt * field(y);
    } else {
      const ControlledPath k1 = field(y);
      const ControlledPath k2 = field(y + (0.5 * dt) * k1);
      const ControlledPath k3 = field(y + (0.5 * dt) * k2);
      const ControlledPath k4 = field(y + dt * k3);
      raw += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const ControlledPath next = retract_to_sphere(raw);
    const double moved = (next.values() - raw.values()).colwise().norm().maxCoeff();
    const double time = dt * (s + 1);
    if (moved > kMaxRetraction)
      throw StepSizeError("flow step at t = " + std::to_string(time) + " moved " + std::to_string(moved) +
                          " off the sphere; reduce dt");
    out.trajectory.emplace_back(next);
    out.diagnostics.push_back(diagnose(next, time, moved));
  }
  return out;
}

}  // namespace roughflow

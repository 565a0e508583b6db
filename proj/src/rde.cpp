#include "roughflow/rde.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace roughflow {

namespace {

void check_state(const Eigen::VectorXd& x, Index node) {
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kBlowUpThreshold)
    throw DivergenceError("solution blew up at node " + std::to_string(node));
}

/// Two-term increment over step k for a state x_k with Gubinelli
/// derivative zp, given fk = F(x_k).
Eigen::VectorXd step_increment(const OneForm& f, const ControlledPath& y, Index k,
                               const Eigen::VectorXd& xk, const Eigen::MatrixXd& fk,
                               const Eigen::Ref<const Eigen::MatrixXd>& zp) {
  const RoughPath& ref = *y.reference();
  Eigen::VectorXd out = fk * y.increment(k, k + 1);
  const Eigen::MatrixXd w = y.deriv(k) * ref.step_area(k).transpose();
  for (Index a = 0; a < y.ref_dim(); ++a) {
    if (w.col(a).isZero(0.0) || zp.col(a).isZero(0.0)) continue;
    out.noalias() += f.d1(xk, zp.col(a)) * w.col(a);
  }
  return out;
}

void check_driver(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0) {
  require(f.valid(), "solve: missing one-form");
  require(x0.size() == f.in_dim(), "solve: x0 dimension differs from the one-form input");
  require(f.rows() == f.in_dim(), "solve: one-form must map into the state space");
  require(f.cols() == y.dim(), "solve: one-form column count differs from the driver dimension");
  require(f.max_level() >= 1, "solve: one-form must be at least C^2");
}

/// Iterate storage on a node range [first, last], local column j <-> node first + j.
struct Iterate {
  Eigen::MatrixXd values;  // d x (len + 1)
  Eigen::MatrixXd derivs;  // (d*l) x (len + 1)
};

class PicardEngine {
 public:
  PicardEngine(const OneForm& f, const ControlledPath& y) : f_(f), y_(y), ref_(*y.reference()) {}

  Iterate zero(Index first, Index last) const {
    const Index d = f_.in_dim();
    return {Eigen::MatrixXd::Zero(d, last - first + 1),
            Eigen::MatrixXd::Zero(d * y_.ref_dim(), last - first + 1)};
  }

  Iterate apply(const Iterate& z, const Eigen::VectorXd& x0, Index first, Index last) const {
    const Index d = f_.in_dim();
    const Index l = y_.ref_dim();
    Iterate out = zero(first, last);
    for (Index j = 0; first + j <= last; ++j) {
      const Index k = first + j;
      const Eigen::VectorXd xk = x0 + z.values.col(j);
      check_state(xk, k);
      const Eigen::MatrixXd fk = f_.value(xk);
      Eigen::Map<Eigen::MatrixXd>(out.derivs.col(j).data(), d, l).noalias() = fk * y_.deriv(k);
      if (k == last) break;
      const Eigen::Map<const Eigen::MatrixXd> zp(z.derivs.col(j).data(), d, l);
      out.values.col(j + 1) = out.values.col(j) + step_increment(f_, y_, k, xk, fk, zp);
    }
    return out;
  }

  /// Controlled norm of a - b on [first, last], plus |z'_first| so that paths
  /// with constant nonzero Gubinelli derivative are not at distance zero.
  double distance(const Iterate& a, const Iterate& b, Index first, Index last) const {
    const Iterate diff{a.values - b.values, a.derivs - b.derivs};
    return norm(diff, first, last);
  }

  double norm(const Iterate& z, Index first, Index last) const {
    if (z.values.isZero(0.0) && z.derivs.isZero(0.0)) return 0.0;
    const Index d = f_.in_dim();
    const Index l = y_.ref_dim();
    const double alpha = ref_.alpha();
    const Eigen::MatrixXd& path = ref_.path();
    const Index off = first;
    auto zp_pair = [&](Index i, Index j) {
      const double* a = z.derivs.col(i - off).data();
      const double* b = z.derivs.col(j - off).data();
      double acc = 0.0;
      for (Index r = 0; r < d * l; ++r) acc += (b[r] - a[r]) * (b[r] - a[r]);
      return std::sqrt(acc);
    };
    auto rem_pair = [&](Index i, Index j) {
      const double* zp = z.derivs.col(i - off).data();  // column-major d x l
      const double* vi = z.values.col(i - off).data();
      const double* vj = z.values.col(j - off).data();
      const double* xi = path.col(i).data();
      const double* xj = path.col(j).data();
      double acc = 0.0;
      for (Index r = 0; r < d; ++r) {
        double e = vj[r] - vi[r];
        for (Index c = 0; c < l; ++c) e -= zp[r + c * d] * (xj[c] - xi[c]);
        acc += e * e;
      }
      return std::sqrt(acc);
    };
    double total = z.values.col(0).norm() + z.derivs.col(0).norm();
    total += holder_norm_pairs(ref_.grid(), first, last, alpha, zp_pair).norm;
    total += holder_norm_pairs(ref_.grid(), first, last, 2.0 * alpha, rem_pair).norm;
    return total;
  }

  /// Lower bound of the controlled norm from consecutive pairs only.
  double lag_one_bound(const Iterate& a, const Iterate& b, Index first, Index last) const {
    const Index d = f_.in_dim();
    const Index l = y_.ref_dim();
    const double alpha = ref_.alpha();
    double zp_sup = 0.0;
    double rem_sup = 0.0;
    for (Index k = first; k < last; ++k) {
      const Index j = k - first;
      const double dt = ref_.grid().t(k + 1) - ref_.grid().t(k);
      const Eigen::VectorXd dzp0 = a.derivs.col(j) - b.derivs.col(j);
      const Eigen::VectorXd dzp1 = a.derivs.col(j + 1) - b.derivs.col(j + 1);
      zp_sup = std::max(zp_sup, (dzp1 - dzp0).norm() / std::pow(dt, alpha));
      const Eigen::Map<const Eigen::MatrixXd> zp(dzp0.data(), d, l);
      const Eigen::VectorXd inc =
          (a.values.col(j + 1) - b.values.col(j + 1)) - (a.values.col(j) - b.values.col(j));
      rem_sup = std::max(rem_sup, (inc - zp * ref_.increment(k, k + 1)).norm() /
                                      std::pow(dt, 2.0 * alpha));
    }
    return zp_sup + rem_sup + (a.derivs.col(0) - b.derivs.col(0)).norm();
  }

 private:
  const OneForm& f_;
  const ControlledPath& y_;
  const RoughPath& ref_;
};

bool identical(const Iterate& a, const Iterate& b) {
  return a.values == b.values && a.derivs == b.derivs;
}

ControlledPath davie_sweep(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0) {
  const Index d = f.in_dim();
  const Index l = y.ref_dim();
  const Index n = y.size();
  Eigen::MatrixXd values(d, n);
  Eigen::MatrixXd derivs(d * l, n);
  values.col(0) = x0;
  for (Index k = 0; k < n; ++k) {
    const Eigen::VectorXd xk = values.col(k);
    check_state(xk, k);
    const Eigen::MatrixXd fk = f.value(xk);
    Eigen::Map<Eigen::MatrixXd> xp(derivs.col(k).data(), d, l);
    xp.noalias() = fk * y.deriv(k);
    if (k + 1 < n) values.col(k + 1) = xk + step_increment(f, y, k, xk, fk, xp);
  }
  return {y.reference(), std::move(values), std::move(derivs)};
}

template <class S>
Vec<S> unit(Index n, Index i) {
  Vec<S> e = Vec<S>::Constant(n, S(0.0));
  e(i) = S(1.0);
  return e;
}

}  // namespace

int Solution::total_iterations() const {
  int total = 0;
  for (const auto& p : patches) total += p.iterations;
  return total;
}

ControlledPath picard_map(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0,
                          const ControlledPath& z) {
  require(z.same_reference(y), "picard_map: z and y are controlled by different references");
  require(z.dim() == x0.size(), "picard_map: z dimension differs from x0");
  return rough_integral_oneform(f, z.shifted(x0), y);
}

Solution solve_picard(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0,
                      double tol, int max_iter) {
  check_driver(f, y, x0);
  require(tol > 0.0, "solve_picard: tol must be positive");
  require(max_iter >= 1, "solve_picard: max_iter must be positive");
  const Index d = f.in_dim();
  const Index l = y.ref_dim();
  const Index steps = y.grid().steps();
  const PicardEngine engine(f, y);

  Eigen::MatrixXd values(d, y.size());
  Eigen::MatrixXd derivs(d * l, y.size());
  Solution sol{ControlledPath(y.reference(), Eigen::MatrixXd::Zero(d, y.size()),
                              Eigen::MatrixXd::Zero(d * l, y.size())),
               {},
               Method::picard};

  Index first = 0;
  Index attempt = steps;
  Eigen::VectorXd start = x0;
  while (first < steps) {
    Index len = std::min(attempt, steps - first);
    Iterate prev, cur;
    double factor = 0.0;
    double dist = 0.0;
    int it = 0;
    while (true) {
      const Index last = first + len;
      Iterate z1 = engine.apply(engine.zero(first, last), start, first, last);
      if (engine.norm(z1, first, last) < tol) {
        cur = std::move(z1);
        it = 1;
        factor = 0.0;
        dist = 0.0;
        break;
      }
      Iterate z2 = engine.apply(z1, start, first, last);
      const double d12 = identical(z2, z1) ? 0.0 : engine.distance(z2, z1, first, last);
      if (d12 < tol) {
        cur = std::move(z2);
        it = 2;
        factor = 0.0;
        dist = d12;
        break;
      }
      Iterate z3 = engine.apply(z2, start, first, last);
      const double d23 = identical(z3, z2) ? 0.0 : engine.distance(z3, z2, first, last);
      factor = d23 / d12;
      if (!std::isfinite(factor)) throw DivergenceError("Picard probe produced a non-finite ratio");
      if (factor < 0.5 || len == 1) {
        if (factor >= 1.0)
          throw DivergenceError("Picard map does not contract on a single grid step at node " +
                                std::to_string(first));
        prev = std::move(z2);
        cur = std::move(z3);
        it = 3;
        dist = d23;
        break;
      }
      len = (len + 1) / 2;
    }
    const Index last = first + len;
    while (!(dist < tol)) {
      if (it >= max_iter)
        throw ConvergenceError("Picard iteration did not reach tol " + std::to_string(tol) +
                               " within " + std::to_string(max_iter) + " iterations");
      prev = std::move(cur);
      cur = engine.apply(prev, start, first, last);
      ++it;
      if (identical(cur, prev)) {
        dist = 0.0;
      } else if (engine.lag_one_bound(cur, prev, first, last) >= tol) {
        dist = tol;
      } else {
        dist = engine.distance(cur, prev, first, last);
      }
    }
    const PatchRecord rec{first, last, factor, it};
    const Iterate& result = cur;
    for (Index j = 0; first + j <= last; ++j) {
      values.col(first + j) = start + result.values.col(j);
      derivs.col(first + j) = result.derivs.col(j);
    }
    sol.patches.push_back(rec);
    start = values.col(last);
    first = last;
    attempt = std::min(2 * len, steps);
  }
  sol.x = ControlledPath(y.reference(), std::move(values), std::move(derivs));
  return sol;
}

Solution solve_davie(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0) {
  check_driver(f, y, x0);
  return {davie_sweep(f, y, x0), {}, Method::davie};
}

Solution solve_davie(const OneForm& f, const RoughPathPtr& x, const Eigen::VectorXd& x0) {
  return solve_davie(f, from_reference(x), x0);
}

Solution solve(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0,
               const SolveOptions& options) {
  if (options.method == Method::davie) return solve_davie(f, y, x0);
  return solve_picard(f, y, x0, options.tol, options.max_iter);
}

// ---------------------------------------------------------------- derivative flow

Eigen::MatrixXd DerivativeFlow::u_at(Index k) const {
  const Index d = solution.x.dim();
  return Eigen::Map<const Eigen::MatrixXd>(u.values().col(k).data(), d, d);
}

Eigen::MatrixXd DerivativeFlow::u_inv_at(Index k) const {
  const Index d = solution.x.dim();
  return Eigen::Map<const Eigen::MatrixXd>(u_inv.values().col(k).data(), d, d);
}

namespace {

/// State (x, vec U, vec W); column a is [V_a; vec(J_a U); vec(-W J_a)] with
/// J_a the Jacobian of the a-th column of F.
OneForm derivative_flow_field(const OneForm& f) {
  const Index d = f.in_dim();
  const Index l = f.cols();
  const Index n = d + 2 * d * d;
  return MatrixField::generic(
      n, n, l,
      [f, d, l, n](const auto& xi) {
        using S = typename std::decay_t<decltype(xi)>::Scalar;
        const Vec<S> x = xi.head(d);
        const Eigen::Map<const Mat<S>> u(xi.data() + d, d, d);
        const Eigen::Map<const Mat<S>> w(xi.data() + d + d * d, d, d);
        const Mat<S> fx = f(x);
        std::vector<Mat<S>> partial;
        partial.reserve(static_cast<std::size_t>(d));
        for (Index i = 0; i < d; ++i) partial.push_back(f.derivative(x, unit<S>(d, i)));
        Mat<S> out(n, l);
        Mat<S> jac(d, d);
        for (Index a = 0; a < l; ++a) {
          for (Index i = 0; i < d; ++i) jac.col(i) = partial[static_cast<std::size_t>(i)].col(a);
          const Mat<S> ju = jac * u;
          const Mat<S> wj = -(w * jac);
          out.col(a).head(d) = fx.col(a);
          out.col(a).segment(d, d * d) = Eigen::Map<const Vec<S>>(ju.data(), d * d);
          out.col(a).tail(d * d) = Eigen::Map<const Vec<S>>(wj.data(), d * d);
        }
        return out;
      },
      f.max_level() - 1, "derivative-flow(" + f.name() + ")");
}

}  // namespace

DerivativeFlow derivative_flow(const OneForm& f, const RoughPathPtr& x, const Eigen::VectorXd& x0) {
  require(f.max_level() >= 2, "derivative_flow: one-form must be at least C^3");
  const Index d = f.in_dim();
  Eigen::VectorXd start = Eigen::VectorXd::Zero(d + 2 * d * d);
  start.head(d) = x0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  start.segment(d, d * d) = Eigen::Map<const Eigen::VectorXd>(eye.data(), d * d);
  start.tail(d * d) = start.segment(d, d * d);
  const Solution joint = solve_davie(derivative_flow_field(f), x, start);
  return {Solution{joint.x.block(0, d), {}, Method::davie}, joint.x.block(d, d * d),
          joint.x.block(d + d * d, d * d)};
}

// ---------------------------------------------------------------- variations

OneForm variation_field(const OneForm& f) {
  const Index d = f.in_dim();
  const Index u = f.cols();
  return MatrixField::generic(
      2 * d, 2 * d, 2 * u,
      [f, d, u](const auto& xi) {
        using S = typename std::decay_t<decltype(xi)>::Scalar;
        const Vec<S> x = xi.head(d);
        const Vec<S> v = xi.tail(d);
        const Mat<S> fx = f(x);
        Mat<S> out = Mat<S>::Constant(2 * d, 2 * u, S(0.0));
        out.topLeftCorner(d, u) = fx;
        out.bottomLeftCorner(d, u) = f.derivative(x, v);
        out.bottomRightCorner(d, u) = fx;
        return out;
      },
      f.max_level() - 1, "variation(" + f.name() + ")");
}

OneForm variation_field(const OneForm& f, const OneForm& df) {
  require(df.in_dim() == f.in_dim() && df.rows() == f.rows() && df.cols() == f.cols(),
          "directional_derivative_F: dF must have the shape of F");
  const Index d = f.in_dim();
  const Index u = f.cols();
  return MatrixField::generic(
      2 * d, 2 * d, u,
      [f, df, d, u](const auto& xi) {
        using S = typename std::decay_t<decltype(xi)>::Scalar;
        const Vec<S> x = xi.head(d);
        const Vec<S> w = xi.tail(d);
        Mat<S> out(2 * d, u);
        out.topRows(d) = f(x);
        out.bottomRows(d) = f.derivative(x, w);
        out.bottomRows(d) += df(x);
        return out;
      },
      std::min(f.max_level() - 1, df.max_level()), "variation(" + f.name() + ", " + df.name() + ")");
}

OneForm second_variation_field(const OneForm& f) {
  const Index d = f.in_dim();
  const Index u = f.cols();
  return MatrixField::generic(
      3 * d, 3 * d, 2 * u,
      [f, d, u](const auto& xi) {
        using S = typename std::decay_t<decltype(xi)>::Scalar;
        const Vec<S> x = xi.head(d);
        const Vec<S> v = xi.segment(d, d);
        const Vec<S> v2 = xi.tail(d);
        const Mat<S> fx = f(x);
        const Mat<S> dfv = f.derivative(x, v);
        Mat<S> out = Mat<S>::Constant(3 * d, 2 * u, S(0.0));
        out.block(0, 0, d, u) = fx;
        out.block(d, 0, d, u) = dfv;
        out.block(d, u, d, u) = fx;
        out.block(2 * d, 0, d, u) = f.derivative(x, v2);
        out.block(2 * d, 0, d, u) += f.second_derivative(x, v, v);
        out.block(2 * d, u, d, u) = S(2.0) * dfv;
        return out;
      },
      f.max_level() - 2, "second-variation(" + f.name() + ")");
}

ControlledPath directional_derivative_y(const OneForm& f, const ControlledPath& y,
                                        const Eigen::VectorXd& x0, const ControlledPath& h,
                                        const SolveOptions& options) {
  require(h.same_reference(y), "directional_derivative_y: h and y are controlled by different references");
  require(h.dim() == y.dim(), "directional_derivative_y: h and y differ in dimension");
  require(f.max_level() >= 2, "directional_derivative_y: one-form must be at least C^3");
  const Index d = f.in_dim();
  Eigen::VectorXd start = Eigen::VectorXd::Zero(2 * d);
  start.head(d) = x0;
  const Solution joint = solve(variation_field(f), stack(y, h), start, options);
  return joint.x.block(d, d);
}

ControlledPath directional_derivative_F(const OneForm& f, const ControlledPath& y,
                                        const Eigen::VectorXd& x0, const OneForm& df,
                                        const SolveOptions& options) {
  require(f.max_level() >= 2, "directional_derivative_F: one-form must be at least C^3");
  require(df.max_level() >= 1, "directional_derivative_F: dF must be at least C^2");
  const Index d = f.in_dim();
  Eigen::VectorXd start = Eigen::VectorXd::Zero(2 * d);
  start.head(d) = x0;
  const Solution joint = solve(variation_field(f, df), y, start, options);
  return joint.x.block(d, d);
}

SecondVariation second_directional_derivative_y(const OneForm& f, const ControlledPath& y,
                                                const Eigen::VectorXd& x0, const ControlledPath& h,
                                                const SolveOptions& options) {
  require(h.same_reference(y), "second_directional_derivative_y: h and y are controlled by different references");
  require(h.dim() == y.dim(), "second_directional_derivative_y: h and y differ in dimension");
  require(f.max_level() >= 3, "second_directional_derivative_y: one-form must be at least C^4");
  const Index d = f.in_dim();
  Eigen::VectorXd start = Eigen::VectorXd::Zero(3 * d);
  start.head(d) = x0;
  const Solution joint = solve(second_variation_field(f), stack(y, h), start, options);
  return {joint.x.block(d, d), joint.x.block(2 * d, d)};
}

double picard_derivative_norm_estimate(const OneForm& f, const ControlledPath& y,
                                       const Eigen::VectorXd& x0, const ControlledPath& z,
                                       int probes, std::uint64_t seed) {
  require(probes >= 1, "picard_derivative_norm_estimate: need at least one probe");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const ControlledPath base = picard_map(f, y, x0, z);
  const ControlledPath xref = from_reference(z.reference());
  constexpr double kStep = 1e-6;
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Eigen::MatrixXd a(z.dim(), z.ref_dim());
    for (Index i = 0; i < a.size(); ++i) a(i) = g(rng);
    Eigen::MatrixXd values = a * z.reference()->path();
    values.colwise() -= values.col(0);
    Eigen::MatrixXd derivs =
        Eigen::Map<const Eigen::VectorXd>(a.data(), a.size()).replicate(1, z.size());
    ControlledPath dir(z.reference(), std::move(values), std::move(derivs));
    const double n = controlled_norm_with_derivative(dir);
    if (n == 0.0) continue;
    dir *= kStep / n;
    const ControlledPath moved = picard_map(f, y, x0, z + dir);
    worst = std::max(worst, controlled_norm_with_derivative(moved - base) / kStep);
  }
  return worst;
}

// ---------------------------------------------------------------- Taylor

MatrixField OneFormFamily::joint() const {
  if (!drift.valid()) return sigma;
  require(drift.in_dim() == sigma.in_dim() && drift.rows() == sigma.rows(),
          "family: drift and sigma must share input and output dimensions");
  return hconcat(sigma, drift);
}

OneForm OneFormFamily::at(double eps) const {
  const MatrixField j = joint();
  const Index d = state_dim();
  return MatrixField::generic(
      d, j.rows(), j.cols(),
      [j, d, eps](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        Vec<S> xi(d + 1);
        xi.head(d) = x;
        xi(d) = S(eps);
        return j(xi);
      },
      j.max_level(), j.name());
}

OneForm taylor_jet_field(const MatrixField& family, int order) {
  require(order >= 0 && order <= 2, "taylor_expand: only orders 0, 1 and 2 are supported");
  const Index d = family.in_dim() - 1;
  require(d >= 1 && family.rows() == d, "taylor_expand: family must map R^{d+1} to L(R^l, R^d)");
  const Index cols = family.cols();
  const Index n = d * (order + 1);
  return MatrixField::generic(
      n, n, cols,
      [family, d, order, n, cols](const auto& state) {
        using S = typename std::decay_t<decltype(state)>::Scalar;
        Vec<S> xi = Vec<S>::Constant(d + 1, S(0.0));
        xi.head(d) = state.head(d);
        Mat<S> out(n, cols);
        out.topRows(d) = family(xi);
        if (order >= 1) {
          Vec<S> u1 = Vec<S>::Constant(d + 1, S(0.0));
          u1.head(d) = state.segment(d, d);
          u1(d) = S(1.0);
          out.middleRows(d, d) = family.derivative(xi, u1);
          if (order == 2) {
            Vec<S> u2 = Vec<S>::Constant(d + 1, S(0.0));
            u2.head(d) = state.tail(d);
            out.bottomRows(d) = family.derivative(xi, u2);
            out.bottomRows(d) += family.second_derivative(xi, u1, u1);
          }
        }
        return out;
      },
      family.max_level() - order, "taylor-jet(" + family.name() + ")");
}

TaylorResult taylor_expand(const OneFormFamily& family, const Eigen::MatrixXd& lambda_samples,
                           const RoughPath& x, const Eigen::VectorXd& x0, int order,
                           const std::vector<double>& epsilons, const SolveOptions& options) {
  require(order >= 0 && order <= 2, "taylor_expand: order above 2 is unsupported");
  require(family.sigma.valid(), "taylor_expand: family has no sigma");
  const Index d = family.state_dim();
  require(x0.size() == d, "taylor_expand: x0 dimension differs from the family");
  require(family.sigma.cols() == x.dim(), "taylor_expand: sigma columns differ from the driver dimension");
  const bool has_drift = family.drift.valid() && lambda_samples.rows() > 0;
  if (has_drift)
    require(family.drift.cols() == lambda_samples.rows(),
            "taylor_expand: drift columns differ from the Lambda dimension");
  const MatrixField joint = has_drift ? hconcat(family.sigma, family.drift) : family.sigma;
  require(joint.max_level() >= order + 1, "taylor_expand: family is not smooth enough in (x, eps)");

  TaylorResult result;
  result.driver = has_drift ? std::make_shared<const RoughPath>(joint_lift(x, lambda_samples))
                            : std::make_shared<const RoughPath>(x);
  const ControlledPath y = from_reference(result.driver);

  Eigen::VectorXd start = Eigen::VectorXd::Zero(d * (order + 1));
  start.head(d) = x0;
  const Solution jet = solve(taylor_jet_field(joint, order), y, start, options);
  double factorial = 1.0;
  for (int i = 0; i <= order; ++i) {
    if (i > 0) factorial *= i;
    result.terms.push_back((1.0 / factorial) * jet.x.block(i * d, d));
  }

  const OneFormFamily eval_family{family.sigma, has_drift ? family.drift : MatrixField{}};
  result.epsilons.resize(static_cast<Index>(epsilons.size()));
  result.residuals.resize(static_cast<Index>(epsilons.size()));
  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    const double eps = epsilons[e];
    const Solution sol = solve(eval_family.at(eps), y, x0, options);
    Eigen::MatrixXd approx = Eigen::MatrixXd::Zero(d, y.size());
    double power = 1.0;
    for (int i = 0; i <= order; ++i) {
      approx += power * result.terms[static_cast<std::size_t>(i)].values();
      power *= eps;
    }
    result.epsilons(static_cast<Index>(e)) = eps;
    result.residuals(static_cast<Index>(e)) = sup_distance(sol.x.values(), approx);
  }
  if (result.epsilons.size() >= 2 && (result.residuals.array() > 0.0).all())
    result.fit = fit_line(result.epsilons.array().log().matrix(),
                          result.residuals.array().log().matrix());
  return result;
}

double sup_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sup_distance: shape mismatch");
  if (a.cols() == 0) return 0.0;
  return (a - b).colwise().norm().maxCoeff();
}

}  // namespace roughflow

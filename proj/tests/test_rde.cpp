#include "doctest.h"
#include "roughflow/rde.hpp"
#include "support.hpp"

using namespace roughflow;

namespace {

/// phi(x) = x^2 on R^1, giving h_t = g_t^2 with h_0 = 0 when g_0 = 0.
SmoothMap square_map() {
  return MatrixField::generic(
      1, 1, 1,
      [](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        return Mat<S>::Constant(1, 1, x(0) * x(0));
      },
      kMaxJetLevel, "square");
}

SmoothMap sine_map() {
  return MatrixField::generic(
      1, 1, 1,
      [](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        using std::sin;
        return Mat<S>::Constant(1, 1, sin(x(0)));
      },
      kMaxJetLevel, "sine");
}

/// FD remainders |J(eps) - J(0) - eps v| / eps over the given eps values.
template <class Solve>
std::vector<double> fd_remainders(Solve&& solve_at, const Eigen::MatrixXd& base,
                                  const Eigen::MatrixXd& v, const std::vector<double>& eps) {
  std::vector<double> out;
  for (double e : eps) out.push_back(sup_distance(solve_at(e), base + e * v) / e);
  return out;
}

const std::vector<double> kEps{1e-1, 1e-2, 1e-3, 1e-4};

}  // namespace

TEST_CASE("zero field") {
  const RoughPathPtr x = rftest::samples_lift(rftest::brownian(2, 64, 1), 0.45);
  const ControlledPath y = from_reference(x);
  const Eigen::Vector3d x0(1.0, -2.0, 0.5);
  const Solution p = solve_picard(zero_field(3, 3, 2), y, x0);
  CHECK(p.total_iterations() == 1);
  CHECK(p.patches.size() == 1);
  for (Index k = 0; k < y.size(); ++k) CHECK(p.x.value(k) == x0);
  const Solution d = solve_davie(zero_field(3, 3, 2), x, x0);
  CHECK(d.x.values() == p.x.values());
  const ControlledPath phi = picard_map(zero_field(3, 3, 2), y, x0, from_constant(x0, x));
  CHECK(phi.values().norm() == 0.0);
  CHECK(phi.derivs().norm() == 0.0);
}

TEST_CASE("scalar linear field gives the exponential") {
  const RoughPathPtr s = rftest::smooth_lift("sin", 4096);
  const ControlledPath y = from_reference(s);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  const Solution p = solve_picard(scalar_linear_field(), y, x0);
  const Solution d = solve_davie(scalar_linear_field(), s, x0);
  const double exact = std::exp(std::sin(1.0));
  CHECK(std::abs(p.x.value(4096)(0) - exact) < 1e-6);
  CHECK(std::abs(d.x.value(4096)(0) - exact) < 1e-5);
  // x' = F(x) y' = x.
  for (Index k = 0; k <= 4096; k += 128) CHECK(std::abs(p.x.deriv(k)(0, 0) - p.x.value(k)(0)) < 1e-8);
  // The Picard fixed point on a grid is the two-term recursion.
  CHECK(sup_distance(p.x.values(), d.x.values()) < 1e-10);
}

TEST_CASE("rotation field preserves the circle") {
  const RoughPathPtr t = rftest::smooth_lift("linear", 4096);
  const Solution p = solve_picard(rotation_field(), from_reference(t), Eigen::Vector2d(1.0, 0.0));
  CHECK((p.x.value(4096) - Eigen::Vector2d(std::cos(1.0), std::sin(1.0))).norm() < 1e-6);
  double worst = 0.0;
  for (Index k = 0; k <= 4096; ++k) worst = std::max(worst, std::abs(p.x.value(k).norm() - 1.0));
  CHECK(worst < 1e-8);
}

TEST_CASE("fixed-point residual and derivative identity on a rough driver") {
  const RoughPathPtr x = rftest::samples_lift(rftest::brownian(2, 512, 2), 0.45);
  const ControlledPath y = from_reference(x);
  const OneForm f = sin_bounded_field(2);
  const Eigen::Vector2d x0(0.3, -0.4);
  const double tol = 1e-11;
  const Solution sol = solve_picard(f, y, x0, tol);
  const ControlledPath z = sol.x.shifted(-x0);
  const ControlledPath phi = picard_map(f, y, x0, z);
  CHECK(controlled_norm(phi - z) < tol);
  for (Index k = 0; k <= 512; k += 16)
    CHECK((sol.x.deriv(k) - f.value(sol.x.value(k))).norm() < 1e-8);
  for (const auto& patch : sol.patches) {
    CHECK(patch.contraction < 0.5);
    CHECK(patch.last > patch.first);
  }
  CHECK(sol.patches.front().first == 0);
  CHECK(sol.patches.back().last == 512);
  CHECK(sup_distance(sol.x.values(), solve_davie(f, x, x0).x.values()) < 1e-9);
}

TEST_CASE("Picard map contracts on a short interval") {
  const Grid grid = Grid::uniform(64, 0.05);
  const RoughPathPtr x = rftest::share(lift_piecewise_linear(grid, smooth_driver_samples("sin", grid), 0.5));
  const ControlledPath y = from_reference(x);
  const OneForm f = sin_bounded_field(1);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 0.2);
  const ControlledPath z1 = compose_smooth(square_map(), y);
  const ControlledPath z2 = 0.5 * y - 2.0 * z1;
  const double ratio = controlled_norm_with_derivative(picard_map(f, y, x0, z1) - picard_map(f, y, x0, z2)) /
                       controlled_norm_with_derivative(z1 - z2);
  CHECK(ratio < 1.0);
  CHECK(picard_derivative_norm_estimate(f, y, x0, z1) < 1.0);
  // A longer horizon gives a larger derivative bound.
  const ControlledPath yl = from_reference(rftest::smooth_lift("sin", 64));
  CHECK(picard_derivative_norm_estimate(f, yl, x0, compose_smooth(square_map(), yl)) >
        picard_derivative_norm_estimate(f, y, x0, z1));
}

TEST_CASE("failure modes") {
  const RoughPathPtr t = rftest::smooth_lift("linear", 256);
  const OneForm quad = MatrixField::generic(
      1, 1, 1,
      [](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        return Mat<S>::Constant(1, 1, S(5.0) * x(0) * x(0));
      },
      kMaxJetLevel, "quadratic");
  CHECK_THROWS_AS(solve_davie(quad, t, Eigen::VectorXd::Ones(1)), DivergenceError);
  CHECK_THROWS_AS(solve_picard(quad, from_reference(t), Eigen::VectorXd::Ones(1)), NumericalError);
  const RoughPathPtr s = rftest::smooth_lift("sin", 256);
  CHECK_THROWS_AS(solve_picard(scalar_linear_field(), from_reference(s), Eigen::VectorXd::Ones(1), 1e-300, 3),
                  ConvergenceError);
  CHECK_THROWS_AS(solve_picard(scalar_linear_field(), from_reference(s), Eigen::VectorXd::Ones(2)), InputError);
}

TEST_CASE("derivative flow") {
  const RoughPathPtr x = rftest::samples_lift(rftest::brownian(2, 256, 3), 0.45);
  SUBCASE("constant field") {
    const DerivativeFlow flow = derivative_flow(constant_field(2, Eigen::Matrix2d::Identity()), x,
                                                Eigen::Vector2d(1.0, 2.0));
    for (Index k = 0; k <= 256; k += 8) {
      CHECK((flow.u_at(k) - Eigen::Matrix2d::Identity()).norm() == 0.0);
      CHECK((flow.u_inv_at(k) - Eigen::Matrix2d::Identity()).norm() == 0.0);
    }
  }
  SUBCASE("scalar linear field") {
    const RoughPathPtr s = rftest::smooth_lift("sin", 2048);
    const DerivativeFlow flow = derivative_flow(scalar_linear_field(), s, Eigen::VectorXd::Ones(1));
    for (Index k = 0; k <= 2048; k += 64) {
      const double g = std::sin(s->grid().t(k));
      CHECK(std::abs(flow.u_at(k)(0, 0) - std::exp(g)) < 1e-6);
      CHECK(std::abs(flow.u_at(k)(0, 0) * flow.u_inv_at(k)(0, 0) - 1.0) < 1e-6);
    }
  }
  SUBCASE("rotation field keeps det U = 1") {
    const RoughPathPtr t = rftest::smooth_lift("sin", 1024);
    const DerivativeFlow flow = derivative_flow(rotation_field(), t, Eigen::Vector2d(1.0, 0.0));
    for (Index k = 0; k <= 1024; k += 32) {
      CHECK(flow.u_at(k).determinant() > 0.0);
      CHECK(std::abs(flow.u_at(k).determinant() - 1.0) < 1e-6);
      CHECK((flow.u_at(k) * flow.u_inv_at(k) - Eigen::Matrix2d::Identity()).norm() < 1e-6);
    }
  }
  SUBCASE("Jacobian against finite differences of the solve") {
    const OneForm f = sin_bounded_field(2);
    const Eigen::Vector2d x0(0.1, 0.2);
    const DerivativeFlow flow = derivative_flow(f, x, x0);
    const double h = 1e-6;
    for (Index c = 0; c < 2; ++c) {
      const Eigen::Vector2d e = Eigen::Vector2d::Unit(c);
      const Eigen::MatrixXd fd =
          (solve_davie(f, x, x0 + h * e).x.values() - solve_davie(f, x, x0 - h * e).x.values()) / (2 * h);
      for (Index k = 0; k <= 256; k += 32) CHECK((fd.col(k) - flow.u_at(k).col(c)).norm() < 1e-6);
    }
  }
}

TEST_CASE("directional derivative in the driver: closed form and FD order") {
  const RoughPathPtr s = rftest::smooth_lift("sin", 2048);
  const ControlledPath y = from_reference(s);
  const ControlledPath h = compose_smooth(square_map(), y);  // h_t = sin(t)^2
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 1.5);
  const OneForm f = scalar_linear_field();
  const ControlledPath v = directional_derivative_y(f, y, x0, h);
  for (Index k = 0; k <= 2048; k += 64) {
    const double g = std::sin(s->grid().t(k));
    CHECK(std::abs(v.value(k)(0) - 1.5 * std::exp(g) * g * g) < 1e-6);
  }
  const Eigen::MatrixXd base = solve_picard(f, y, x0).x.values();
  const auto rem = fd_remainders(
      [&](double e) { return solve_picard(f, y + e * h, x0).x.values(); }, base, v.values(), kEps);
  CHECK(rftest::loglog_slope(kEps, rem) >= 0.9);

  CHECK(directional_derivative_y(zero_field(1, 1, 1), y, x0, h).values().norm() == 0.0);
}

TEST_CASE("directional derivatives on the rotation field") {
  const RoughPathPtr s = rftest::smooth_lift("sin", 1024);
  const ControlledPath y = from_reference(s);
  const ControlledPath h = compose_smooth(sine_map(), y);
  const OneForm f = rotation_field();
  const Eigen::Vector2d x0(1.0, 0.0);
  const Eigen::MatrixXd base = solve_picard(f, y, x0).x.values();
  const ControlledPath v = directional_derivative_y(f, y, x0, h);
  const auto rem_y = fd_remainders(
      [&](double e) { return solve_picard(f, y + e * h, x0).x.values(); }, base, v.values(), kEps);
  CHECK(rftest::loglog_slope(kEps, rem_y) >= 0.9);

  Eigen::Matrix2d sym;
  sym << 0.3, 0.1, 0.1, -0.2;
  const OneForm df = linear_field({sym});
  const ControlledPath w = directional_derivative_F(f, y, x0, df);
  const auto rem_f = fd_remainders(
      [&](double e) { return solve_picard(f + e * df, y, x0).x.values(); }, base, w.values(), kEps);
  CHECK(rftest::loglog_slope(kEps, rem_f) >= 0.9);
}

TEST_CASE("directional derivative in the one-form") {
  const RoughPathPtr x = rftest::samples_lift(rftest::brownian(2, 256, 4), 0.45);
  const ControlledPath y = from_reference(x);
  const Eigen::Vector2d x0(0.5, 0.5);
  CHECK(directional_derivative_F(sin_bounded_field(2), y, x0, zero_field(2, 2, 2)).values().norm() == 0.0);

  Eigen::Matrix2d l;
  l << 1.0, -0.5, 0.25, 2.0;
  const ControlledPath w = directional_derivative_F(zero_field(2, 2, 2), y, x0, constant_field(2, l));
  for (Index k = 0; k <= 256; k += 16) CHECK((w.value(k) - l * x->increment(0, k)).norm() < 1e-12);

  // FD order on the scalar linear field with a nonlinear perturbation.
  const RoughPathPtr s = rftest::smooth_lift("sin", 1024);
  const ControlledPath ys = from_reference(s);
  const OneForm f = scalar_linear_field();
  const OneForm df = sin_bounded_field(1);
  const Eigen::VectorXd x1 = Eigen::VectorXd::Ones(1);
  const ControlledPath ws = directional_derivative_F(f, ys, x1, df);
  const Eigen::MatrixXd base = solve_picard(f, ys, x1).x.values();
  const auto rem = fd_remainders(
      [&](double e) { return solve_picard(f + e * df, ys, x1).x.values(); }, base, ws.values(), kEps);
  CHECK(rftest::loglog_slope(kEps, rem) >= 0.9);
}

TEST_CASE("directional derivatives are linear") {
  const RoughPathPtr x = rftest::samples_lift(rftest::brownian(2, 256, 5), 0.45);
  const ControlledPath y = from_reference(x);
  const OneForm f = sin_bounded_field(2);
  const Eigen::Vector2d x0(0.1, -0.3);
  const ControlledPath h1 = compose_smooth(MatrixField::generic(
                                               2, 2, 1,
                                               [](const auto& z) {
                                                 using S = typename std::decay_t<decltype(z)>::Scalar;
                                                 using std::sin;
                                                 Mat<S> out(2, 1);
                                                 out(0, 0) = sin(z(0)) * z(1);
                                                 out(1, 0) = z(0);
                                                 return out;
                                               },
                                               kMaxJetLevel, "h1"),
                                           y);
  const ControlledPath h2 = y;
  const ControlledPath v1 = directional_derivative_y(f, y, x0, h1);
  const ControlledPath v2 = directional_derivative_y(f, y, x0, h2);
  const ControlledPath v12 = directional_derivative_y(f, y, x0, 2.0 * h1 + h2);
  CHECK(sup_distance(v12.values(), 2.0 * v1.values() + v2.values()) < 1e-10);

  const OneForm d1 = constant_field(2, Eigen::Matrix2d::Identity());
  const OneForm d2 = sin_bounded_field(2);
  const ControlledPath w1 = directional_derivative_F(f, y, x0, d1);
  const ControlledPath w2 = directional_derivative_F(f, y, x0, d2);
  const ControlledPath w12 = directional_derivative_F(f, y, x0, d1 + (-3.0) * d2);
  CHECK(sup_distance(w12.values(), w1.values() - 3.0 * w2.values()) < 1e-10);
}

TEST_CASE("second variation bounds the second-order remainder") {
  const RoughPathPtr x = rftest::samples_lift(rftest::brownian(2, 256, 6), 0.45);
  const ControlledPath y = from_reference(x);
  const SmoothMap phi = MatrixField::generic(
      2, 2, 1,
      [](const auto& z) {
        using S = typename std::decay_t<decltype(z)>::Scalar;
        using std::cos;
        Mat<S> out(2, 1);
        out(0, 0) = cos(z(1)) - S(1.0);
        out(1, 0) = z(0) * z(1);
        return out;
      },
      kMaxJetLevel, "h");
  const ControlledPath h = compose_smooth(phi, y);
  const OneForm f = sin_bounded_field(2);
  const Eigen::Vector2d x0(0.2, 0.1);
  const SecondVariation sv = second_directional_derivative_y(f, y, x0, h);
  const ControlledPath v = directional_derivative_y(f, y, x0, h);
  CHECK(sup_distance(sv.v.values(), v.values()) < 1e-10);
  const Eigen::MatrixXd base = solve_picard(f, y, x0).x.values();
  std::vector<double> ratios;
  for (double e : kEps) {
    const Eigen::MatrixXd moved = solve_picard(f, y + e * h, x0).x.values();
    ratios.push_back(sup_distance(moved, base + e * v.values() + 0.5 * e * e * sv.v2.values()) / (e * e));
  }
  // Third-order remainder: the ratio shrinks with eps instead of blowing up.
  CHECK(ratios.back() <= ratios.front());
  CHECK(rftest::loglog_slope({kEps.begin(), kEps.end() - 1}, {ratios.begin(), ratios.end() - 1}) >= 0.9);
}

TEST_CASE("one-form regularity diagnostics") {
  const OneForm f = sin_bounded_field(2);
  const Eigen::Vector2d lo(-2.0, -2.0), hi(2.0, 2.0);
  CHECK(derivative_symmetry_defect(f, lo, hi) < 1e-10);
  const LipEstimate lip = lip_gamma_estimate(f, 2.5, lo, hi);
  CHECK(std::isfinite(lip.norm));
  CHECK(lip.derivative_norms(0) <= std::sqrt(2 * 1.5 * 1.5 + 2 * 0.3 * 0.3) + 1e-12);
  const Eigen::Vector3d box = Eigen::Vector3d::Constant(2.0);
  CHECK(derivative_symmetry_defect(random_smooth_field(3, 2, 4), -box, box) < 1e-10);
}

TEST_CASE("Taylor expansion of the scaled driver family") {
  // sigma(eps, x) = eps x: z^eps = exp(eps g).
  const MatrixField sigma = MatrixField::generic(
      2, 1, 1,
      [](const auto& xi) {
        using S = typename std::decay_t<decltype(xi)>::Scalar;
        return Mat<S>::Constant(1, 1, xi(1) * xi(0));
      },
      kMaxJetLevel, "scaled");
  const RoughPathPtr s = rftest::smooth_lift("sin", 1024);
  const std::vector<double> eps{1e-1, 1e-1 / std::sqrt(10.0), 1e-2, 1e-2 / std::sqrt(10.0), 1e-3};
  const TaylorResult res = taylor_expand({sigma, {}}, Eigen::MatrixXd(), *s, Eigen::VectorXd::Ones(1), 2, eps);
  REQUIRE(res.terms.size() == 3);
  for (Index k = 0; k <= 1024; k += 32) {
    const double g = std::sin(s->grid().t(k));
    CHECK(res.terms[0].value(k)(0) == 1.0);
    CHECK(std::abs(res.terms[1].value(k)(0) - g) < 1e-6);
    CHECK(std::abs(res.terms[2].value(k)(0) - 0.5 * g * g) < 1e-6);
  }
  CHECK(res.fit.slope >= 2.9);
}

TEST_CASE("Taylor expansion with a pure drift") {
  // sigma = 0, b = 1, Lambda_t = t.
  const MatrixField zero = zero_field(2, 1, 1);
  const MatrixField one = constant_field(2, Eigen::MatrixXd::Ones(1, 1));
  const RoughPathPtr s = rftest::smooth_lift("sin", 256);
  const Eigen::MatrixXd lambda = s->grid().nodes().transpose();
  const TaylorResult res = taylor_expand({zero, one}, lambda, *s, Eigen::VectorXd::Constant(1, 2.0), 2, {0.1, 0.01});
  for (Index k = 0; k <= 256; k += 16) {
    CHECK(std::abs(res.terms[0].value(k)(0) - (2.0 + s->grid().t(k))) < 1e-12);
    CHECK(res.terms[1].value(k)(0) == 0.0);
    CHECK(res.terms[2].value(k)(0) == 0.0);
  }
  CHECK(res.residuals.maxCoeff() < 1e-12);
  CHECK(res.driver->dim() == 2);
  CHECK_THROWS_AS(taylor_expand({zero, one}, lambda, *s, Eigen::VectorXd::Ones(1), 3, {0.1}), InputError);
}

TEST_CASE("eps-independent family has no higher Taylor terms") {
  const MatrixField sigma = MatrixField::generic(
      2, 1, 1,
      [](const auto& xi) {
        using S = typename std::decay_t<decltype(xi)>::Scalar;
        using std::cos;
        return Mat<S>::Constant(1, 1, cos(xi(0)));
      },
      kMaxJetLevel, "cos");
  const RoughPathPtr x = rftest::samples_lift(rftest::brownian(1, 256, 8), 0.45);
  const TaylorResult res = taylor_expand({sigma, {}}, Eigen::MatrixXd(), *x, Eigen::VectorXd::Zero(1), 2, {0.1, 0.01});
  CHECK(res.terms[1].values().norm() == 0.0);
  CHECK(res.terms[2].values().norm() == 0.0);
  CHECK(res.residuals.maxCoeff() == 0.0);
}

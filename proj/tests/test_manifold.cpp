#include <numbers>
#include <random>

#include "doctest.h"
#include "roughflow/manifold.hpp"
#include "support.hpp"

using namespace roughflow;

namespace {

/// Levi-Civita transport generator on the unit sphere along velocity v at y:
/// dT/dt = (v y^T - y v^T) T.
Eigen::MatrixXd sphere_generator(const Eigen::Vector3d& y, const Eigen::Vector3d& v) {
  return v * y.transpose() - y * v.transpose();
}

/// Frame transported along an analytic curve by fine-step RK4.
template <class Curve>
Eigen::MatrixXd rk4_frame(Curve&& curve, const Eigen::MatrixXd& t0, Index steps) {
  auto g = [&](double t, const Eigen::VectorXd& q) -> Eigen::VectorXd {
    const auto [y, v] = curve(t);
    const Eigen::Map<const Eigen::Matrix3d> frame(q.data());
    const Eigen::Matrix3d rhs = sphere_generator(y, v) * frame;
    return Eigen::Map<const Eigen::VectorXd>(rhs.data(), 9);
  };
  const Eigen::VectorXd q0 = Eigen::Map<const Eigen::VectorXd>(t0.data(), 9);
  const auto out = rftest::rk4(g, q0, 0.0, 1.0, steps, steps);
  return Eigen::Map<const Eigen::Matrix3d>(out.back().data());
}

ManifoldPath smooth_sphere(Index n) {
  return sphere_path(rftest::smooth_driver3(n), Eigen::Vector3d(0.0, 0.6, 0.8));
}

ManifoldPath brownian_sphere(Index n, std::uint64_t seed) {
  return sphere_path(rftest::samples_lift(rftest::brownian(3, n, seed), 0.45), Eigen::Vector3d::UnitZ());
}

Eigen::MatrixXd skew_k() {
  Eigen::Matrix3d k;
  k << 0.0, 0.4, -0.2, -0.4, 0.0, 0.7, 0.2, -0.7, 0.0;
  return k;
}

}  // namespace

TEST_CASE("sphere projector") {
  Eigen::Matrix3d expect = Eigen::Matrix3d::Zero();
  expect(0, 0) = expect(1, 1) = 1.0;
  CHECK((sphere_projector(Eigen::Vector3d::UnitZ()) - expect).norm() == 0.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    Eigen::Vector4d x(g(rng), g(rng), g(rng), g(rng));
    x.normalize();
    const Eigen::MatrixXd p = sphere_projector(x);
    CHECK((p * x).norm() < 1e-12);
    CHECK((p * p - p).norm() < 1e-12);
    CHECK((p - p.transpose()).norm() == 0.0);
    CHECK(std::abs(p.trace() - 3.0) < 1e-12);
  }
  CHECK_THROWS_AS(sphere_projector(Eigen::Vector3d::Zero()), InputError);
  CHECK(sphere_projector(Eigen::Vector3d(0.0, 0.0, 2.0)).norm() == 0.0);
  CHECK(sphere_projector(Eigen::Vector3d(0.0, 0.0, 0.3)).norm() == 0.0);
}

TEST_CASE("radial cutoff") {
  CHECK(radial_cutoff(1.0) == 1.0);
  CHECK(radial_cutoff(0.75) == 1.0);
  CHECK(radial_cutoff(1.25) == 1.0);
  CHECK(radial_cutoff(0.5) == 0.0);
  CHECK(radial_cutoff(1.6) == 0.0);
  double prev = 0.0;
  for (double r = 0.5; r <= 0.75; r += 0.01) {
    CHECK(radial_cutoff(r) >= prev);
    prev = radial_cutoff(r);
  }
  prev = 1.0;
  for (double r = 1.25; r <= 1.5; r += 0.01) {
    CHECK(radial_cutoff(r) <= prev);
    prev = radial_cutoff(r);
  }
  // Derivative of the damped projector against central differences.
  const ProjectorField p = sphere_projector_field(3);
  const Eigen::Vector3d x(0.2, 0.5, 1.3);  // |x| in the damping band
  const Eigen::Vector3d v(0.3, -1.0, 0.4);
  const double h = 1e-6;
  const Eigen::MatrixXd fd = (p.eval(x + h * v) - p.eval(x - h * v)) / (2 * h);
  CHECK((fd - p.deriv(x, v)).norm() < 1e-8);
  CHECK(derivative_symmetry_defect(p.field(), Eigen::Vector3d::Constant(0.3),
                                   Eigen::Vector3d::Constant(0.8)) < 1e-8);
}

TEST_CASE("manifold path validation and retraction") {
  const RoughPathPtr x = rftest::smooth_driver3(32);
  const ControlledPath off = from_constant(Eigen::Vector3d(0.0, 0.0, 1.1), x);
  CHECK_THROWS_AS(ManifoldPath{off}, InputError);
  const ControlledPath back = retract_to_sphere(off);
  CHECK(sphere_constraint_defect(back) < 1e-15);
  CHECK_NOTHROW(ManifoldPath{back});
  const ManifoldPath y = smooth_sphere(256);
  CHECK(sphere_constraint_defect(y.path()) < 1e-15);
  CHECK(derivative_tangency_defect(y.path()) < 1e-14);
  CHECK(y.value(0) == Eigen::Vector3d(0.0, 0.6, 0.8));
}

TEST_CASE("tangent frame") {
  const Eigen::Vector3d y0 = Eigen::Vector3d(1.0, -2.0, 0.5).normalized();
  const Eigen::MatrixXd t0 = tangent_frame(y0);
  CHECK((t0.transpose() * t0 - Eigen::Matrix3d::Identity()).norm() < 1e-14);
  CHECK((y0.transpose() * t0.leftCols(2)).norm() < 1e-14);
  CHECK(t0.col(2) == y0);
}

TEST_CASE("parallel transport: constant path and input checks") {
  const RoughPathPtr x = rftest::smooth_driver3(64);
  const ManifoldPath y{from_constant(Eigen::Vector3d::UnitZ(), x)};
  const Eigen::MatrixXd t0 = tangent_frame(Eigen::Vector3d::UnitZ());
  const Transport tr = parallel_transport(y, t0);
  for (Index k = 0; k <= 64; ++k) CHECK(tr.at(k) == t0);
  CHECK_THROWS_AS(parallel_transport(y, 2.0 * t0), InputError);
  Eigen::Matrix3d bad = t0;
  bad.col(0).swap(bad.col(2));  // normal vector among the first n columns
  CHECK_THROWS_AS(parallel_transport(y, bad), InputError);
}

TEST_CASE("parallel transport along a great circle") {
  const double len = 1.2;
  const ManifoldPath y = great_circle_arc(Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX(), len, 1024);
  const Eigen::MatrixXd t0 = tangent_frame(Eigen::Vector3d::UnitZ());
  const Transport tr = parallel_transport(y, t0);
  CHECK(tr.orthonormality_defect() < 1e-6);
  CHECK(tr.tangency_defect(y.path()) < 1e-6);
  auto curve = [len](double t) {
    const Eigen::Vector3d p(std::sin(len * t), 0.0, std::cos(len * t));
    const Eigen::Vector3d v(len * std::cos(len * t), 0.0, -len * std::sin(len * t));
    return std::pair{p, v};
  };
  CHECK((tr.at(1024) - rk4_frame(curve, t0, 4096)).norm() < 1e-5);
}

TEST_CASE("holonomy of the 60 degree latitude circle") {
  const double c = std::numbers::pi / 3.0;
  const ManifoldPath y = latitude_circle(c, 1024);
  Eigen::Matrix3d t0;
  t0.col(0) << std::cos(c), 0.0, -std::sin(c);
  t0.col(1) << 0.0, 1.0, 0.0;
  t0.col(2) = y.value(0);
  const Transport tr = parallel_transport(y, t0);
  const double expect = 2.0 * std::numbers::pi * (1.0 - std::cos(c));
  auto curve = [c](double t) {
    const double w = 2.0 * std::numbers::pi;
    const Eigen::Vector3d p(std::sin(c) * std::cos(w * t), std::sin(c) * std::sin(w * t), std::cos(c));
    const Eigen::Vector3d v(-w * std::sin(c) * std::sin(w * t), w * std::sin(c) * std::cos(w * t), 0.0);
    return std::pair{p, v};
  };
  const double oracle = std::abs(holonomy_angle(t0, rk4_frame(curve, t0, 1 << 14)));
  CHECK(std::abs(oracle - expect) < 1e-10);
  CHECK(std::abs(std::abs(holonomy_angle(t0, tr.at(1024))) - expect) < 1e-4);
}

TEST_CASE("transport is an isometry and ignores the normal column") {
  const ManifoldPath y = smooth_sphere(1024);
  const Eigen::MatrixXd t0 = tangent_frame(y.value(0));
  const Transport tr = parallel_transport(y, t0);
  const Eigen::Vector3d v = t0.leftCols(2) * Eigen::Vector2d(0.6, -0.8);
  for (Index k = 0; k <= 1024; k += 32) {
    const double s = y.path().grid().t(k);
    CHECK(std::abs((tr.at(k) * Eigen::Vector3d(0.6, -0.8, 0.0)).norm() / v.norm() - 1.0) <= 1e-6 * s + 1e-15);
  }
  Eigen::MatrixXd flipped = t0;
  flipped.col(2) *= -1.0;
  const Transport tf = parallel_transport(y, flipped);
  double worst = 0.0;
  for (Index k = 0; k <= 1024; ++k) worst = std::max(worst, (tr.at(k).leftCols(2) - tf.at(k).leftCols(2)).norm());
  CHECK(worst < 1e-8);
}

TEST_CASE("anti-development") {
  SUBCASE("constant path") {
    const RoughPathPtr x = rftest::smooth_driver3(64);
    const ManifoldPath y{from_constant(Eigen::Vector3d::UnitX(), x)};
    const Transport tr = parallel_transport(y, tangent_frame(Eigen::Vector3d::UnitX()));
    CHECK(anti_development(y, tr).values().norm() == 0.0);
  }
  SUBCASE("geodesics develop to straight lines") {
    const double len = 1.5;
    const ManifoldPath y = great_circle_arc(Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitY(), len, 1024);
    const Transport tr = parallel_transport(y, tangent_frame(Eigen::Vector3d::UnitZ()));
    const ControlledPath z = anti_development(y, tr);
    CHECK(z.dim() == 2);
    CHECK(z.value(0).norm() == 0.0);
    const Eigen::VectorXd end = z.value(1024);
    CHECK(std::abs(end.norm() - len) < 1e-4);
    double off_line = 0.0;
    for (Index k = 0; k <= 1024; ++k)
      off_line = std::max(off_line, (z.value(k) - y.path().grid().t(k) * end).norm());
    CHECK(off_line < 1e-4);
  }
  SUBCASE("transport preserves the one-step Hoelder norm of increments") {
    // Over long lags the frame rotates, so only the finest scale is compared.
    auto one_step = [](const ControlledPath& p, double a) {
      double best = 0.0;
      const double h = p.grid().mesh();
      for (Index k = 0; k + 1 < p.size(); ++k)
        best = std::max(best, (p.value(k + 1) - p.value(k)).norm() / std::pow(h, a));
      return best;
    };
    {
      const ManifoldPath y = smooth_sphere(1024);
      const Transport tr = parallel_transport(y, tangent_frame(y.value(0)));
      const ControlledPath z = anti_development(y, tr);
      const ControlledPath py = rough_integral_oneform(sphere_projector_field(3).field(), y.path(), y.path());
      const double a = y.path().alpha();
      const double hz = one_step(z, a);
      const double hp = one_step(py, a);
      CHECK(std::abs(hz - hp) <= 1e-3 * hp);
    }
  }
  SUBCASE("singular frames are rejected") {
    const ManifoldPath y = smooth_sphere(16);
    Transport tr = parallel_transport(y, tangent_frame(y.value(0)));
    Eigen::MatrixXd values = tr.frame.values();
    values.col(8).segment(0, 3) = values.col(8).segment(3, 3);  // two equal columns
    tr.frame = ControlledPath(tr.frame.reference(), values, tr.frame.derivs());
    CHECK_THROWS_AS(anti_development(y, tr), NumericalError);
  }
}

TEST_CASE("driver field") {
  const RoughPathPtr x = rftest::smooth_driver3(64);
  const ManifoldPath north{from_constant(Eigen::Vector3d::UnitZ(), x)};
  const Eigen::MatrixXd t0 = tangent_frame(Eigen::Vector3d::UnitZ());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2, 65);
  CHECK(driver_field(north, h).values().norm() == 0.0);
  CHECK(driver_field(north, h).derivs().norm() == 0.0);
  h.row(0) = x->grid().nodes().transpose();
  const ControlledPath f = driver_field(north, h);
  for (Index k = 0; k <= 64; ++k)
    CHECK((f.value(k) - x->grid().t(k) * t0.col(0)).norm() < 1e-15);
  Eigen::MatrixXd bad = h;
  bad(1, 0) = 0.1;
  CHECK_THROWS_AS(driver_field(north, bad), InputError);

  const ManifoldPath rough = brownian_sphere(1024, 12);
  Eigen::MatrixXd hr(2, 1025);
  for (Index k = 0; k <= 1024; ++k) {
    const double s = rough.path().grid().t(k);
    hr.col(k) << std::sin(3.0 * s), s * s;
  }
  const ControlledPath fr = driver_field(rough, hr);
  double worst = 0.0;
  for (Index k = 0; k <= 1024; ++k) worst = std::max(worst, std::abs(rough.value(k).dot(fr.value(k))));
  CHECK(worst < 1e-8);
  CHECK(fr.value(0).norm() == 0.0);
}

TEST_CASE("driver field derivative along a scalar reference") {
  const ManifoldPath y = latitude_circle(1.0, 2048);
  Eigen::MatrixXd h(2, 2049);
  for (Index k = 0; k <= 2048; ++k) {
    const double s = y.path().grid().t(k);
    h.col(k) << std::sin(s), 0.5 * s;
  }
  const ProjectorField p = sphere_projector_field(3);
  const Transport tr = parallel_transport(y, tangent_frame(y.value(0)));
  const ControlledPath f = driver_field(y.path(), tr, h, p);
  // With X_t = t and h of bounded variation, the Gubinelli derivative is the
  // time derivative of s -> P(y_s) T_s applied to a frozen h.
  const double dt = y.path().grid().mesh();
  for (Index k = 64; k < 2048; k += 64) {
    Eigen::Vector3d hk = Eigen::Vector3d::Zero();
    hk.head(2) = h.col(k);
    const Eigen::Matrix3d up = p.eval(y.value(k + 1)) * tr.at(k + 1);
    const Eigen::Matrix3d down = p.eval(y.value(k - 1)) * tr.at(k - 1);
    const Eigen::Vector3d fd = (up - down) * hk / (2 * dt);
    CHECK((fd - f.deriv(k)).norm() < 1e-4);
  }
}

TEST_CASE("flow: trivial cases") {
  const ManifoldPath y = smooth_sphere(64);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 65);
  const FlowResult still = flow_integrate(y, zero, 0.1, 5, FlowScheme::euler);
  REQUIRE(still.trajectory.size() == 6);
  for (const auto& p : still.trajectory) CHECK((p.path().values() - y.path().values()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(flow_integrate(y, zero, 0.0, 5, FlowScheme::rk4).trajectory.size() == 1);
  CHECK(flow_integrate(y, zero, 0.1, 0, FlowScheme::rk4).trajectory.size() == 1);
  CHECK_THROWS_AS(parse_flow_scheme("midpoint"), InputError);
}

TEST_CASE("flow: one Euler step from the north pole") {
  const RoughPathPtr x = rftest::smooth_driver3(64);
  const ManifoldPath north{from_constant(Eigen::Vector3d::UnitZ(), x)};
  const Eigen::MatrixXd t0 = tangent_frame(Eigen::Vector3d::UnitZ());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2, 65);
  h.row(0) = x->grid().nodes().transpose();
  const double dt = 0.01;
  const FlowResult r = flow_integrate(north, h, dt, 1, FlowScheme::euler);
  for (Index k = 0; k <= 64; ++k) {
    const Eigen::Vector3d expect = (Eigen::Vector3d::UnitZ() + dt * x->grid().t(k) * t0.col(0)).normalized();
    CHECK((r.trajectory[1].value(k) - expect).norm() < 1e-10);
  }
}

TEST_CASE("flow over unit horizon keeps the constraints") {
  const ManifoldPath y = smooth_sphere(256);
  Eigen::MatrixXd h(2, 257);
  for (Index k = 0; k <= 256; ++k) {
    const double s = y.path().grid().t(k);
    h.col(k) << 0.5 * s, std::sin(2.0 * s) * s;
  }
  for (FlowScheme scheme : {FlowScheme::euler, FlowScheme::rk4}) {
    const FlowResult r = flow_integrate(y, h, 1e-2, 100, scheme);
    REQUIRE(r.trajectory.size() == 101);
    for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
      CHECK(r.trajectory[i].value(0) == y.value(0));
      CHECK(r.diagnostics[i].constraint < 1e-6);
      CHECK(r.diagnostics[i].frame_defect < 1e-6);
    }
    CHECK(r.diagnostics.back().time == doctest::Approx(1.0));
    // The path actually moved.
    CHECK((r.trajectory.back().path().values() - y.path().values()).norm() > 0.1);
  }
  Eigen::MatrixXd big = 50.0 * h;
  CHECK_THROWS_AS(flow_integrate(y, big, 1.0, 1, FlowScheme::euler), StepSizeError);
}

TEST_CASE("flow: Euler is first order against RK4") {
  const ManifoldPath y = smooth_sphere(64);
  Eigen::MatrixXd h(2, 65);
  for (Index k = 0; k <= 64; ++k) {
    const double s = y.path().grid().t(k);
    h.col(k) << s, -0.5 * s * s;
  }
  const Eigen::MatrixXd ref = flow_integrate(y, h, 0.0025, 80, FlowScheme::rk4).trajectory.back().path().values();
  std::vector<double> dts{0.02, 0.01, 0.005}, err;
  for (double dt : dts) {
    const int steps = static_cast<int>(std::lround(0.2 / dt));
    err.push_back(sup_distance(flow_integrate(y, h, dt, steps, FlowScheme::euler).trajectory.back().path().values(), ref));
  }
  CHECK(rftest::loglog_slope(dts, err) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("development field variation matches differences in the projector") {
  const ProjectorField p = sphere_projector_field(3);
  const MatrixField q = sandwiched_direction(p, skew_k());
  const OneForm dg = development_field_variation(p.field(), q, 2);
  Eigen::VectorXd state(12);
  const Eigen::Vector3d w = Eigen::Vector3d(0.3, -0.4, 0.8).normalized();
  const Eigen::Matrix3d t = tangent_frame(w);
  state << w, Eigen::Map<const Eigen::VectorXd>(t.data(), 9);
  state.tail(9) += 0.05 * Eigen::VectorXd::LinSpaced(9, -1.0, 1.0);
  const double e = 1e-5;
  const Eigen::MatrixXd fd =
      (development_field(p.field() + e * q, 2).value(state) - development_field(p.field() + (-e) * q, 2).value(state)) /
      (2 * e);
  CHECK((fd - dg.value(state)).norm() < 1e-8);
}

TEST_CASE("connection variation") {
  const ProjectorField p = sphere_projector_field(3);
  const ManifoldPath y = smooth_sphere(1024);
  const DevelopmentSetup setup = development_setup(p, y);
  const ControlledPath base = development(p.field(), setup.z, y.value(0), setup.t0);
  CHECK(sup_distance(base.values(), y.path().values()) < 1e-4);

  CHECK(connection_variation_field(p, zero_field(3, 3, 3), y).values().norm() == 0.0);

  const MatrixField q = sandwiched_direction(p, skew_k());
  const ControlledPath v = connection_variation_field(p, q, y);
  double tangency = 0.0;
  for (Index k = 0; k <= 1024; ++k) tangency = std::max(tangency, std::abs(y.value(k).dot(v.value(k))));
  CHECK(tangency < 1e-6);
  CHECK(v.values().norm() > 1e-3);

  const std::vector<double> eps{1e-1, 1e-2, 1e-3};
  std::vector<double> rem;
  for (double e : eps) {
    const ControlledPath moved = development(p.field() + e * q, setup.z, y.value(0), setup.t0);
    rem.push_back(sup_distance(moved.values(), base.values() + e * v.values()) / e);
  }
  CHECK(rftest::loglog_slope(eps, rem) >= 0.9);
}

TEST_CASE("development round trip converges under refinement") {
  const ProjectorField p = sphere_projector_field(3);
  std::vector<double> mesh, err;
  for (Index n : {64, 128, 256, 512}) {
    const ManifoldPath y = smooth_sphere(n);
    const DevelopmentSetup setup = development_setup(p, y);
    const ControlledPath back = development(p.field(), setup.z, y.value(0), setup.t0);
    mesh.push_back(y.path().grid().mesh());
    err.push_back(sup_distance(back.values(), y.path().values()));
  }
  MESSAGE("round-trip slope " << rftest::loglog_slope(mesh, err));
  CHECK(rftest::loglog_slope(mesh, err) >= 1.0);
}

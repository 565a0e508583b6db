#include "roughflow/fields.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace roughflow {

OneForm linear_field(const std::vector<Eigen::MatrixXd>& generators) {
  require(!generators.empty(), "linear_field: need at least one generator");
  const Index d = generators.front().rows();
  for (const auto& a : generators)
    require(a.rows() == d && a.cols() == d, "linear_field: generators must be d x d");
  const auto l = static_cast<Index>(generators.size());
  return MatrixField::generic(
      d, d, l,
      [generators, d, l](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        Mat<S> out(d, l);
        for (Index a = 0; a < l; ++a)
          out.col(a) = detail::promote<S>(generators[static_cast<std::size_t>(a)]) * x;
        return out;
      },
      kMaxJetLevel, "linear");
}

OneForm scalar_linear_field(double c) {
  return linear_field({Eigen::MatrixXd::Constant(1, 1, c)});
}

OneForm rotation_field() {
  Eigen::MatrixXd j(2, 2);
  j << 0.0, -1.0, 1.0, 0.0;
  OneForm f = linear_field({j});
  return f;
}

OneForm sin_bounded_field(Index d) {
  require(d >= 1, "sin_bounded_field: dimension must be positive");
  return MatrixField::generic(
      d, d, d,
      [d](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        using std::cos;
        using std::sin;
        Mat<S> out(d, d);
        for (Index i = 0; i < d; ++i)
          for (Index a = 0; a < d; ++a)
            out(i, a) = (i == a) ? S(1.0) + S(0.5) * sin(x(i)) : S(0.3) * cos(x(a) + x(i));
        return out;
      },
      kMaxJetLevel, "sin-bounded");
}

OneForm random_smooth_field(Index d, Index l, std::uint64_t seed) {
  require(d >= 1 && l >= 1, "random_smooth_field: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd c(d, l), s(d, l), phi(d, l);
  std::vector<Eigen::VectorXd> w(static_cast<std::size_t>(d * l));
  for (Index i = 0; i < d; ++i)
    for (Index a = 0; a < l; ++a) {
      c(i, a) = u(rng);
      s(i, a) = 0.5 * u(rng);
      phi(i, a) = std::numbers::pi * u(rng);
      Eigen::VectorXd wi(d);
      for (Index k = 0; k < d; ++k) wi(k) = u(rng);
      w[static_cast<std::size_t>(i * l + a)] = wi;
    }
  return MatrixField::generic(
      d, d, l,
      [c, s, phi, w, d, l](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        using std::sin;
        Mat<S> out(d, l);
        for (Index i = 0; i < d; ++i)
          for (Index a = 0; a < l; ++a) {
            const Eigen::VectorXd& wi = w[static_cast<std::size_t>(i * l + a)];
            S arg(phi(i, a));
            for (Index k = 0; k < d; ++k) arg += S(wi(k)) * x(k);
            out(i, a) = S(c(i, a)) + S(s(i, a)) * sin(arg);
          }
        return out;
      },
      kMaxJetLevel, "random-smooth");
}

bool is_smooth_driver_id(const std::string& id) {
  return id == "linear" || id == "sin" || id == "circle" || id == "wave";
}

Eigen::MatrixXd smooth_driver_samples(const std::string& id, const Grid& grid) {
  const Index n = grid.size();
  if (id == "linear") return grid.nodes().transpose();
  if (id == "sin") return grid.nodes().array().sin().matrix().transpose();
  if (id == "circle") {
    Eigen::MatrixXd out(2, n);
    const Eigen::ArrayXd angle = 2.0 * std::numbers::pi * grid.nodes().array();
    out.row(0) = angle.cos().matrix().transpose();
    out.row(1) = angle.sin().matrix().transpose();
    return out;
  }
  if (id == "wave") {
    Eigen::MatrixXd out(3, n);
    for (Index k = 0; k < n; ++k) {
      const double t = grid.t(k);
      out.col(k) << std::sin(2.0 * t), std::cos(3.0 * t) - 1.0, 0.5 * t * t;
    }
    return out;
  }
  throw InputError("unknown smooth driver '" + id + "'");
}

}  // namespace roughflow

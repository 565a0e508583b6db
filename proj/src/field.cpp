#include "roughflow/field.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace roughflow {

MatrixField constant_field(Index in_dim, const Eigen::MatrixXd& value) {
  return MatrixField::generic(
      in_dim, value.rows(), value.cols(),
      [value](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        return detail::promote<S>(value);
      },
      kMaxJetLevel, "constant");
}

MatrixField zero_field(Index in_dim, Index rows, Index cols) {
  return constant_field(in_dim, Eigen::MatrixXd::Zero(rows, cols));
}

MatrixField operator+(const MatrixField& a, const MatrixField& b) {
  require(a.in_dim() == b.in_dim() && a.rows() == b.rows() && a.cols() == b.cols(),
          "field sum: shape mismatch");
  return MatrixField::generic(
      a.in_dim(), a.rows(), a.cols(),
      [a, b](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        Mat<S> out = a(x);
        out += b(x);
        return out;
      },
      std::min(a.max_level(), b.max_level()), a.name() + "+" + b.name());
}

MatrixField operator*(double c, const MatrixField& a) {
  return MatrixField::generic(
      a.in_dim(), a.rows(), a.cols(),
      [c, a](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        Mat<S> out = a(x);
        out *= S(c);
        return out;
      },
      a.max_level(), a.name());
}

MatrixField hconcat(const MatrixField& a, const MatrixField& b) {
  require(a.in_dim() == b.in_dim() && a.rows() == b.rows(), "hconcat: shape mismatch");
  return MatrixField::generic(
      a.in_dim(), a.rows(), a.cols() + b.cols(),
      [a, b](const auto& x) {
        using S = typename std::decay_t<decltype(x)>::Scalar;
        Mat<S> out(a.rows(), a.cols() + b.cols());
        out.leftCols(a.cols()) = a(x);
        out.rightCols(b.cols()) = b(x);
        return out;
      },
      std::min(a.max_level(), b.max_level()), a.name() + "|" + b.name());
}

namespace {

Eigen::VectorXd uniform_point(std::mt19937_64& rng, const Eigen::VectorXd& lo,
                              const Eigen::VectorXd& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(lo.size());
  for (Index i = 0; i < lo.size(); ++i) x(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
  return x;
}

Eigen::VectorXd unit_direction(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = g(rng);
  const double norm = v.norm();
  if (norm == 0.0) {
    v.setZero();
    v(0) = 1.0;
    return v;
  }
  return v / norm;
}

Eigen::MatrixXd kth_derivative(const MatrixField& f, int k, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u) {
  switch (k) {
    case 0:
      return f.value(x);
    case 1:
      return f.d1(x, u);
    case 2:
      return f.d2(x, u, u);
    default:
      return f.d3(x, u, u, u);
  }
}

}  // namespace

LipEstimate lip_gamma_estimate(const MatrixField& f, double gamma, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi, int samples, std::uint64_t seed) {
  require(gamma > 0.0 && gamma < 4.0, "lip_gamma_estimate: gamma must lie in (0, 4)");
  require(lo.size() == f.in_dim() && hi.size() == f.in_dim(), "lip_gamma_estimate: box dimension");
  require(samples >= 2, "lip_gamma_estimate: need at least two samples");
  const int top = static_cast<int>(std::floor(gamma));
  require(top <= f.order(), "lip_gamma_estimate: field is not smooth enough for gamma");
  const double frac = gamma - top;

  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> points;
  points.reserve(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) points.push_back(uniform_point(rng, lo, hi));

  LipEstimate est;
  est.gamma = gamma;
  est.derivative_norms = Eigen::VectorXd::Zero(top + 1);
  constexpr int kDirections = 8;
  std::vector<Eigen::VectorXd> directions;
  for (Index i = 0; i < f.in_dim(); ++i) directions.push_back(Eigen::VectorXd::Unit(f.in_dim(), i));
  for (int r = 0; r < kDirections; ++r) directions.push_back(unit_direction(rng, f.in_dim()));

  for (int k = 0; k <= top; ++k) {
    double sup = 0.0;
    for (const auto& x : points) {
      if (k == 0) {
        sup = std::max(sup, f.value(x).norm());
        continue;
      }
      for (const auto& u : directions) sup = std::max(sup, kth_derivative(f, k, x, u).norm());
    }
    est.derivative_norms(k) = sup;
  }

  // Hoelder term of the top derivative, probed along a fixed direction set.
  double holder = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const auto& x = points[i];
    const auto& y = points[i + 1];
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    for (const auto& u : directions) {
      const double diff = (kth_derivative(f, top, x, u) - kth_derivative(f, top, y, u)).norm();
      holder = std::max(holder, diff / std::pow(dist, frac));
    }
  }
  est.holder_term = holder;
  est.norm = est.derivative_norms.sum() + holder;
  return est;
}

double derivative_symmetry_defect(const MatrixField& f, const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi, int probes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const Eigen::VectorXd x = uniform_point(rng, lo, hi);
    const Eigen::VectorXd a = unit_direction(rng, f.in_dim());
    const Eigen::VectorXd b = unit_direction(rng, f.in_dim());
    const Eigen::VectorXd c = unit_direction(rng, f.in_dim());
    if (f.order() >= 2) worst = std::max(worst, (f.d2(x, a, b) - f.d2(x, b, a)).norm());
    if (f.order() >= 3) {
      const Eigen::MatrixXd ref = f.d3(x, a, b, c);
      worst = std::max(worst, (ref - f.d3(x, b, a, c)).norm());
      worst = std::max(worst, (ref - f.d3(x, c, b, a)).norm());
      worst = std::max(worst, (ref - f.d3(x, a, c, b)).norm());
    }
  }
  return worst;
}

}  // namespace roughflow

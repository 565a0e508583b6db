#pragma once

// Smooth matrix-valued fields x -> M(x), evaluable at every level of the jet
// scalar tower so that exact directional derivatives of any order up to
// kMaxJetLevel come for free. One-forms F : R^d -> L(R^u, R^d), projector
// fields P : R^d -> L(R^d) and plain smooth maps (cols == 1) are all fields.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <tuple>
#include <utility>

#include "roughflow/dual.hpp"
#include "roughflow/types.hpp"

namespace roughflow {

inline constexpr int kMaxJetLevel = 4;

namespace detail {

template <int L>
using FieldFn = std::function<Mat<jet_t<L>>(const Vec<jet_t<L>>&)>;

template <int... Ls>
using FieldFnTuple = std::tuple<FieldFn<Ls>...>;

using AllFieldFns = FieldFnTuple<0, 1, 2, 3, 4>;

template <class S>
Vec<Dual<S>> seed(const Vec<S>& x, const Vec<S>& v) {
  Vec<Dual<S>> out(x.size());
  for (Index i = 0; i < x.size(); ++i) out(i) = Dual<S>(x(i), v(i));
  return out;
}

template <class S>
Vec<Dual<S>> lift(const Vec<S>& x) {
  Vec<Dual<S>> out(x.size());
  for (Index i = 0; i < x.size(); ++i) out(i) = Dual<S>(x(i), S(0.0));
  return out;
}

template <class S>
Mat<S> tangent_part(const Mat<Dual<S>>& m) {
  Mat<S> out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) out(i, j) = m(i, j).d;
  return out;
}

template <class S>
Mat<S> value_part(const Mat<Dual<S>>& m) {
  Mat<S> out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) out(i, j) = m(i, j).v;
  return out;
}

template <class S>
Vec<S> promote(const Eigen::VectorXd& x) {
  Vec<S> out(x.size());
  for (Index i = 0; i < x.size(); ++i) out(i) = S(x(i));
  return out;
}

template <class S>
Mat<S> promote(const Eigen::MatrixXd& m) {
  Mat<S> out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) out(i, j) = S(m(i, j));
  return out;
}

}  // namespace detail

class MatrixField {
 public:
  MatrixField() = default;

  /// Builds a field from a generic callable `fn(const Vec<S>&) -> Mat<S>`.
  /// The callable is instantiated at every jet level; levels above
  /// `max_level` raise at runtime (use this for fields built from other
  /// fields' derivatives).
  template <class Fn>
  static MatrixField generic(Index in_dim, Index rows, Index cols, Fn fn,
                             int max_level = kMaxJetLevel, std::string name = {}) {
    auto impl = std::make_shared<Impl>();
    impl->in_dim = in_dim;
    impl->rows = rows;
    impl->cols = cols;
    impl->max_level = max_level;
    impl->name = std::move(name);
    fill<0>(impl->fns, fn);
    MatrixField f;
    f.impl_ = std::move(impl);
    return f;
  }

  [[nodiscard]] bool valid() const { return impl_ != nullptr; }
  [[nodiscard]] Index in_dim() const { return impl_->in_dim; }
  [[nodiscard]] Index rows() const { return impl_->rows; }
  [[nodiscard]] Index cols() const { return impl_->cols; }
  [[nodiscard]] int max_level() const { return impl_->max_level; }
  /// Highest derivative order available at double precision.
  [[nodiscard]] int order() const { return impl_->max_level; }
  [[nodiscard]] const std::string& name() const { return impl_->name; }

  template <class S>
  [[nodiscard]] Mat<S> operator()(const Vec<S>& x) const {
    constexpr int L = jet_level_v<S>;
    if constexpr (L > kMaxJetLevel) {
      throw InputError("field evaluated beyond the jet tower");
    } else {
      if (L > impl_->max_level)
        throw InputError("field '" + impl_->name + "' is not smooth enough for this use");
      return std::get<L>(impl_->fns)(x);
    }
  }

  /// D M(x)[v], computed one jet level above S.
  template <class S>
  [[nodiscard]] Mat<S> derivative(const Vec<S>& x, const Vec<S>& v) const {
    constexpr int L = jet_level_v<S>;
    if constexpr (L + 1 > kMaxJetLevel) {
      throw InputError("derivative requested beyond the jet tower");
    } else {
      return detail::tangent_part<S>((*this)(detail::seed<S>(x, v)));
    }
  }

  /// D^2 M(x)[v, w], computed two jet levels above S.
  template <class S>
  [[nodiscard]] Mat<S> second_derivative(const Vec<S>& x, const Vec<S>& v, const Vec<S>& w) const {
    constexpr int L = jet_level_v<S>;
    if constexpr (L + 2 > kMaxJetLevel) {
      throw InputError("second derivative requested beyond the jet tower");
    } else {
      const Mat<Dual<S>> inner = derivative<Dual<S>>(detail::seed<S>(x, w), detail::lift<S>(v));
      return detail::tangent_part<S>(inner);
    }
  }

  [[nodiscard]] Eigen::MatrixXd value(const Eigen::VectorXd& x) const { return (*this)(x); }
  [[nodiscard]] Eigen::MatrixXd d1(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const {
    return derivative<double>(x, v);
  }
  [[nodiscard]] Eigen::MatrixXd d2(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& w) const {
    using J1 = jet_t<1>;
    const Mat<J1> inner = derivative<J1>(detail::seed<double>(x, w), detail::lift<double>(v));
    return detail::tangent_part<double>(inner);
  }
  [[nodiscard]] Eigen::MatrixXd d3(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& w, const Eigen::VectorXd& q) const {
    using J1 = jet_t<1>;
    using J2 = jet_t<2>;
    const Vec<J2> x2 = detail::seed<J1>(detail::seed<double>(x, q), detail::lift<double>(w));
    const Vec<J2> v2 = detail::lift<J1>(detail::lift<double>(v));
    const Mat<J2> inner = derivative<J2>(x2, v2);
    return detail::tangent_part<double>(detail::tangent_part<J1>(inner));
  }

 private:
  struct Impl {
    Index in_dim = 0;
    Index rows = 0;
    Index cols = 0;
    int max_level = kMaxJetLevel;
    std::string name;
    detail::AllFieldFns fns;
  };

  template <int L, class Fn>
  static void fill(detail::AllFieldFns& fns, const Fn& fn) {
    if constexpr (L <= kMaxJetLevel) {
      std::get<L>(fns) = [fn](const Vec<jet_t<L>>& x) -> Mat<jet_t<L>> { return fn(x); };
      fill<L + 1>(fns, fn);
    }
  }

  std::shared_ptr<const Impl> impl_;
};

/// F : R^d -> L(R^u, R^d); columns are the driving vector fields.
using OneForm = MatrixField;
/// phi : R^m -> R^n stored as an n x 1 field.
using SmoothMap = MatrixField;

/// x -> A (constant matrix), any input dimension.
MatrixField constant_field(Index in_dim, const Eigen::MatrixXd& value);
/// x -> 0.
MatrixField zero_field(Index in_dim, Index rows, Index cols);
/// a + b, same shapes.
MatrixField operator+(const MatrixField& a, const MatrixField& b);
/// c * a.
MatrixField operator*(double c, const MatrixField& a);
/// [a | b], same input and row dimensions.
MatrixField hconcat(const MatrixField& a, const MatrixField& b);

struct LipEstimate {
  double gamma = 0.0;
  double norm = 0.0;
  /// sup of ||f^(k)|| for k = 0..[gamma]
  Eigen::VectorXd derivative_norms;
  double holder_term = 0.0;
};

/// Sampled Stein Lip_gamma norm of `f` on the box [lo, hi] (gamma <= 3).
/// Operator norms use sup over unit directions of |f^(k)(u,..,u)|.
LipEstimate lip_gamma_estimate(const MatrixField& f, double gamma, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi, int samples = 256,
                               std::uint64_t seed = 7);

/// Max asymmetry of the second and third derivative tensors under slot
/// permutations, probed at random points and directions in [lo, hi].
double derivative_symmetry_defect(const MatrixField& f, const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi, int probes = 32,
                                  std::uint64_t seed = 11);

}  // namespace roughflow

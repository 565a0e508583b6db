#pragma once

// Forward-mode dual numbers that nest: Dual<Dual<double>> carries a second
// directional derivative, and so on. Eigen's AutoDiffScalar stops compiling
// beyond two levels of nesting, which is not enough for the jet systems in
// rde.hpp and manifold.hpp.

#include <cmath>
#include <type_traits>

#include <Eigen/Core>

namespace roughflow {

template <class T>
struct Dual;

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};

template <class T>
struct Dual {
  T v{};
  T d{};

  Dual() = default;
  Dual(double x) : v(x), d(0.0) {}  // NOLINT(google-explicit-constructor)
  Dual(int x) : v(static_cast<double>(x)), d(0.0) {}  // NOLINT
  template <class U = T, std::enable_if_t<!std::is_same_v<U, double>, int> = 0>
  Dual(const T& x) : v(x), d(0.0) {}  // NOLINT
  Dual(const T& x, const T& dx) : v(x), d(dx) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const T inv = T(1.0) / o.v;
    v = v * inv;
    d = (d - v * o.d) * inv;
    return *this;
  }
};

template <class T>
Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <class T>
Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <class T>
Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <class T>
Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }
template <class T>
Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T>
Dual<T> operator+(const Dual<T>& a) { return a; }

template <class T>
Dual<T> operator+(Dual<T> a, double b) { a.v += b; return a; }
template <class T>
Dual<T> operator+(double b, Dual<T> a) { a.v += b; return a; }
template <class T>
Dual<T> operator-(Dual<T> a, double b) { a.v -= b; return a; }
template <class T>
Dual<T> operator-(double b, const Dual<T>& a) { return {b - a.v, -a.d}; }
template <class T>
Dual<T> operator*(const Dual<T>& a, double b) { return {a.v * b, a.d * b}; }
template <class T>
Dual<T> operator*(double b, const Dual<T>& a) { return {a.v * b, a.d * b}; }
template <class T>
Dual<T> operator/(const Dual<T>& a, double b) { return {a.v / b, a.d / b}; }
template <class T>
Dual<T> operator/(double b, const Dual<T>& a) {
  const T r = b / a.v;
  return {r, -r * a.d / a.v};
}

// Comparisons look at the value only; branches in generic code select a
// smooth piece, the derivative of the selected piece is then exact.
template <class T>
bool operator<(const Dual<T>& a, const Dual<T>& b) { return a.v < b.v; }
template <class T>
bool operator>(const Dual<T>& a, const Dual<T>& b) { return a.v > b.v; }
template <class T>
bool operator<=(const Dual<T>& a, const Dual<T>& b) { return a.v <= b.v; }
template <class T>
bool operator>=(const Dual<T>& a, const Dual<T>& b) { return a.v >= b.v; }
template <class T>
bool operator==(const Dual<T>& a, const Dual<T>& b) { return a.v == b.v; }
template <class T>
bool operator!=(const Dual<T>& a, const Dual<T>& b) { return a.v != b.v; }

template <class T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {sin(a.v), cos(a.v) * a.d};
}
template <class T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {cos(a.v), -sin(a.v) * a.d};
}
template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  const T e = exp(a.v);
  return {e, e * a.d};
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.v), a.d / a.v};
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  const T s = sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
template <class T>
Dual<T> tanh(const Dual<T>& a) {
  using std::tanh;
  const T t = tanh(a.v);
  return {t, (1.0 - t * t) * a.d};
}
template <class T>
Dual<T> abs(const Dual<T>& a) { return a.v < T(0.0) ? -a : a; }
template <class T>
Dual<T> abs2(const Dual<T>& a) { return a * a; }
template <class T>
Dual<T> conj(const Dual<T>& a) { return a; }
template <class T>
Dual<T> real(const Dual<T>& a) { return a; }

/// Scalar tower: level k carries k nested directional derivatives.
template <int Level>
struct jet_scalar {
  using type = Dual<typename jet_scalar<Level - 1>::type>;
};
template <>
struct jet_scalar<0> {
  using type = double;
};
template <int Level>
using jet_t = typename jet_scalar<Level>::type;

template <class S>
struct jet_level : std::integral_constant<int, 0> {};
template <class T>
struct jet_level<Dual<T>> : std::integral_constant<int, jet_level<T>::value + 1> {};
template <class S>
inline constexpr int jet_level_v = jet_level<S>::value;

/// Innermost double of a (possibly nested) dual.
inline double base_value(double x) { return x; }
template <class T>
double base_value(const Dual<T>& x) {
  return base_value(x.v);
}

}  // namespace roughflow

namespace Eigen {

template <class T>
struct NumTraits<roughflow::Dual<T>> : NumTraits<double> {
  using Real = roughflow::Dual<T>;
  using NonInteger = roughflow::Dual<T>;
  using Nested = roughflow::Dual<T>;
  using Literal = roughflow::Dual<T>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3
  };
};

template <class T, typename BinaryOp>
struct ScalarBinaryOpTraits<roughflow::Dual<T>, double, BinaryOp> {
  using ReturnType = roughflow::Dual<T>;
};
template <class T, typename BinaryOp>
struct ScalarBinaryOpTraits<double, roughflow::Dual<T>, BinaryOp> {
  using ReturnType = roughflow::Dual<T>;
};

}  // namespace Eigen

#pragma once

// Forward-mode dual numbers with a fixed number of tangent directions.
//
// The per-trial likelihood is written once as a template over its scalar
// type; instantiating it with Dual<N> yields the value together with the
// gradient with respect to the N local linear predictors of that trial.

#include <array>
#include <cmath>

namespace gpmix {

template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  static Dual variable(double value, int index) {
    Dual x(value);
    x.d[index] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator+=(double c) {
    v += c;
    return *this;
  }
  Dual& operator*=(double c) {
    v *= c;
    for (int i = 0; i < N; ++i) d[i] *= c;
    return *this;
  }
};

template <int N>
inline Dual<N> operator-(Dual<N> a) {
  a.v = -a.v;
  for (int i = 0; i < N; ++i) a.d[i] = -a.d[i];
  return a;
}
template <int N>
inline Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N>
inline Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N>
inline Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <int N>
inline Dual<N> operator+(Dual<N> a, double c) { return a += c; }
template <int N>
inline Dual<N> operator+(double c, Dual<N> a) { return a += c; }
template <int N>
inline Dual<N> operator-(Dual<N> a, double c) { return a += -c; }
template <int N>
inline Dual<N> operator-(double c, const Dual<N>& a) { return -a + c; }
template <int N>
inline Dual<N> operator*(Dual<N> a, double c) { return a *= c; }
template <int N>
inline Dual<N> operator*(double c, Dual<N> a) { return a *= c; }

template <int N>
inline Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r;
  r.v = a.v / b.v;
  const double inv = 1.0 / b.v;
  for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
  return r;
}
template <int N>
inline Dual<N> operator/(Dual<N> a, double c) { return a *= (1.0 / c); }
template <int N>
inline Dual<N> operator/(double c, const Dual<N>& b) { return Dual<N>(c) / b; }

namespace detail {
template <int N>
inline Dual<N> chain(const Dual<N>& a, double value, double slope) {
  Dual<N> r;
  r.v = value;
  for (int i = 0; i < N; ++i) r.d[i] = slope * a.d[i];
  return r;
}
}  // namespace detail

template <int N>
inline Dual<N> exp(const Dual<N>& a) {
  const double e = std::exp(a.v);
  return detail::chain(a, e, e);
}
template <int N>
inline Dual<N> log(const Dual<N>& a) {
  return detail::chain(a, std::log(a.v), 1.0 / a.v);
}
template <int N>
inline Dual<N> log1p(const Dual<N>& a) {
  return detail::chain(a, std::log1p(a.v), 1.0 / (1.0 + a.v));
}
template <int N>
inline Dual<N> sqrt(const Dual<N>& a) {
  const double s = std::sqrt(a.v);
  return detail::chain(a, s, 0.5 / s);
}
template <int N>
inline Dual<N> tanh(const Dual<N>& a) {
  const double t = std::tanh(a.v);
  return detail::chain(a, t, 1.0 - t * t);
}

template <int N>
inline double value_of(const Dual<N>& a) { return a.v; }
inline double value_of(double a) { return a; }

/// Logistic function, stable for large |x|.
inline double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
template <int N>
inline Dual<N> inv_logit(const Dual<N>& a) {
  const double p = inv_logit(a.v);
  return detail::chain(a, p, p * (1.0 - p));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace gpmix

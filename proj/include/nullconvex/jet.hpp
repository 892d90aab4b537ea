#pragma once

// Second-order forward-mode jets: value, gradient and Hessian carried through
// arithmetic so metric derivatives up to second order come out exact to rounding.

#include "nullconvex/core.hpp"

#include <cmath>

namespace nullconvex {

using JetVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using JetMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

struct Jet2 {
  double value = 0.0;
  JetVec grad;
  JetMat hess;

  Jet2() = default;
  Jet2(double v, int dim) : value(v), grad(JetVec::Zero(dim)), hess(JetMat::Zero(dim, dim)) {}

  static Jet2 constant(double v, int dim) { return Jet2(v, dim); }

  // The coordinate function x_i.
  static Jet2 variable(double v, int index, int dim) {
    Jet2 j(v, dim);
    j.grad(index) = 1.0;
    return j;
  }

  int dim() const { return static_cast<int>(grad.size()); }
};

// Applies a scalar function with derivatives f1 = f'(u), f2 = f''(u).
inline Jet2 chain(const Jet2& u, double f0, double f1, double f2) {
  Jet2 r;
  r.value = f0;
  r.grad = f1 * u.grad;
  r.hess = f1 * u.hess + f2 * (u.grad * u.grad.transpose());
  return r;
}

inline Jet2 operator-(const Jet2& a) {
  Jet2 r;
  r.value = -a.value;
  r.grad = -a.grad;
  r.hess = -a.hess;
  return r;
}

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.value = a.value + b.value;
  r.grad = a.grad + b.grad;
  r.hess = a.hess + b.hess;
  return r;
}

inline Jet2 operator-(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.value = a.value - b.value;
  r.grad = a.grad - b.grad;
  r.hess = a.hess - b.hess;
  return r;
}

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.value = a.value * b.value;
  r.grad = a.value * b.grad + b.value * a.grad;
  const JetMat cross = a.grad * b.grad.transpose();
  r.hess = a.value * b.hess + b.value * a.hess + cross + cross.transpose();
  return r;
}

inline Jet2 operator*(double s, const Jet2& a) {
  Jet2 r;
  r.value = s * a.value;
  r.grad = s * a.grad;
  r.hess = s * a.hess;
  return r;
}

inline Jet2 operator+(const Jet2& a, double s) {
  Jet2 r = a;
  r.value += s;
  return r;
}

inline Jet2 reciprocal(const Jet2& a) {
  const double inv = 1.0 / a.value;
  return chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }

inline Jet2 sin(const Jet2& a) {
  const double s = std::sin(a.value);
  return chain(a, s, std::cos(a.value), -s);
}

inline Jet2 cos(const Jet2& a) {
  const double c = std::cos(a.value);
  return chain(a, c, -std::sin(a.value), -c);
}

inline Jet2 exp(const Jet2& a) {
  const double e = std::exp(a.value);
  return chain(a, e, e, e);
}

inline Jet2 log(const Jet2& a) {
  const double inv = 1.0 / a.value;
  return chain(a, std::log(a.value), inv, -inv * inv);
}

inline Jet2 sqrt(const Jet2& a) {
  const double s = std::sqrt(a.value);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.value));
}

inline Jet2 tanh(const Jet2& a) {
  const double t = std::tanh(a.value);
  const double d = 1.0 - t * t;
  return chain(a, t, d, -2.0 * t * d);
}

// a^k for a constant exponent. Integer k is valid for any base.
inline Jet2 pow(const Jet2& a, double k) {
  if (k == 0.0) return Jet2::constant(1.0, a.dim());
  if (k == 1.0) return a;
  if (k == 2.0) return a * a;
  const double f0 = std::pow(a.value, k);
  const double f1 = k * std::pow(a.value, k - 1.0);
  const double f2 = k * (k - 1.0) * std::pow(a.value, k - 2.0);
  return chain(a, f0, f1, f2);
}

}  // namespace nullconvex

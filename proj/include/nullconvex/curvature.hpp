#pragma once

// Pointwise curvature of a weighted Lorentzian metric.
//
// Conventions: R(X,Y)Z = grad_X grad_Y Z - grad_Y grad_X Z - grad_[X,Y] Z, with components
// R^r_{smn} = d_m G^r_{ns} - d_n G^r_{ms} + G^r_{ml} G^l_{ns} - G^r_{nl} G^l_{ms},
// Ric_{sn} = R^r_{srn}. The Jacobi equation reads J'' + R(J, u)u = 0 and Ric(u,u) is the
// trace of the tidal operator, so the null energy condition is Ric(u,u) >= 0.

#include "nullconvex/core.hpp"
#include "nullconvex/metric.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace nullconvex {

struct Connection {
  int dim = 0;
  Mat g;
  Mat ginv;
  std::vector<double> gamma;    // gamma[(l*d+m)*d+n] = G^l_{mn}
  std::vector<double> riemann;  // riemann[((r*d+s)*d+m)*d+n] = R^r_{smn}; empty if not requested

  double christoffel(int l, int m, int n) const { return gamma[static_cast<std::size_t>((l * dim + m) * dim + n)]; }
  double riem(int r, int s, int m, int n) const {
    return riemann[static_cast<std::size_t>(((r * dim + s) * dim + m) * dim + n)];
  }
  double max_abs_christoffel() const {
    double mx = 0.0;
    for (double v : gamma) mx = std::max(mx, std::abs(v));
    return mx;
  }

  // -G^l_{mn} a^m b^n
  Vec acceleration(const Vec& a, const Vec& b) const {
    Vec r = Vec::Zero(dim);
    for (int l = 0; l < dim; ++l) {
      double s = 0.0;
      for (int m = 0; m < dim; ++m) {
        if (a(m) == 0.0) continue;
        for (int n = 0; n < dim; ++n) s += christoffel(l, m, n) * a(m) * b(n);
      }
      r(l) = -s;
    }
    return r;
  }

  // The vector R(a, b)c.
  Vec curvature_operator(const Vec& a, const Vec& b, const Vec& c) const {
    Vec r = Vec::Zero(dim);
    for (int rr = 0; rr < dim; ++rr) {
      double s = 0.0;
      for (int ss = 0; ss < dim; ++ss) {
        if (c(ss) == 0.0) continue;
        for (int m = 0; m < dim; ++m) {
          if (a(m) == 0.0) continue;
          for (int n = 0; n < dim; ++n) s += riem(rr, ss, m, n) * c(ss) * a(m) * b(n);
        }
      }
      r(rr) = s;
    }
    return r;
  }
};

inline Connection connection_from_jet(const MetricJet& mj, bool with_riemann) {
  const int d = static_cast<int>(mj.g.rows());
  Connection c;
  c.dim = d;
  c.g = mj.g;
  if (!mj.g.allFinite()) throw GeometryError("metric is not finite");
  // Exact-zero pivot test: a relative threshold would reject valid but badly scaled charts.
  Eigen::FullPivLU<Mat> lu(mj.g);
  lu.setThreshold(std::numeric_limits<double>::min());
  if (!lu.isInvertible()) throw GeometryError("singular metric");
  c.ginv = lu.inverse();
  if (!c.ginv.allFinite()) throw GeometryError("singular metric");

  auto idx3 = [d](int a, int b, int e) { return static_cast<std::size_t>((a * d + b) * d + e); };
  // Lowered symbols G_{s mn}.
  std::vector<double> low(static_cast<std::size_t>(d * d * d));
  for (int s = 0; s < d; ++s)
    for (int m = 0; m < d; ++m)
      for (int n = 0; n < d; ++n)
        low[idx3(s, m, n)] = 0.5 * (mj.dg[static_cast<std::size_t>(m)](s, n) + mj.dg[static_cast<std::size_t>(n)](s, m) -
                                    mj.dg[static_cast<std::size_t>(s)](m, n));
  c.gamma.assign(static_cast<std::size_t>(d * d * d), 0.0);
  for (int l = 0; l < d; ++l)
    for (int m = 0; m < d; ++m)
      for (int n = 0; n < d; ++n) {
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += c.ginv(l, a) * low[idx3(a, m, n)];
        c.gamma[idx3(l, m, n)] = s;
      }
  if (!with_riemann) return c;

  // dgamma[k][l][m][n] = d_k G^l_{mn} = -g^{la} (d_k g_ab) G^b_{mn} + g^{ls} d_k G_{smn}
  std::vector<double> dgamma(static_cast<std::size_t>(d * d * d * d));
  auto idx4 = [d](int a, int b, int e, int f) { return static_cast<std::size_t>(((a * d + b) * d + e) * d + f); };
  std::vector<double> dlow(static_cast<std::size_t>(d * d * d));
  for (int k = 0; k < d; ++k) {
    const Mat& dk = mj.dg[static_cast<std::size_t>(k)];
    for (int s = 0; s < d; ++s)
      for (int m = 0; m < d; ++m)
        for (int n = 0; n < d; ++n)
          dlow[idx3(s, m, n)] = 0.5 * (mj.d2g[static_cast<std::size_t>(k * d + m)](s, n) +
                                       mj.d2g[static_cast<std::size_t>(k * d + n)](s, m) -
                                       mj.d2g[static_cast<std::size_t>(k * d + s)](m, n));
    const Mat ginv_dk = c.ginv * dk;
    for (int l = 0; l < d; ++l)
      for (int m = 0; m < d; ++m)
        for (int n = 0; n < d; ++n) {
          double s = 0.0;
          for (int a = 0; a < d; ++a) s += c.ginv(l, a) * dlow[idx3(a, m, n)] - ginv_dk(l, a) * c.gamma[idx3(a, m, n)];
          dgamma[idx4(k, l, m, n)] = s;
        }
  }
  c.riemann.assign(static_cast<std::size_t>(d * d * d * d), 0.0);
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s)
      for (int m = 0; m < d; ++m)
        for (int n = 0; n < d; ++n) {
          double v = dgamma[idx4(m, r, n, s)] - dgamma[idx4(n, r, m, s)];
          for (int l = 0; l < d; ++l) v += c.gamma[idx3(r, m, l)] * c.gamma[idx3(l, n, s)] - c.gamma[idx3(r, n, l)] * c.gamma[idx3(l, m, s)];
          c.riemann[idx4(r, s, m, n)] = v;
        }
  return c;
}

inline Connection connection_at(const MetricSpec& m, const Vec& x, bool with_riemann) {
  return connection_from_jet(metric_jet(m, x), with_riemann);
}

struct CurvaturePack {
  Vec x;
  Connection conn;
  Mat ricci;
  Mat hess_weight;  // covariant Hessian of V
  Vec dweight;      // dV (covector)
  Vec grad_weight;  // index-raised gradient of V

  Mat bakry_emery_ricci() const { return ricci + hess_weight; }
  double ric(const Vec& v) const { return v.dot(ricci * v); }
};

inline Mat ricci_from(const Connection& c) {
  const int d = c.dim;
  Mat r = Mat::Zero(d, d);
  for (int s = 0; s < d; ++s)
    for (int n = 0; n < d; ++n) {
      double v = 0.0;
      for (int k = 0; k < d; ++k) v += c.riem(k, s, k, n);
      r(s, n) = v;
    }
  return r;
}

inline CurvaturePack curvature_at(const MetricSpec& m, const Vec& x) {
  if (!inside_chart(m, x)) throw GeometryError("point outside the chart domain");
  CurvaturePack p;
  p.x = x;
  p.conn = connection_at(m, x, true);
  p.ricci = ricci_from(p.conn);
  const int d = m.dim;
  p.hess_weight = Mat::Zero(d, d);
  p.dweight = Vec::Zero(d);
  if (m.weight) {
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    Jet2 j = m.mode == DerivativeMode::Jet ? eval_jet2(*m.weight, xs) : eval_jet2_fd(*m.weight, xs, m.fd_step);
    p.dweight = Vec(j.grad);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        double v = j.hess(a, b);
        for (int l = 0; l < d; ++l) v -= p.conn.christoffel(l, a, b) * j.grad(l);
        p.hess_weight(a, b) = v;
      }
  }
  p.grad_weight = p.conn.ginv * p.dweight;
  return p;
}

enum class CausalType { Timelike, Null, Spacelike };
enum class TimeOrientation { Future, Past, Unoriented };

struct CausalClass {
  CausalType type;
  TimeOrientation orientation;
  double norm;  // <v,v>
};

inline const char* to_string(CausalType t) {
  switch (t) {
    case CausalType::Timelike: return "timelike";
    case CausalType::Null: return "null";
    case CausalType::Spacelike: return "spacelike";
  }
  return "?";
}

// Sign of <v,v> with a dead band |<v,v>| <= tol*|v|^2 (chart Euclidean norm) counted as null.
// Causal vectors are oriented against the metric's reference timelike field.
inline CausalClass classify_vector(const MetricSpec& m, const Vec& x, const Vec& v, double tol = 1e-9) {
  if (v.squaredNorm() == 0.0) throw PreconditionError("zero vector has no causal character");
  const Mat g = metric_at(m, x);
  const double n = dot(g, v, v);
  CausalClass c{CausalType::Spacelike, TimeOrientation::Unoriented, n};
  if (std::abs(n) <= tol * v.squaredNorm()) c.type = CausalType::Null;
  else if (n < 0.0) c.type = CausalType::Timelike;
  if (c.type != CausalType::Spacelike) {
    const double s = dot(g, v, reference_at(m, x));
    c.orientation = s < 0.0 ? TimeOrientation::Future : TimeOrientation::Past;
  }
  return c;
}

// (N' - n + 1) Ric^V(v,v) - dV(v)^2 for a null v; nonnegative iff the Bakry-Emery
// N'-null inequality holds at (x, v). Here n + 1 is the chart dimension.
inline double be_null_gap(const CurvaturePack& p, const Vec& v, double n_prime, double tol = 1e-9) {
  const int n = static_cast<int>(v.size()) - 1;
  if (!(n_prime > n - 1)) throw PreconditionError("N' must exceed n - 1");
  const double nn = dot(p.conn.g, v, v);
  if (std::abs(nn) > tol * v.squaredNorm()) throw GeometryError("vector is not null within tolerance");
  const double dv = p.dweight.dot(v);
  return (n_prime - n + 1) * v.dot(p.bakry_emery_ricci() * v) - dv * dv;
}

inline double be_null_gap(const MetricSpec& m, const Vec& x, const Vec& v, double n_prime, double tol = 1e-9) {
  return be_null_gap(curvature_at(m, x), v, n_prime, tol);
}

}  // namespace nullconvex

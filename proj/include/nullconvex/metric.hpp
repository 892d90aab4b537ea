#pragma once

// Weighted Lorentzian metric on a single chart, plus the built-in catalog.

#include "nullconvex/core.hpp"
#include "nullconvex/expression.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nullconvex {

enum class DerivativeMode { Jet, FiniteDifference };

struct MetricSpec {
  std::string name = "user";
  int dim = 0;
  // Row-major dim x dim; entries (i,j) and (j,i) hold the same expression.
  std::vector<Expression> components;
  std::optional<Expression> weight;
  // Positive inside the chart.
  std::optional<Expression> chart_domain;
  // Future-directed timelike reference field, one expression per component.
  std::vector<Expression> reference;
  std::map<std::string, std::string> parameters;

  DerivativeMode mode = DerivativeMode::Jet;
  double fd_step = 1e-4;

  const Expression& component(int i, int j) const { return components[static_cast<std::size_t>(i * dim + j)]; }
  bool has_weight() const { return weight.has_value(); }
};

using MetricPtr = std::shared_ptr<const MetricSpec>;

// g, first and second partial derivatives at one chart point.
struct MetricJet {
  Mat g;
  std::vector<Mat> dg;   // dg[k](i,j) = d_k g_ij
  std::vector<Mat> d2g;  // d2g[k*dim+l](i,j) = d_k d_l g_ij
};

// Builds a metric from component sources. `components` is row-major dim*dim; only
// the upper triangle is read. `reference` defaults to the chart vector e0.
inline MetricSpec make_metric(int dim, const std::vector<std::string>& components,
                              const std::optional<std::string>& weight = std::nullopt,
                              const std::optional<std::string>& domain = std::nullopt,
                              const std::vector<std::string>& reference = {},
                              const std::map<std::string, double>& params = {}) {
  if (dim < 3 || dim > kMaxDim) throw PreconditionError("chart dimension must be in [3, " + std::to_string(kMaxDim) + "]");
  if (components.size() != static_cast<std::size_t>(dim * dim))
    throw PreconditionError("metric needs dim*dim component expressions");
  MetricSpec m;
  m.dim = dim;
  m.components.resize(static_cast<std::size_t>(dim * dim));
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      Expression e = parse(components[static_cast<std::size_t>(i * dim + j)], dim, params);
      m.components[static_cast<std::size_t>(i * dim + j)] = e;
      m.components[static_cast<std::size_t>(j * dim + i)] = e;
    }
  }
  if (weight) m.weight = parse(*weight, dim, params);
  if (domain) m.chart_domain = parse(*domain, dim, params);
  if (reference.empty()) {
    for (int i = 0; i < dim; ++i) m.reference.push_back(parse(i == 0 ? "1" : "0", dim));
  } else {
    if (reference.size() != static_cast<std::size_t>(dim)) throw PreconditionError("reference field needs dim components");
    for (const auto& r : reference) m.reference.push_back(parse(r, dim, params));
  }
  for (const auto& [k, v] : params) m.parameters[k] = format_literal(v);
  return m;
}

inline Mat metric_at(const MetricSpec& m, const Vec& x) {
  Mat g(m.dim, m.dim);
  for (int i = 0; i < m.dim; ++i)
    for (int j = i; j < m.dim; ++j) g(i, j) = g(j, i) = evaluate(m.component(i, j), x);
  return g;
}

inline MetricJet metric_jet(const MetricSpec& m, const Vec& x) {
  const int d = m.dim;
  MetricJet mj;
  mj.g = Mat(d, d);
  mj.dg.assign(static_cast<std::size_t>(d), Mat(d, d));
  mj.d2g.assign(static_cast<std::size_t>(d * d), Mat(d, d));
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const Expression& e = m.component(i, j);
      Jet2 jet = e.is_constant() ? Jet2::constant(evaluate(e, xs), d)
                 : m.mode == DerivativeMode::Jet ? eval_jet2(e, xs)
                                                 : eval_jet2_fd(e, xs, m.fd_step);
      mj.g(i, j) = mj.g(j, i) = jet.value;
      for (int k = 0; k < d; ++k) {
        mj.dg[static_cast<std::size_t>(k)](i, j) = mj.dg[static_cast<std::size_t>(k)](j, i) = jet.grad(k);
        for (int l = 0; l < d; ++l) {
          auto& h = mj.d2g[static_cast<std::size_t>(k * d + l)];
          h(i, j) = h(j, i) = jet.hess(k, l);
        }
      }
    }
  }
  return mj;
}

inline Vec reference_at(const MetricSpec& m, const Vec& x) {
  Vec r(m.dim);
  for (int i = 0; i < m.dim; ++i) r(i) = evaluate(m.reference[static_cast<std::size_t>(i)], x);
  return r;
}

inline double weight_at(const MetricSpec& m, const Vec& x) { return m.weight ? evaluate(*m.weight, x) : 0.0; }

// Covector dV at x (zero without a weight).
inline Vec weight_differential(const MetricSpec& m, const Vec& x) {
  if (!m.weight) return Vec::Zero(m.dim);
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  Jet2 j = m.mode == DerivativeMode::Jet ? eval_jet2(*m.weight, xs) : eval_jet2_fd(*m.weight, xs, m.fd_step);
  return Vec(j.grad);
}

inline bool inside_chart(const MetricSpec& m, const Vec& x) {
  if (!m.chart_domain) return true;
  try {
    return evaluate(*m.chart_domain, x) > 0.0;
  } catch (const DomainError&) {
    return false;
  }
}

inline double dot(const Mat& g, const Vec& a, const Vec& b) { return a.dot(g * b); }

// ---------------------------------------------------------------------------------------------
// Built-ins
// ---------------------------------------------------------------------------------------------

inline MetricSpec minkowski(int dim = 4) {
  std::vector<std::string> c(static_cast<std::size_t>(dim * dim), "0");
  for (int i = 0; i < dim; ++i) c[static_cast<std::size_t>(i * dim + i)] = i == 0 ? "-1" : "1";
  MetricSpec m = make_metric(dim, c);
  m.name = "minkowski";
  m.parameters["dim"] = std::to_string(dim);
  return m;
}

// Ingoing Eddington-Finkelstein chart (v, r, theta, phi). Regular across r = 2M.
inline MetricSpec schwarzschild_ef(double mass = 1.0) {
  const std::map<std::string, double> p = {{"M", mass}};
  std::vector<std::string> c(16, "0");
  c[0] = "-(1 - 2*M/x1)";
  c[1] = "1";
  c[10] = "x1^2";
  c[15] = "x1^2*sin(x2)^2";
  MetricSpec m = make_metric(4, c, std::nullopt, "x1*sin(x2)", {"1", "-(0.5 + M/x1)", "0", "0"}, p);
  m.name = "schwarzschild_ef";
  return m;
}

// Spatially flat FLRW, -dt^2 + a(t)^2 dx^2, with a given as an expression in x0.
inline MetricSpec flrw(const std::string& scale_factor = "exp(x0^2)", int dim = 4) {
  std::vector<std::string> c(static_cast<std::size_t>(dim * dim), "0");
  c[0] = "-1";
  for (int i = 1; i < dim; ++i) c[static_cast<std::size_t>(i * dim + i)] = "(" + scale_factor + ")^2";
  MetricSpec m = make_metric(dim, c, std::nullopt, "(" + scale_factor + ")");
  m.name = "flrw";
  m.parameters["a"] = scale_factor;
  m.parameters["dim"] = std::to_string(dim);
  return m;
}

// Flat metric with a weight e^{-V}.
inline MetricSpec weighted_minkowski(const std::string& weight = "x1", int dim = 4) {
  MetricSpec m = minkowski(dim);
  m.weight = parse(weight, dim);
  m.name = "weighted_minkowski";
  m.parameters["V"] = weight;
  return m;
}

struct BuiltinInfo {
  std::string name;
  std::string chart;
  std::vector<std::pair<std::string, std::string>> parameters;  // name, default
};

inline std::vector<BuiltinInfo> builtin_catalog() {
  return {
      {"minkowski", "Cartesian (t, x1, ..., x{dim-1}); e0 = d_t", {{"dim", "4"}}},
      {"schwarzschild_ef", "ingoing Eddington-Finkelstein (v, r, theta, phi); domain r > 0, 0 < theta < pi; "
                           "reference field d_v - (1/2 + M/r) d_r",
       {{"M", "1"}}},
      {"flrw", "spatially flat, comoving Cartesian (t, x1, ..); scale factor a given as an expression in x0",
       {{"a", "exp(x0^2)"}, {"dim", "4"}}},
      {"weighted_minkowski", "Minkowski with weight e^{-V}, V an expression in x0..", {{"V", "x1"}, {"dim", "4"}}},
  };
}

}  // namespace nullconvex

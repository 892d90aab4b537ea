#pragma once

// Codimension-2 spacelike seed surfaces, their null normals and null second fundamental forms.

#include "nullconvex/core.hpp"
#include "nullconvex/curvature.hpp"
#include "nullconvex/expression.hpp"
#include "nullconvex/metric.hpp"
#include "nullconvex/quadrature.hpp"

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nullconvex {

// phi(theta) with first and second parameter derivatives.
struct SurfacePoint {
  Vec point;
  Mat tangents;              // dim x k, column a = d_a phi
  std::vector<Vec> second;   // second[a*k+b] = d_a d_b phi
};

using SurfaceMap = std::function<SurfacePoint(std::span<const double>)>;

struct SeedNode {
  std::vector<double> theta;
  double weight = 0.0;
};

class SeedSurface {
 public:
  SeedSurface(int chart_dim, int param_dim, SurfaceMap map, std::vector<std::pair<double, double>> box,
              std::vector<SeedNode> nodes, bool flip_orientation = false)
      : chart_dim_(chart_dim),
        param_dim_(param_dim),
        map_(std::move(map)),
        box_(std::move(box)),
        nodes_(std::move(nodes)),
        flip_(flip_orientation) {
    if (param_dim_ != chart_dim_ - 2) throw PreconditionError("seed surface must have codimension 2");
    if (nodes_.empty()) throw PreconditionError("seed surface has no quadrature nodes");
  }

  int chart_dim() const { return chart_dim_; }
  int param_dim() const { return param_dim_; }
  bool flipped() const { return flip_; }
  const std::vector<std::pair<double, double>>& box() const { return box_; }
  const std::vector<SeedNode>& nodes() const { return nodes_; }
  const SeedNode& node(std::size_t i) const { return nodes_[i]; }

  SurfacePoint evaluate(std::span<const double> theta) const { return map_(theta); }
  SurfacePoint evaluate_node(std::size_t i) const { return map_(nodes_[i].theta); }

  // The same surface with the outer/inner labels exchanged.
  SeedSurface with_flipped_orientation() const {
    SeedSurface s = *this;
    s.flip_ = !flip_;
    return s;
  }

  // Same map, different nodes (e.g. a small cap around one point).
  SeedSurface with_nodes(std::vector<SeedNode> nodes, std::vector<std::pair<double, double>> box) const {
    return SeedSurface(chart_dim_, param_dim_, map_, std::move(box), std::move(nodes), flip_);
  }

 private:
  int chart_dim_;
  int param_dim_;
  SurfaceMap map_;
  std::vector<std::pair<double, double>> box_;
  std::vector<SeedNode> nodes_;
  bool flip_;
};

inline std::vector<SeedNode> box_nodes(const std::vector<std::pair<double, double>>& box, QuadratureRule rule,
                                       const std::vector<int>& resolution) {
  if (resolution.size() != box.size()) throw PreconditionError("one resolution entry per parameter");
  std::vector<Rule1D> rules;
  for (std::size_t i = 0; i < box.size(); ++i) rules.push_back(make_rule(rule, resolution[i], box[i].first, box[i].second));
  std::vector<SeedNode> nodes;
  for (auto& p : product_rule(rules)) nodes.push_back({std::move(p.theta), p.weight});
  return nodes;
}

// Seed map given by one expression per chart coordinate in parameters u0..u{k-1}.
inline SeedSurface seed_from_expressions(int chart_dim, const std::vector<std::string>& components,
                                         std::vector<std::pair<double, double>> box, QuadratureRule rule,
                                         const std::vector<int>& resolution, bool flip_orientation = false,
                                         const std::map<std::string, double>& params = {}) {
  const int k = chart_dim - 2;
  if (components.size() != static_cast<std::size_t>(chart_dim))
    throw PreconditionError("seed map needs one expression per chart coordinate");
  if (box.size() != static_cast<std::size_t>(k)) throw PreconditionError("seed parameter box must have n-1 intervals");
  std::vector<Expression> comp;
  for (const auto& c : components) comp.push_back(parse(c, chart_variables(k, "u"), params));
  SurfaceMap map = [comp, chart_dim, k](std::span<const double> theta) {
    SurfacePoint sp;
    sp.point = Vec(chart_dim);
    sp.tangents = Mat(chart_dim, k);
    sp.second.assign(static_cast<std::size_t>(k * k), Vec(chart_dim));
    for (int mu = 0; mu < chart_dim; ++mu) {
      const Jet2 j = eval_jet2(comp[static_cast<std::size_t>(mu)], theta);
      sp.point(mu) = j.value;
      for (int a = 0; a < k; ++a) {
        sp.tangents(mu, a) = j.grad(a);
        for (int b = 0; b < k; ++b) sp.second[static_cast<std::size_t>(a * k + b)](mu) = j.hess(a, b);
      }
    }
    return sp;
  };
  auto nodes = box_nodes(box, rule, resolution);
  return SeedSurface(chart_dim, k, std::move(map), std::move(box), std::move(nodes), flip_orientation);
}

// Round coordinate sphere {x0 = t0, |x - c| = radius} in a Cartesian chart of dimension 4,
// parametrized by polar/azimuthal angles.
inline SeedSurface coordinate_sphere(double t0, double radius, int n_polar, int n_azimuth, bool flip = false) {
  const std::string r = format_literal(radius);
  return seed_from_expressions(4, {format_literal(t0), r + "*sin(u0)*cos(u1)", r + "*sin(u0)*sin(u1)", r + "*cos(u0)"},
                               {{0.0, std::numbers::pi}, {0.0, 2 * std::numbers::pi}}, QuadratureRule::GaussLegendre,
                               {n_polar, n_azimuth}, flip);
}

// Everything about the seed's normal geometry at one point.
struct SeedFrame {
  Vec point;
  Mat g;
  Mat tangents;   // dim x k
  Mat induced;    // k x k induced metric in the parameter basis
  Mat onb;        // dim x k, g-orthonormal basis of the tangent space
  Mat to_onb;     // k x k, onb = tangents * to_onb
  double area_element = 0.0;  // sqrt(det induced)
  Vec tau;        // unit future timelike normal
  Vec nu;         // unit spacelike normal, outer unless flipped
  Vec outer;      // L,   <L, e_ref> = -1
  Vec inner;      // Lbar, <Lbar, e_ref> = -1
};

inline SeedFrame seed_frame(const MetricSpec& m, const SurfacePoint& sp, bool flip) {
  const int d = m.dim;
  const int k = static_cast<int>(sp.tangents.cols());
  SeedFrame f;
  f.point = sp.point;
  f.tangents = sp.tangents;
  f.g = metric_at(m, sp.point);
  f.induced = sp.tangents.transpose() * f.g * sp.tangents;
  Eigen::LLT<Mat> llt(f.induced);
  if (llt.info() != Eigen::Success) throw GeometryError("seed tangent space is degenerate or not spacelike");
  const Mat lower = llt.matrixL();
  if (lower.diagonal().minCoeff() <= 1e-12 * std::max(1.0, lower.diagonal().maxCoeff()))
    throw GeometryError("seed tangent space is degenerate");
  f.area_element = lower.diagonal().prod();
  f.to_onb = lower.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(k, k));
  f.onb = sp.tangents * f.to_onb;

  const Mat h_inv = f.induced.inverse();
  auto normal_part = [&](const Vec& x) -> Vec { return x - sp.tangents * (h_inv * (sp.tangents.transpose() * (f.g * x))); };

  const Vec ref = reference_at(m, sp.point);
  if (!(dot(f.g, ref, ref) < 0.0)) throw GeometryError("reference field is not timelike at the seed");
  Vec tau = normal_part(ref);
  const double tn = dot(f.g, tau, tau);
  if (!(tn < 0.0)) throw GeometryError("normal projection of the reference field is not timelike");
  const double tau_len = std::sqrt(-tn);
  f.tau = tau / tau_len;

  Vec best;
  double best_score = -1.0;
  for (int j = 0; j < d; ++j) {
    Vec x = normal_part(Vec::Unit(d, j));
    x += dot(f.g, x, f.tau) * f.tau;
    const double s = dot(f.g, x, x);
    if (s > best_score) {
      best_score = s;
      best = x;
    }
  }
  if (!(best_score > 1e-12)) throw GeometryError("cannot build a spacelike normal");
  f.nu = best / std::sqrt(dot(f.g, best, best));

  Mat orient(d, d);
  orient.col(0) = f.tau;
  orient.block(0, 1, d, k) = sp.tangents;
  orient.col(d - 1) = f.nu;
  if (orient.determinant() < 0.0) f.nu = -f.nu;
  if (flip) f.nu = -f.nu;

  // <tau_hat, e_ref> = -tau_len and <nu, e_ref> = 0, so this fixes <L, e_ref> = -1.
  f.outer = (f.tau + f.nu) / tau_len;
  f.inner = (f.tau - f.nu) / tau_len;
  return f;
}

struct NullNormals {
  Vec outer;
  Vec inner;
};

// The two future null normals at phi(theta), each normalized by <., e_ref> = -1.
inline NullNormals null_normals(const MetricSpec& m, const SeedSurface& s, std::span<const double> theta) {
  const SeedFrame f = seed_frame(m, s.evaluate(theta), s.flipped());
  return {f.outer, f.inner};
}

struct SecondFundamentalForm {
  Mat pi;             // <grad_{e_i} w, e_j> on the orthonormal tangent basis
  double mean = 0.0;  // trace; +(n-1)/r for the outgoing flat sphere
};

// Null second fundamental form of the seed along the normal w, from
// <grad_a w, T_b> = -<w, d_a d_b phi + Gamma(T_a, T_b)>.
inline SecondFundamentalForm second_fundamental_form(const MetricSpec& m, const SurfacePoint& sp, const SeedFrame& f,
                                                     const Vec& w, double tol = 1e-8) {
  const int k = static_cast<int>(sp.tangents.cols());
  const Vec gw = f.g * w;
  if (std::abs(gw.dot(w)) > tol * std::max(1.0, w.squaredNorm())) throw GeometryError("normal is not null");
  for (int a = 0; a < k; ++a) {
    const double s = std::abs(gw.dot(sp.tangents.col(a)));
    if (s > tol * std::max(1.0, w.norm() * sp.tangents.col(a).norm())) throw GeometryError("vector is not normal to the seed");
  }
  const Connection c = connection_at(m, sp.point, false);
  Mat pi_param(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      const Vec cov = sp.second[static_cast<std::size_t>(a * k + b)] - c.acceleration(sp.tangents.col(a), sp.tangents.col(b));
      pi_param(a, b) = -gw.dot(cov);
    }
  SecondFundamentalForm r;
  r.pi = f.to_onb.transpose() * pi_param * f.to_onb;
  r.pi = 0.5 * (r.pi + r.pi.transpose());
  r.mean = r.pi.trace();
  return r;
}

inline SecondFundamentalForm second_fundamental_form(const MetricSpec& m, const SeedSurface& s,
                                                     std::span<const double> theta, const Vec& w) {
  const SurfacePoint sp = s.evaluate(theta);
  return second_fundamental_form(m, sp, seed_frame(m, sp, s.flipped()), w);
}

}  // namespace nullconvex

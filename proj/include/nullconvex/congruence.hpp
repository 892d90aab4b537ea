#pragma once

// The null hypersurface swept out by the geodesics leaving a seed along one null normal.
// Ray k realizes the transport map T_t on node k: T_t(phi(theta_k)) = gamma_k(t).

#include "nullconvex/core.hpp"
#include "nullconvex/curvature.hpp"
#include "nullconvex/metric.hpp"
#include "nullconvex/parallel.hpp"
#include "nullconvex/ray.hpp"
#include "nullconvex/seed.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace nullconvex {

enum class NormalChoice { Outer, Inner };

struct CongruenceOptions {
  NormalChoice normal = NormalChoice::Outer;
  double scale = 1.0;  // K~ = scale * (normalized null normal)
  RayOptions ray{};
  unsigned workers = 0;
};

struct CongruenceRay {
  std::size_t node = 0;
  Vec seed_point;
  Vec generator;             // K~ at the seed
  double weight = 0.0;       // quadrature weight w_k
  double area_element = 0.0; // J_phi(theta_k)
  Mat u0;                    // initial Weingarten matrix on the screen
  RaySolution ray;
};

class Congruence {
 public:
  Congruence(MetricPtr metric, SeedSurface seed, CongruenceOptions opts, std::vector<CongruenceRay> rays)
      : metric_(std::move(metric)), seed_(std::move(seed)), opts_(opts), rays_(std::move(rays)) {}

  const MetricSpec& metric() const { return *metric_; }
  const MetricPtr& metric_ptr() const { return metric_; }
  const SeedSurface& seed() const { return seed_; }
  const CongruenceOptions& options() const { return opts_; }
  double scale() const { return opts_.scale; }
  int dim() const { return metric_->dim; }
  std::size_t size() const { return rays_.size(); }
  const CongruenceRay& ray(std::size_t i) const { return rays_[i]; }
  const std::vector<CongruenceRay>& rays() const { return rays_; }

 private:
  MetricPtr metric_;
  SeedSurface seed_;
  CongruenceOptions opts_;
  std::vector<CongruenceRay> rays_;
};

// Initial data for the ray leaving node `i`.
inline CongruenceRay congruence_ray_init(const MetricSpec& m, const SeedSurface& seed, std::size_t i,
                                         const CongruenceOptions& opts, ScreenInit& screen) {
  const SurfacePoint sp = seed.evaluate_node(i);
  const SeedFrame f = seed_frame(m, sp, seed.flipped());
  const bool outer = opts.normal == NormalChoice::Outer;
  const Vec w = outer ? f.outer : f.inner;
  const Vec other = outer ? f.inner : f.outer;
  CongruenceRay r{i, sp.point, opts.scale * w, seed.node(i).weight, f.area_element, Mat(), RaySolution(nullptr, false)};
  r.u0 = opts.scale * second_fundamental_form(m, sp, f, w).pi;
  screen.frame = f.onb;
  screen.lbar = other / (-dot(f.g, other, r.generator));
  screen.u0 = r.u0;
  return r;
}

inline Congruence build_congruence(MetricPtr metric, const SeedSurface& seed, double t_max,
                                   CongruenceOptions opts = {}) {
  if (!(opts.scale > 0.0)) throw PreconditionError("generator scale must be positive");
  if (!(t_max > 0.0)) throw PreconditionError("t_max must be positive");
  opts.ray.t_max = t_max;
  const MetricSpec& m = *metric;
  const std::size_t n = seed.nodes().size();
  std::vector<std::optional<CongruenceRay>> out(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        ScreenInit screen;
        CongruenceRay r = congruence_ray_init(m, seed, i, opts, screen);
        r.ray = trace_ray(metric, r.seed_point, r.generator, opts.ray, &screen);
        out[i] = std::move(r);
      },
      opts.workers);
  std::vector<CongruenceRay> rays;
  rays.reserve(n);
  for (auto& r : out) rays.push_back(std::move(*r));
  return Congruence(std::move(metric), seed, opts, std::move(rays));
}

using NodePredicate = std::function<bool(std::size_t)>;

// Quadrature of the weighted area formula: sum_k w_k y_k(t) e^{-V(gamma_k(t))} J_phi(theta_k).
inline double cross_section_measure(const Congruence& c, double t, const NodePredicate& subset = {}) {
  double sum = 0.0;
  for (const auto& r : c.rays()) {
    if (subset && !subset(r.node)) continue;
    if (!r.ray.alive_at(t)) throw PreconditionError("ray " + std::to_string(r.node) + " is not alive at t = " + std::to_string(t));
    sum += r.weight * r.ray.weighted_det(t) * r.area_element;
  }
  return sum;
}

// Invariant residuals of one ray sampled on a uniform grid of its live interval.
struct RayDiagnostics {
  double null_residual = 0.0;      // max |<g',g'>| / |g'|^2
  double gram_drift = 0.0;         // max |<E_i,E_j> - delta_ij|, |<E_i,g'>|; includes pre-projection drift in the window
  double raychaudhuri = 0.0;       // max |trU' + tr U^2 + Ric(g',g')| / (1 + trU^2)
  double asymmetry = 0.0;          // max |U - U^T| / max(|U|, 1e-6)
  double trace_cs = 0.0;           // min tr U^2 - (trU)^2/(n-1)
  double log_det = 0.0;            // max |(log y)' - trU| / (1 + |trU|)
  std::size_t samples = 0;
};

inline RayDiagnostics ray_diagnostics(const RaySolution& r, int samples = 64) {
  const MetricSpec& m = r.metric();
  const int d = m.dim, k = d - 2;
  const int ao = 3 * d + k * d;
  RayDiagnostics out;
  out.trace_cs = std::numeric_limits<double>::infinity();
  double t_hi = r.t_end();
  if (r.focal_time()) t_hi = std::min(t_hi, *r.focal_time());
  // Stay clear of a focal point where U is unbounded.
  if (r.exit() == RayExit::Focal) t_hi *= 0.98;
  out.gram_drift = r.max_frame_drift(t_hi);
  for (int i = 0; i <= samples; ++i) {
    const double t = t_hi * i / samples;
    const Vec s = r.state(t);
    const Vec x = s.head(d), u = s.segment(d, d);
    const CurvaturePack p = curvature_at(m, x);
    const Mat& g = p.conn.g;
    out.null_residual = std::max(out.null_residual, std::abs(dot(g, u, u)) / u.squaredNorm());
    const Mat e = r.frame_of(s);
    const Mat gram = e.transpose() * g * e - Mat::Identity(k, k);
    out.gram_drift = std::max(out.gram_drift, gram.cwiseAbs().maxCoeff());
    out.gram_drift = std::max(out.gram_drift, (e.transpose() * g * u).cwiseAbs().maxCoeff());
    const Mat a = r.jacobi_of(s), ap = r.jacobi_rate_of(s);
    const Mat ainv = a.inverse();
    const Mat uu = ap * ainv;
    const double tr = uu.trace(), tr2 = (uu * uu).trace();
    out.asymmetry = std::max(out.asymmetry, (uu - uu.transpose()).norm() / std::max(uu.norm(), 1e-6));
    out.trace_cs = std::min(out.trace_cs, tr2 - tr * tr / k);
    if (!r.steps()) continue;
    const Vec ds = r.state_rate(t);
    const Mat da = Eigen::Map<const Mat>(ds.data() + ao, k, k);
    const Mat dap = Eigen::Map<const Mat>(ds.data() + ao + k * k, k, k);
    const Mat du = dap * ainv - uu * (da * ainv);
    const double res = du.trace() + tr2 + p.ric(u);
    out.raychaudhuri = std::max(out.raychaudhuri, std::abs(res) / (1.0 + tr * tr));
    const double dlog = (da * ainv).trace();
    out.log_det = std::max(out.log_det, std::abs(dlog - tr) / (1.0 + std::abs(tr)));
    ++out.samples;
  }
  return out;
}

}  // namespace nullconvex

#pragma once

// Scenario-level checks built on the congruence and entropy machinery.

#include "nullconvex/congruence.hpp"
#include "nullconvex/core.hpp"
#include "nullconvex/curvature.hpp"
#include "nullconvex/entropy.hpp"
#include "nullconvex/metric.hpp"
#include "nullconvex/ode.hpp"
#include "nullconvex/seed.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace nullconvex {

using Box = std::vector<std::pair<double, double>>;

// ---------------------------------------------------------------------------
// Null energy scans

inline std::vector<Vec> grid_points(const Box& box, const std::vector<int>& counts) {
  if (counts.size() != box.size()) throw PreconditionError("one count per box dimension");
  std::vector<Vec> pts{Vec(0)};
  for (std::size_t i = 0; i < box.size(); ++i) {
    std::vector<Vec> next;
    const int c = counts[i];
    for (const Vec& p : pts)
      for (int j = 0; j < c; ++j) {
        Vec q(p.size() + 1);
        q.head(p.size()) = p;
        q(p.size()) = c == 1 ? 0.5 * (box[i].first + box[i].second)
                             : box[i].first + (box[i].second - box[i].first) * j / (c - 1);
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  return pts;
}

inline std::vector<Vec> random_points(const Box& box, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec> pts;
  for (std::size_t n = 0; n < count; ++n) {
    Vec p(static_cast<Eigen::Index>(box.size()));
    for (std::size_t i = 0; i < box.size(); ++i)
      p(static_cast<Eigen::Index>(i)) = std::uniform_real_distribution<double>(box[i].first, box[i].second)(rng);
    pts.push_back(std::move(p));
  }
  return pts;
}

// g-orthonormal basis e_0 = unit reference field, e_1..e_n spacelike.
inline Mat reference_frame(const MetricSpec& m, const Vec& x) {
  const int d = m.dim;
  const Mat g = metric_at(m, x);
  const Vec ref = reference_at(m, x);
  const double rr = dot(g, ref, ref);
  if (!(rr < 0.0)) throw GeometryError("reference field is not timelike");
  Mat e(d, d);
  e.col(0) = ref / std::sqrt(-rr);
  int filled = 1;
  for (int j = 0; j < d && filled < d; ++j) {
    Vec x2 = Vec::Unit(d, j);
    for (int i = 0; i < filled; ++i) {
      const Vec ei = e.col(i);
      x2 -= dot(g, x2, ei) / dot(g, ei, ei) * ei;
    }
    const double nn = dot(g, x2, x2);
    if (nn > 1e-10) e.col(filled++) = x2 / std::sqrt(nn);
  }
  if (filled < d) throw GeometryError("cannot complete an orthonormal frame");
  return e;
}

struct ScanOptions {
  double n_prime = 3.0;
  int directions = 16;
  double gap_tol = 1e-7;
  std::uint64_t seed = 1;
};

enum class EnergyVerdict { Holds, Violated };

inline const char* to_string(EnergyVerdict v) { return v == EnergyVerdict::Holds ? "holds" : "violated"; }

struct ScanReport {
  std::vector<Vec> points;
  std::vector<double> point_min_gap;  // min over directions at each point
  std::size_t skipped = 0;            // points outside the chart
  std::size_t evaluations = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  Vec argmin_point;
  Vec argmin_direction;
  double gap_tol = 0.0;
  double n_prime = 0.0;
  EnergyVerdict verdict = EnergyVerdict::Holds;
};

// Null directions e_0 + u with u unit in span(e_1..e_n): the 2n axis directions, then
// random ones from a seeded generator.
inline std::vector<Vec> scan_directions(const Mat& frame, int count, std::uint64_t seed) {
  const int d = static_cast<int>(frame.cols()), n = d - 1;
  std::vector<Vec> dirs;
  for (int i = 1; i <= n && static_cast<int>(dirs.size()) < count; ++i)
    for (double s : {1.0, -1.0})
      if (static_cast<int>(dirs.size()) < count) dirs.push_back(frame.col(0) + s * frame.col(i));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  while (static_cast<int>(dirs.size()) < count) {
    Vec c(n);
    for (int i = 0; i < n; ++i) c(i) = normal(rng);
    c.normalize();
    dirs.push_back(frame.col(0) + frame.rightCols(n) * c);
  }
  return dirs;
}

inline ScanReport nec_scan(const MetricSpec& m, const std::vector<Vec>& points, const ScanOptions& opts = {}) {
  ScanReport rep;
  rep.gap_tol = opts.gap_tol;
  rep.n_prime = opts.n_prime;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec& x = points[i];
    if (!inside_chart(m, x)) {
      ++rep.skipped;
      continue;
    }
    const CurvaturePack p = curvature_at(m, x);
    const Mat frame = reference_frame(m, x);
    double local = std::numeric_limits<double>::infinity();
    for (const Vec& v : scan_directions(frame, opts.directions, opts.seed + i)) {
      const double gap = be_null_gap(p, v, opts.n_prime, 1e-8);
      ++rep.evaluations;
      local = std::min(local, gap);
      if (gap < rep.min_gap) {
        rep.min_gap = gap;
        rep.argmin_point = x;
        rep.argmin_direction = v;
      }
    }
    rep.points.push_back(x);
    rep.point_min_gap.push_back(local);
  }
  rep.verdict = rep.min_gap < -rep.gap_tol ? EnergyVerdict::Violated : EnergyVerdict::Holds;
  return rep;
}

// ---------------------------------------------------------------------------
// Converse witness: a small seed through p whose null second fundamental form along the
// normal extending v is lambda * id, transported over an affine length r.

struct WitnessOptions {
  double delta = 0.1;
  double r = 0.1;
  int max_halvings = 12;
  int resolution = 4;  // Gauss-Legendre nodes per seed parameter
  std::optional<double> lambda;  // default: 0 without weight, -dV(N)/(N-n+1) otherwise
  std::vector<double> t_grid = uniform_grid();
  RayOptions ray{};
};

struct WitnessAttempt {
  double delta = 0.0;
  double r = 0.0;
  double min_slack = 0.0;
  double violation_margin = 0.0;
  ConvexityVerdict verdict = ConvexityVerdict::Consistent;
};

struct WitnessResult {
  bool found = false;
  double lambda = 0.0;
  double exponent = 0.0;
  double gap = 0.0;  // be_null_gap at (p, v)
  Vec point;
  Vec direction;
  std::vector<WitnessAttempt> attempts;
  std::optional<InterpolationReport> report;  // the violating report, or the last one tried
};

// Second-order normal-coordinate image of the paraboloid
//   Y(theta) = delta sum_a theta_a e_{a+1} - (lambda/2) delta^2 |theta|^2 e_1
// i.e. phi = p + Y - Gamma(p)(Y, Y)/2.
inline SeedSurface witness_seed(const MetricSpec& m, const Vec& p, const Mat& frame, double lambda, double delta,
                                int resolution) {
  const int d = m.dim, k = d - 2;
  const Connection c = connection_at(m, p, false);
  auto gamma = [c](const Vec& a, const Vec& b) -> Vec { return -c.acceleration(a, b); };
  const Vec e1 = frame.col(1);
  const Mat span = frame.rightCols(k);
  SurfaceMap map = [=](std::span<const double> theta) {
    Vec th(k);
    for (int a = 0; a < k; ++a) th(a) = theta[static_cast<std::size_t>(a)];
    const Vec y = delta * (span * th) - 0.5 * lambda * delta * delta * th.squaredNorm() * e1;
    std::vector<Vec> dy(static_cast<std::size_t>(k));
    for (int a = 0; a < k; ++a) dy[static_cast<std::size_t>(a)] = delta * span.col(a) - lambda * delta * delta * th(a) * e1;
    const Vec ddy = -lambda * delta * delta * e1;
    SurfacePoint sp;
    sp.point = p + y - 0.5 * gamma(y, y);
    sp.tangents = Mat(d, k);
    for (int a = 0; a < k; ++a) sp.tangents.col(a) = dy[static_cast<std::size_t>(a)] - gamma(y, dy[static_cast<std::size_t>(a)]);
    sp.second.resize(static_cast<std::size_t>(k * k));
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        Vec s = -gamma(dy[static_cast<std::size_t>(a)], dy[static_cast<std::size_t>(b)]);
        if (a == b) s += ddy - gamma(y, ddy);
        sp.second[static_cast<std::size_t>(a * k + b)] = s;
      }
    return sp;
  };
  Box box(static_cast<std::size_t>(k), {-1.0, 1.0});
  auto nodes = box_nodes(box, QuadratureRule::GaussLegendre, std::vector<int>(static_cast<std::size_t>(k), resolution));
  return SeedSurface(d, k, std::move(map), std::move(box), std::move(nodes));
}

inline WitnessResult witness_violation(MetricPtr metric, const Vec& p, const Vec& v, double exponent,
                                       const WitnessOptions& opts = {}) {
  const MetricSpec& m = *metric;
  const int d = m.dim, n = d - 1;
  const CausalClass cls = classify_vector(m, p, v, 1e-8);
  if (cls.type != CausalType::Null || cls.orientation != TimeOrientation::Future)
    throw PreconditionError("witness direction must be future-directed null");
  WitnessResult res;
  res.point = p;
  res.direction = v;
  res.exponent = exponent;
  const CurvaturePack pack = curvature_at(m, p);
  res.gap = be_null_gap(pack, v, exponent, 1e-8);

  // e_0 + e_1 is the positive multiple of v with unit timelike part.
  Mat frame = reference_frame(m, p);
  const Mat& g = pack.conn.g;
  const double a = -dot(g, v, frame.col(0));
  const Vec e1 = v / a - frame.col(0);
  Mat f2(d, d);
  f2.col(0) = frame.col(0);
  f2.col(1) = e1;
  int filled = 2;
  for (int j = 1; j < d && filled < d; ++j) {
    Vec x = frame.col(j);
    for (int i = 0; i < filled; ++i) {
      const Vec ei = f2.col(i);
      x -= dot(g, x, ei) / dot(g, ei, ei) * ei;
    }
    const double nn = dot(g, x, x);
    if (nn > 1e-10) f2.col(filled++) = x / std::sqrt(nn);
  }
  if (filled < d) throw GeometryError("cannot complete the witness frame");

  if (opts.lambda) {
    res.lambda = *opts.lambda;
  } else if (m.weight) {
    if (!(exponent > n - 1)) throw PreconditionError("weighted witness needs exponent > n - 1");
    res.lambda = -pack.dweight.dot(v / a) / (exponent - n + 1);
  }

  const double ref_len = std::sqrt(-dot(g, reference_at(m, p), reference_at(m, p)));
  double delta = opts.delta, r = opts.r;
  for (int attempt = 0; attempt <= opts.max_halvings; ++attempt, delta *= 0.5, r *= 0.5) {
    const SeedSurface seed = witness_seed(m, p, f2, res.lambda, delta, opts.resolution);
    // Pick the null normal whose spatial part points along e_1.
    const std::vector<double> centre(static_cast<std::size_t>(d - 2), 0.0);
    const NullNormals nn = null_normals(m, seed, centre);
    CongruenceOptions co;
    co.normal = dot(g, nn.outer, e1) > 0.0 ? NormalChoice::Outer : NormalChoice::Inner;
    // <L, e_ref> = -1 gives L = (e_0 + e_1)/|e_ref| at p, so K~(p) = r (e_0 + e_1).
    co.scale = r * ref_len;
    co.ray = opts.ray;
    auto cong = std::make_shared<const Congruence>(build_congruence(metric, seed, 1.0, co));
    const Measure mu = uniform_measure(cong);
    InterpolationReport rep = convexity_report(mu, exponent, opts.t_grid);
    res.attempts.push_back({delta, r, rep.min_slack, rep.violation_margin, rep.verdict});
    const bool violated = rep.verdict == ConvexityVerdict::Violated;
    res.report = std::move(rep);
    if (violated) {
      res.found = true;
      break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Area monotonicity along a congruence

enum class HawkingVerdict { Monotone, NonMonotoneIncomplete, NonMonotoneComplete, Inconclusive };

inline const char* to_string(HawkingVerdict v) {
  switch (v) {
    case HawkingVerdict::Monotone: return "monotone";
    case HawkingVerdict::NonMonotoneIncomplete: return "non-monotone, completeness fails";
    case HawkingVerdict::NonMonotoneComplete: return "non-monotone, complete";
    case HawkingVerdict::Inconclusive: return "inconclusive: incomplete";
  }
  return "?";
}

struct HawkingReport {
  double t0 = 0.0, t1 = 0.0;
  std::optional<double> m0, m1;
  double area_tol = 0.0;
  std::optional<double> completeness_fails_at;  // earliest focal/exit time among the selected rays
  std::optional<std::size_t> failing_ray;
  HawkingVerdict verdict = HawkingVerdict::Inconclusive;

  std::string describe() const {
    std::string s = to_string(verdict);
    if (completeness_fails_at && verdict != HawkingVerdict::Monotone) s += " at t=" + format_literal(*completeness_fails_at);
    return s;
  }
};

inline HawkingReport hawking_check(const Congruence& c, double t0, double t1, const NodePredicate& subset = {},
                                   double rel_tol = 1e-6) {
  if (!(t0 < t1)) throw PreconditionError("hawking check needs t0 < t1");
  HawkingReport rep;
  rep.t0 = t0;
  rep.t1 = t1;
  bool alive = true;
  for (const auto& r : c.rays()) {
    if (subset && !subset(r.node)) continue;
    const RaySolution& ray = r.ray;
    if (ray.exit() != RayExit::Reached) {
      const double at = ray.focal_time() ? *ray.focal_time() : ray.t_end();
      if (!rep.completeness_fails_at || at < *rep.completeness_fails_at) {
        rep.completeness_fails_at = at;
        rep.failing_ray = r.node;
      }
    }
    if (!ray.alive_at(t1)) alive = false;
  }
  if (!alive) {
    rep.verdict = HawkingVerdict::Inconclusive;
    try {
      rep.m0 = cross_section_measure(c, t0, subset);
    } catch (const PreconditionError&) {
    }
    return rep;
  }
  rep.m0 = cross_section_measure(c, t0, subset);
  rep.m1 = cross_section_measure(c, t1, subset);
  rep.area_tol = rel_tol * std::max(std::abs(*rep.m0), std::abs(*rep.m1));
  if (*rep.m0 <= *rep.m1 + rep.area_tol) rep.verdict = HawkingVerdict::Monotone;
  else rep.verdict = rep.completeness_fails_at ? HawkingVerdict::NonMonotoneIncomplete : HawkingVerdict::NonMonotoneComplete;
  return rep;
}

// ---------------------------------------------------------------------------
// Future-converging / trapped seeds

struct ConvergingNode {
  std::size_t node = 0;
  double h_outer = 0.0;  // H_{V,L} = -tr Pi_L + dV(L); positive means converging
  double h_inner = 0.0;
};

struct CapCheck {
  std::size_t node = 0;
  double h_outer = 0.0, h_inner = 0.0;
  double dlog_outer = 0.0, dlog_inner = 0.0;  // finite-difference d/dt log m_H(T_t(cap)) at t = 0
  bool signs_agree = true;
};

struct TrappedReport {
  std::vector<ConvergingNode> nodes;
  double eps_outer = 0.0;  // min over nodes of H_{V,L}
  double eps_inner = 0.0;
  double eps = 0.0;        // min of both
  bool trapped = false;
  std::optional<CapCheck> cap;
};

inline double weighted_mean_curvature(const MetricSpec& m, const SurfacePoint& sp, const SeedFrame& f, const Vec& w) {
  const double h = second_fundamental_form(m, sp, f, w).mean;
  return -h + weight_differential(m, sp.point).dot(w);
}

// H_{V,w} at every node for both normals; optionally cross-checked at one node against the
// logarithmic rate of the weighted area of a small cap transported by the congruence.
inline TrappedReport converging_test(MetricPtr metric, const SeedSurface& seed, std::optional<std::size_t> check_node = 0,
                                     double cap_halfwidth = 1e-3, double dt = 1e-5) {
  const MetricSpec& m = *metric;
  TrappedReport rep;
  rep.eps_outer = rep.eps_inner = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < seed.nodes().size(); ++i) {
    const SurfacePoint sp = seed.evaluate_node(i);
    const SeedFrame f = seed_frame(m, sp, seed.flipped());
    ConvergingNode cn{i, weighted_mean_curvature(m, sp, f, f.outer), weighted_mean_curvature(m, sp, f, f.inner)};
    rep.eps_outer = std::min(rep.eps_outer, cn.h_outer);
    rep.eps_inner = std::min(rep.eps_inner, cn.h_inner);
    rep.nodes.push_back(cn);
  }
  rep.eps = std::min(rep.eps_outer, rep.eps_inner);
  rep.trapped = rep.eps_outer > 0.0 && rep.eps_inner > 0.0;

  if (check_node && *check_node < seed.nodes().size()) {
    const auto& node = seed.node(*check_node);
    Box cap_box;
    for (std::size_t a = 0; a < node.theta.size(); ++a) {
      const auto& b = seed.box()[a];
      const double h = cap_halfwidth * (b.second - b.first);
      cap_box.emplace_back(node.theta[a] - h, node.theta[a] + h);
    }
    const SeedSurface cap = seed.with_nodes(
        box_nodes(cap_box, QuadratureRule::GaussLegendre, std::vector<int>(cap_box.size(), 2)), cap_box);
    CapCheck cc;
    cc.node = *check_node;
    cc.h_outer = rep.nodes[*check_node].h_outer;
    cc.h_inner = rep.nodes[*check_node].h_inner;
    for (NormalChoice nc : {NormalChoice::Outer, NormalChoice::Inner}) {
      CongruenceOptions co;
      co.normal = nc;
      const Congruence c = build_congruence(metric, cap, dt, co);
      const double rate = (std::log(cross_section_measure(c, dt)) - std::log(cross_section_measure(c, 0.0))) / dt;
      (nc == NormalChoice::Outer ? cc.dlog_outer : cc.dlog_inner) = rate;
    }
    auto agree = [dt](double h, double rate) {
      // Both forms vanish together; only compare signs when clearly away from zero.
      if (std::abs(h) < 1e3 * dt * (1.0 + std::abs(h))) return true;
      return (h > 0.0) == (rate < 0.0);
    };
    cc.signs_agree = agree(cc.h_outer, cc.dlog_outer) && agree(cc.h_inner, cc.dlog_inner);
    rep.cap = cc;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Focal bounds for a converging congruence

enum class FocalStatus { Focal, NoFocal, Exited };

inline const char* to_string(FocalStatus s) {
  switch (s) {
    case FocalStatus::Focal: return "focal";
    case FocalStatus::NoFocal: return "no_focal";
    case FocalStatus::Exited: return "exited";
  }
  return "?";
}

struct PenroseRay {
  std::size_t node = 0;
  FocalStatus status = FocalStatus::NoFocal;
  std::optional<double> focal_time;
  bool extrapolated = false;
  bool within_bound = false;        // focal_time <= N'/eps
  bool within_unit_bound = false;   // focal_time <= 1/eps
};

struct PenroseReport {
  double eps = 0.0;
  double n_prime = 0.0;
  double bound = 0.0;        // N'/eps
  double unit_bound = 0.0;   // 1/eps
  double rel_tol = 1e-6;
  std::vector<PenroseRay> rays;
  bool incompleteness_forced = false;  // every ray focuses within N'/eps
  bool unit_bound_holds = false;
  std::size_t inconclusive = 0;        // rays that left the chart first
};

inline PenroseReport penrose_bound(const Congruence& c, double eps, double n_prime, double rel_tol = 1e-6) {
  if (!(eps > 0.0)) throw PreconditionError("focal bound needs a converging seed (eps > 0)");
  PenroseReport rep;
  rep.eps = eps;
  rep.n_prime = n_prime;
  rep.bound = n_prime / eps;
  rep.unit_bound = 1.0 / eps;
  rep.rel_tol = rel_tol;
  rep.incompleteness_forced = true;
  rep.unit_bound_holds = true;
  for (const auto& r : c.rays()) {
    PenroseRay pr;
    pr.node = r.node;
    const RaySolution& ray = r.ray;
    if (ray.focal_time()) {
      pr.status = FocalStatus::Focal;
      pr.focal_time = ray.focal_time();
      pr.extrapolated = ray.focal_extrapolated();
      pr.within_bound = *pr.focal_time <= rep.bound * (1.0 + rel_tol);
      pr.within_unit_bound = *pr.focal_time <= rep.unit_bound * (1.0 + rel_tol);
    } else if (ray.exit() == RayExit::Reached) {
      pr.status = FocalStatus::NoFocal;
    } else {
      pr.status = FocalStatus::Exited;
      ++rep.inconclusive;
    }
    rep.incompleteness_forced = rep.incompleteness_forced && pr.within_bound;
    rep.unit_bound_holds = rep.unit_bound_holds && pr.within_unit_bound;
    rep.rays.push_back(pr);
  }
  return rep;
}

// Independent oracle for shear-free congruences: along the geodesic from x with velocity v,
// s'' = -Ric(g', g')/(n-1) s with s(0) = 1, s'(0) = trU(0)/(n-1); y = s^{n-1}, so the first
// root of s is the focal time.
inline std::optional<double> riccati_focal_time(MetricPtr metric, const Vec& x, const Vec& v, double tr_u0, double t_max,
                                                RayOptions opts = {}) {
  const MetricSpec& m = *metric;
  const int d = m.dim;
  const double k = d - 2;
  auto rhs = [&m, d, k](double, const Vec& y) {
    const Vec pos = y.head(d), u = y.segment(d, d);
    const CurvaturePack p = curvature_at(m, pos);
    Vec dy(y.size());
    dy.head(d) = u;
    dy.segment(d, d) = p.conn.acceleration(u, u);
    dy(2 * d) = y(2 * d + 1);
    dy(2 * d + 1) = -p.ric(u) / k * y(2 * d);
    return dy;
  };
  Vec y0(2 * d + 2);
  y0.head(d) = x;
  y0.segment(d, d) = v;
  y0(2 * d) = 1.0;
  y0(2 * d + 1) = tr_u0 / k;
  Dopri5<decltype(rhs)> st(rhs, 0.0, y0, opts.ode);
  // Near a curvature singularity the geodesic cannot be continued; finish with the
  // tangent line of s, which is exact when Ric vanishes there.
  auto extrapolate = [&](const Vec& y, double t) -> std::optional<double> {
    if (y(2 * d + 1) < 0.0) return t + y(2 * d) / -y(2 * d + 1);
    return std::nullopt;
  };
  while (st.t() < t_max) {
    DenseSegment seg;
    try {
      seg = st.step(t_max);
    } catch (const StepUnderflow& su) {
      return extrapolate(su.state(), su.t());
    }
    if (st.y()(2 * d) <= 0.0) {
      double lo = seg.t0, hi = seg.t1();
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (seg.eval(mid)(2 * d) > 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    bool blown = false;
    try {
      const double gmax = connection_at(m, st.y().head(d), false).max_abs_christoffel();
      blown = !std::isfinite(gmax) || gmax > opts.blowup_limit;
    } catch (const Error&) {
      blown = true;
    }
    if (blown || !inside_chart(m, st.y().head(d))) return extrapolate(st.y(), st.t());
  }
  return std::nullopt;
}

}  // namespace nullconvex

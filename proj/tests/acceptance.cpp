// Acceptance gate: one PASS/FAIL line per criterion; nonzero exit if any fails.

#include "nullconvex/nullconvex.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>

using namespace nullconvex;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;
};

MetricPtr ptr(MetricSpec m) { return std::make_shared<const MetricSpec>(std::move(m)); }

CongruencePtr congruence(MetricPtr m, const SeedSurface& s, double t_max, NormalChoice nc = NormalChoice::Outer,
                         double scale = 1.0) {
  CongruenceOptions o;
  o.normal = nc;
  o.scale = scale;
  return std::make_shared<const Congruence>(build_congruence(std::move(m), s, t_max, o));
}

SeedSurface ef_sphere(double r, int n_polar, int n_azimuth, double cut = 0.3) {
  return seed_from_expressions(4, {"0", format_literal(r), "u0", "u1"}, {{cut, kPi - cut}, {0.0, 2 * kPi}},
                               QuadratureRule::GaussLegendre, {n_polar, n_azimuth});
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Congruences on the three reference backgrounds used by the operator checks.
std::vector<std::pair<std::string, CongruencePtr>> reference_congruences() {
  const MetricPtr mk = ptr(minkowski(4)), sc = ptr(schwarzschild_ef(1.0)), fr = ptr(flrw("exp(x0^2)"));
  return {
      {"minkowski outgoing", congruence(mk, coordinate_sphere(0, 1, 8, 16), 1.0)},
      {"minkowski ingoing", congruence(mk, coordinate_sphere(0, 1, 4, 8), 1.5, NormalChoice::Inner)},
      {"schwarzschild horizon", congruence(sc, ef_sphere(2, 6, 8), 5.0)},
      {"schwarzschild r=3 outgoing", congruence(sc, ef_sphere(3, 4, 6), 6.0)},
      {"schwarzschild r=1.5 inner", congruence(sc, ef_sphere(1.5, 4, 6), 2.0, NormalChoice::Inner)},
      {"flrw outgoing", congruence(fr, coordinate_sphere(0, 1, 4, 6), 0.8)},
      {"flrw ingoing", congruence(fr, coordinate_sphere(0, 1, 4, 6), 0.8, NormalChoice::Inner)},
  };
}

Outcome flat_cone() {
  const auto start = std::chrono::steady_clock::now();
  const CongruencePtr c = congruence(ptr(minkowski(4)), coordinate_sphere(0, 1, 8, 16), 1.0);
  const Measure mu = uniform_measure(c);
  const InterpolationReport rep = convexity_report(mu, 2.0, uniform_grid(33));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double s_err = 0.0, affine_err = 0.0;
  for (std::size_t j = 0; j < rep.t.size(); ++j) {
    const double exact = -std::sqrt(4 * kPi) * (1 + rep.t[j]);
    s_err = std::max(s_err, std::abs(rep.entropy[j] - exact) / std::abs(exact));
  }
  for (const auto& r : c->rays())
    for (double t : rep.t) affine_err = std::max(affine_err, std::abs(std::sqrt(r.ray.det(t)) - (1 + t)));
  Outcome o;
  o.pass = s_err < 1e-6 && affine_err < 1e-6 && secs < 5.0 && rep.t.size() == 33;
  o.detail = fmt("max rel |S - exact| = %.2e", s_err) + fmt(", max |y^1/2 - (1+t)| = %.2e", affine_err) +
             fmt(", %.2f s", secs);
  return o;
}

template <class F>
Outcome over_rays(const std::vector<std::pair<std::string, CongruencePtr>>& cs, F&& check) {
  Outcome o;
  for (const auto& [name, c] : cs)
    for (const auto& r : c->rays()) {
      std::string why;
      if (!check(ray_diagnostics(r.ray), why)) {
        o.pass = false;
        o.detail = name + " ray " + std::to_string(r.node) + ": " + why;
        return o;
      }
    }
  return o;
}

Outcome raychaudhuri(const std::vector<std::pair<std::string, CongruencePtr>>& cs) {
  double worst = 0.0;
  Outcome o = over_rays(cs, [&](const RayDiagnostics& d, std::string& why) {
    worst = std::max(worst, d.raychaudhuri);
    why = fmt("residual %.2e", d.raychaudhuri);
    return d.raychaudhuri < 1e-6;
  });
  if (o.pass) o.detail = fmt("max |trU' + tr U^2 + Ric| / (1 + trU^2) = %.2e", worst);
  return o;
}

Outcome vacuum() {
  const MetricSpec m = schwarzschild_ef(1.0);
  const auto pts = random_points({{-2, 2}, {0.3, 10}, {0.05, kPi - 0.05}, {0, 2 * kPi}}, 100, 2024);
  double ric = 0.0;
  for (const Vec& x : pts) ric = std::max(ric, curvature_at(m, x).ricci.cwiseAbs().maxCoeff());
  const MetricPtr mp = ptr(m);
  const CongruencePtr h = congruence(mp, ef_sphere(2, 8, 8, 0.0), 5.0);
  const double a0 = cross_section_measure(*h, 0.0);
  double area = 0.0;
  for (int i = 1; i <= 50; ++i) area = std::max(area, std::abs(cross_section_measure(*h, 0.1 * i) - a0) / a0);
  const CongruencePtr hs = congruence(mp, ef_sphere(2, 6, 8), 5.0, NormalChoice::Outer, 5.0);
  double slack = 0.0;
  for (double np : {2.0, 3.0}) {
    const InterpolationReport rep = convexity_report(uniform_measure(hs), np);
    for (double s : rep.slack) slack = std::min(slack, s);
  }
  Outcome o;
  o.pass = ric < 1e-7 && area < 1e-6 && slack >= -1e-8;
  o.detail = fmt("max |Ric| = %.2e", ric) + fmt(", area drift = %.2e", area) + fmt(", min slack = %.2e", slack);
  return o;
}

Outcome flrw_witness() {
  const MetricPtr m = ptr(flrw("exp(x0^2)"));
  ScanOptions so;
  so.n_prime = 3.0;
  const ScanReport scan = nec_scan(*m, grid_points({{0, 0}, {-1, 1}, {-1, 1}, {-1, 1}}, {1, 3, 3, 3}), so);
  WitnessOptions wo;
  wo.lambda = 0.0;
  const WitnessResult w = witness_violation(m, Vec::Zero(4), (Vec(4) << 1, 1, 0, 0).finished(), 3.0, wo);
  const double slack = w.report ? w.report->min_slack : 0.0, tol = w.report ? w.report->slack_tol : 0.0;
  Outcome o;
  o.pass = scan.min_gap <= -4 + 1e-3 && w.found && slack < -100 * tol;
  o.detail = fmt("min gap = %.6f", scan.min_gap) + fmt(", witness slack = %.3e", slack) + fmt(" vs -100 tol = %.3e", -100 * tol);
  return o;
}

Outcome weighted_witness() {
  const Vec v = (Vec(4) << 1, 1, 0, 0).finished();
  const MetricPtr m = ptr(weighted_minkowski("x1"));
  const double gap = be_null_gap(*m, Vec::Zero(4), v, 3.0);
  const WitnessResult w = witness_violation(m, Vec::Zero(4), v, 3.0);
  const WitnessResult control = witness_violation(ptr(weighted_minkowski("0.5")), Vec::Zero(4), v, 3.0);
  Outcome o;
  o.pass = std::abs(gap + 1) < 1e-12 && std::abs(w.lambda + 1) < 1e-12 && w.found && !control.found;
  o.detail = fmt("gap = %.3f", gap) + fmt(", lambda = %.3f", w.lambda) + ", weighted " +
             (w.found ? "violation found" : "no violation") + fmt(" (slack %.3e)", w.report ? w.report->min_slack : 0.0) +
             ", constant V " + (control.found ? "violation found" : "no violation") + " after " +
             std::to_string(control.attempts.size()) + " attempts";
  return o;
}

Outcome mass() {
  double worst = 0.0;
  std::size_t checked = 0;
  std::string where;
  for (const auto& e : fs::directory_iterator(NULLCONVEX_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    const Scenario sc = load_scenario_file(e.path().string());
    auto record = [&](double err) {
      if (err > worst) {
        worst = err;
        where = e.path().filename().string();
      }
    };
    if (sc.seed) {
      CongruenceOptions co;
      co.normal = sc.normal;
      co.scale = sc.scale;
      const SeedSurface s = seed_from_expressions(sc.metric->dim, sc.seed->map, sc.seed->domain, sc.seed->rule,
                                                  sc.seed->resolution, sc.seed->flipped);
      const auto c = std::make_shared<const Congruence>(build_congruence(sc.metric, s, sc.t_max, co));
      const Measure mu = sc.density ? density_measure(c, parse(*sc.density, sc.metric->dim)) : uniform_measure(c);
      for (int i = 0; i <= 64; ++i) {
        const double t = sc.t_max * i / 64.0;
        bool alive = true;
        for (const auto& r : c->rays()) alive = alive && r.ray.alive_at(t) && r.ray.det(t) > 1e-6;
        if (!alive) break;
        record(std::abs(transported_mass(mu, t) - 1.0));
        ++checked;
      }
    }
    for (const auto& t : sc.tasks) {
      if (t.type != "witness") continue;
      WitnessOptions wo;
      if (t.params.contains("lambda")) wo.lambda = t.params["lambda"].get<double>();
      const Vec p = Eigen::Map<const Vec>(t.params["point"].get<std::vector<double>>().data(), sc.metric->dim);
      const Vec v = Eigen::Map<const Vec>(t.params["direction"].get<std::vector<double>>().data(), sc.metric->dim);
      const WitnessResult w = witness_violation(sc.metric, p, v, t.params.value("exponent", sc.n), wo);
      if (w.report) {
        record(w.report->max_mass_error);
        ++checked;
      }
    }
  }
  Outcome o;
  o.pass = worst < 1e-6 && checked > 0;
  o.detail = fmt("max |mass - 1| = %.2e", worst) + " over " + std::to_string(checked) + " checks" +
             (where.empty() ? "" : " (worst: " + where + ")");
  return o;
}

Outcome operators(const std::vector<std::pair<std::string, CongruencePtr>>& cs) {
  double gram = 0.0, asym = 0.0, tcs = std::numeric_limits<double>::infinity();
  Outcome o = over_rays(cs, [&](const RayDiagnostics& d, std::string& why) {
    gram = std::max(gram, d.gram_drift);
    asym = std::max(asym, d.asymmetry);
    tcs = std::min(tcs, d.trace_cs);
    why = fmt("gram %.2e", d.gram_drift) + fmt(", asymmetry %.2e", d.asymmetry) + fmt(", trace CS %.2e", d.trace_cs);
    return d.gram_drift < 1e-8 && d.asymmetry < 1e-6 && d.trace_cs >= -1e-8;
  });
  if (o.pass)
    o.detail = fmt("gram drift = %.2e", gram) + fmt(", |U - U^T|/|U| = %.2e", asym) + fmt(", min tr U^2 - (trU)^2/2 = %.2e", tcs);
  return o;
}

Outcome trapped() {
  const MetricPtr s = ptr(schwarzschild_ef(1.0));
  const SeedSurface seed = ef_sphere(1.5, 4, 6);
  const TrappedReport tr = converging_test(s, seed);
  bool bounded = tr.trapped && tr.eps > 0;
  double worst_ratio = 0.0;
  for (NormalChoice nc : {NormalChoice::Outer, NormalChoice::Inner}) {
    const double eps = nc == NormalChoice::Outer ? tr.eps_outer : tr.eps_inner;
    if (!(eps > 0)) continue;
    const PenroseReport p = penrose_bound(*congruence(s, seed, 1.05 * 2.0 / eps, nc), eps, 2.0);
    bounded = bounded && p.incompleteness_forced;
    for (const auto& r : p.rays) {
      if (!r.focal_time) bounded = false;
      else worst_ratio = std::max(worst_ratio, *r.focal_time / p.bound);
    }
  }
  const MetricPtr mk = ptr(minkowski(4));
  const SeedSurface sphere = coordinate_sphere(0, 1, 4, 8);
  const TrappedReport tm = converging_test(mk, sphere);
  const PenroseReport pm = penrose_bound(*congruence(mk, sphere, 1.05, NormalChoice::Inner), tm.eps_inner, 2.0);
  double focal_err = 0.0;
  for (const auto& r : pm.rays) focal_err = std::max(focal_err, r.focal_time ? std::abs(*r.focal_time - 1.0) : 1.0);
  Outcome o;
  o.pass = bounded && std::abs(tm.eps_inner - 2.0) < 1e-6 && focal_err < 1e-6 && std::abs(pm.bound - 1.0) < 1e-6 &&
           pm.incompleteness_forced;
  o.detail = std::string(tr.trapped ? "synthetically trapped" : "not trapped") + fmt(", eps = %.4f", tr.eps) +
             fmt(", max focal/bound = %.6f", worst_ratio) + fmt("; cone eps = %.6f", tm.eps_inner) +
             fmt(", max |focal - 1| = %.2e", focal_err);
  return o;
}

Outcome hawking() {
  const CongruencePtr c = congruence(ptr(minkowski(4)), coordinate_sphere(0, 1, 4, 8), 1.5, NormalChoice::Inner);
  const HawkingReport h = hawking_check(*c, 0.0, 0.9);
  Outcome o;
  o.pass = h.verdict == HawkingVerdict::NonMonotoneIncomplete && h.completeness_fails_at &&
           std::abs(*h.completeness_fails_at - 1.0) < 1e-6;
  o.detail = "\"" + h.describe() + "\"";
  return o;
}

Outcome localization() {
  const MetricPtr mk = ptr(minkowski(4)), sc = ptr(schwarzschild_ef(1.0));
  const std::vector<std::pair<std::string, CongruencePtr>> cs = {
      {"minkowski cone", congruence(mk, coordinate_sphere(0, 1, 8, 16), 1.0)},
      {"schwarzschild horizon", congruence(sc, ef_sphere(2, 6, 8), 1.0, NormalChoice::Outer, 5.0)},
      {"schwarzschild r=3", congruence(sc, ef_sphere(3, 4, 6), 1.0, NormalChoice::Outer, 4.0)},
  };
  double diff = 0.0;
  bool local_ok = true;
  for (const auto& [name, c] : cs)
    for (const Measure& mu : {uniform_measure(c), density_measure(c, parse("1 + 0.4*cos(x2)", 4))})
      for (double np : {2.0, 3.0}) {
        const InterpolationReport rep = convexity_report(mu, np);
        const LocalizationRecord loc = localized_implies_global(mu, rep);
        diff = std::max(diff, loc.max_difference);
        if (rep.verdict == ConvexityVerdict::Consistent && !loc.local_holds) local_ok = false;
      }
  Outcome o;
  o.pass = diff < 1e-6 && local_ok;
  o.detail = fmt("max |integrated - global| = %.2e", diff) + (local_ok ? ", localized inequality holds" : ", localized inequality fails");
  return o;
}

}  // namespace

int main() {
  const auto cs = reference_congruences();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"flat-cone equality case", flat_cone},
      {"Raychaudhuri residual", [&] { return raychaudhuri(cs); }},
      {"Schwarzschild vacuum, horizon area and entropy", vacuum},
      {"FLRW converse witness", flrw_witness},
      {"weighted converse and constant-weight control", weighted_witness},
      {"mass conservation on every scenario", mass},
      {"screen operator properties", [&] { return operators(cs); }},
      {"trapped sphere and focal bound", trapped},
      {"Hawking contrapositive on the ingoing cone", hawking},
      {"localization", localization},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str());
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

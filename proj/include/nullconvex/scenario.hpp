#pragma once

// Scenario documents (JSON) -> pipeline -> report + CSV tables + exit code.

#include "nullconvex/congruence.hpp"
#include "nullconvex/core.hpp"
#include "nullconvex/energy.hpp"
#include "nullconvex/entropy.hpp"
#include "nullconvex/metric.hpp"
#include "nullconvex/seed.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace nullconvex {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;

enum class VerdictClass { Holds, Violated, Inconclusive };

inline const char* to_string(VerdictClass v) {
  switch (v) {
    case VerdictClass::Holds: return "holds";
    case VerdictClass::Violated: return "violated";
    case VerdictClass::Inconclusive: return "inconclusive";
  }
  return "?";
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Tolerances {
  double rtol = 1e-10;
  double atol = 1e-12;
  double y_tol = 1e-10;
  double null_tol = 1e-9;
  double gap_tol = 1e-7;
  double area_rel_tol = 1e-6;
  double blowup = 1e16;
};

struct SeedSpec {
  std::vector<std::string> map;
  Box domain;
  QuadratureRule rule = QuadratureRule::GaussLegendre;
  std::vector<int> resolution;
  bool flipped = false;
};

struct TaskSpec {
  std::string type;
  std::string path;  // e.g. "tasks[2]"
  std::optional<VerdictClass> expect;
  json params;
};

struct Scenario {
  std::string name = "scenario";
  std::string description;
  MetricPtr metric;
  double n = 0.0;                   // N
  std::vector<double> n_primes;     // N' list
  std::optional<SeedSpec> seed;
  NormalChoice normal = NormalChoice::Outer;
  double scale = 1.0;
  double t_max = 1.0;
  std::string measure = "uniform";
  std::optional<std::string> density;
  std::vector<double> t_grid = uniform_grid();
  Tolerances tol;
  std::vector<TaskSpec> tasks;
  std::string output_dir;
};

namespace detail {

inline std::string at(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

template <class F>
auto expression_field(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ConfigError(path, e.what());
  }
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

inline std::string text(const json& j, const std::string& path) {
  if (j.is_number()) return fmt17(j.get<double>());
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

// Accepts a number or a constant expression such as "2*pi".
inline double constant(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string src = j.get<std::string>();
    const Expression e = expression_field(path, [&] { return parse(src, std::vector<std::string>{}); });
    return evaluate(e, std::span<const double>{});
  }
  return number(j, path);
}

inline double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
  return obj.contains(key) ? number(obj[key], at(path, key)) : fallback;
}

inline int integer_or(const json& obj, const std::string& key, const std::string& path, int fallback) {
  return obj.contains(key) ? integer(obj[key], at(path, key)) : fallback;
}

inline Vec vector_of(const json& j, const std::string& path, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError(path, "expected an array of " + std::to_string(dim) + " numbers");
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = number(j[static_cast<std::size_t>(i)], at(path, static_cast<std::size_t>(i)));
  return v;
}

inline Box box_of(const json& j, const std::string& path, std::optional<std::size_t> size = std::nullopt) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of [lo, hi] intervals");
  if (size && j.size() != *size) throw ConfigError(path, "expected " + std::to_string(*size) + " intervals");
  Box b;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = at(path, i);
    if (!j[i].is_array() || j[i].size() != 2) throw ConfigError(p, "expected [lo, hi]");
    const double lo = constant(j[i][0], p + "[0]"), hi = constant(j[i][1], p + "[1]");
    if (!(lo < hi)) throw ConfigError(p, "interval must have lo < hi");
    b.emplace_back(lo, hi);
  }
  return b;
}

inline std::optional<VerdictClass> expectation(const json& task, const std::string& path) {
  if (!task.contains("expect")) return std::nullopt;
  const std::string s = text(task["expect"], at(path, "expect"));
  if (s == "holds") return VerdictClass::Holds;
  if (s == "violated") return VerdictClass::Violated;
  if (s == "inconclusive") return VerdictClass::Inconclusive;
  throw ConfigError(at(path, "expect"), "must be holds, violated or inconclusive");
}

inline MetricSpec metric_of(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  std::map<std::string, double> num_params;
  std::map<std::string, std::string> text_params;
  if (j.contains("params")) {
    const json& p = j["params"];
    if (!p.is_object()) throw ConfigError(at(path, "params"), "expected an object");
    for (auto it = p.begin(); it != p.end(); ++it) {
      if (it.value().is_number()) num_params[it.key()] = it.value().get<double>();
      text_params[it.key()] = text(it.value(), at(at(path, "params"), it.key()));
    }
  }
  auto dim_param = [&](int fallback) {
    if (!num_params.count("dim")) return fallback;
    const double d = num_params["dim"];
    if (d != std::floor(d) || d < 3 || d > kMaxDim) throw ConfigError(at(path, "params.dim"), "must be an integer in [3, 8]");
    return static_cast<int>(d);
  };
  if (j.contains("builtin")) {
    const std::string name = text(j["builtin"], at(path, "builtin"));
    const std::string pp = at(path, "params");
    return expression_field(pp, [&] {
      if (name == "minkowski") return minkowski(dim_param(4));
      if (name == "schwarzschild_ef") {
        const double mass = num_params.count("M") ? num_params["M"] : 1.0;
        if (!(mass > 0.0)) throw ConfigError(at(pp, "M"), "mass must be positive");
        return schwarzschild_ef(mass);
      }
      if (name == "flrw") return flrw(text_params.count("a") ? text_params["a"] : "exp(x0^2)", dim_param(4));
      if (name == "weighted_minkowski") return weighted_minkowski(text_params.count("V") ? text_params["V"] : "x1", dim_param(4));
      throw ConfigError(at(path, "builtin"), "unknown built-in metric '" + name + "'");
    });
  }
  if (!j.contains("dim")) throw ConfigError(path, "needs either 'builtin' or 'dim' + 'components'");
  const int dim = integer(j["dim"], at(path, "dim"));
  if (dim < 3 || dim > kMaxDim) throw ConfigError(at(path, "dim"), "must be in [3, 8]");
  if (!j.contains("components")) throw ConfigError(at(path, "components"), "missing");
  const json& c = j["components"];
  std::vector<std::string> comps;
  if (!c.is_array()) throw ConfigError(at(path, "components"), "expected a dim x dim array");
  if (c.size() == static_cast<std::size_t>(dim) && c[0].is_array()) {
    for (std::size_t r = 0; r < c.size(); ++r) {
      if (!c[r].is_array() || c[r].size() != static_cast<std::size_t>(dim))
        throw ConfigError(at(at(path, "components"), r), "expected " + std::to_string(dim) + " entries");
      for (std::size_t k = 0; k < c[r].size(); ++k) comps.push_back(text(c[r][k], at(at(at(path, "components"), r), k)));
    }
  } else {
    if (c.size() != static_cast<std::size_t>(dim * dim)) throw ConfigError(at(path, "components"), "expected dim*dim entries");
    for (std::size_t k = 0; k < c.size(); ++k) comps.push_back(text(c[k], at(at(path, "components"), k)));
  }
  // Parse each entry separately first so errors point at the offending component.
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const std::string p = c[0].is_array() ? at(at(at(path, "components"), k / static_cast<std::size_t>(dim)), k % static_cast<std::size_t>(dim))
                                          : at(at(path, "components"), k);
    expression_field(p, [&] { return parse(comps[k], dim, num_params); });
  }
  std::vector<std::string> ref;
  if (j.contains("reference")) {
    const json& r = j["reference"];
    if (!r.is_array() || r.size() != static_cast<std::size_t>(dim)) throw ConfigError(at(path, "reference"), "expected dim expressions");
    for (std::size_t k = 0; k < r.size(); ++k) {
      ref.push_back(text(r[k], at(at(path, "reference"), k)));
      expression_field(at(at(path, "reference"), k), [&] { return parse(ref.back(), dim, num_params); });
    }
  }
  std::optional<std::string> domain;
  if (j.contains("domain")) {
    domain = text(j["domain"], at(path, "domain"));
    expression_field(at(path, "domain"), [&] { return parse(*domain, dim, num_params); });
  }
  MetricSpec m = make_metric(dim, comps, std::nullopt, domain, ref, num_params);
  m.name = j.contains("name") ? text(j["name"], at(path, "name")) : "user";
  m.parameters = text_params;
  return m;
}

}  // namespace detail

inline Scenario load_scenario(const json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ConfigError("", "scenario must be an object");
  Scenario s;
  if (doc.contains("name")) s.name = text(doc["name"], "name");
  if (doc.contains("description")) s.description = text(doc["description"], "description");
  if (!doc.contains("metric")) throw ConfigError("metric", "missing");
  MetricSpec m = metric_of(doc["metric"], "metric");
  if (doc.contains("weight")) {
    const std::string w = text(doc["weight"], "weight");
    m.weight = expression_field("weight", [&] { return parse(w, m.dim); });
  }
  if (doc.contains("derivatives")) {
    const std::string d = text(doc["derivatives"], "derivatives");
    if (d == "jet") m.mode = DerivativeMode::Jet;
    else if (d == "finite_difference") m.mode = DerivativeMode::FiniteDifference;
    else throw ConfigError("derivatives", "must be jet or finite_difference");
    m.fd_step = number_or(doc, "fd_step", "", m.fd_step);
  }
  const int n_space = m.dim - 1;
  s.metric = std::make_shared<const MetricSpec>(std::move(m));

  s.n = number_or(doc, "N", "", n_space - 1);
  if (!(s.n >= n_space - 1)) throw ConfigError("N", "must be at least n-1 = " + std::to_string(n_space - 1));
  if (doc.contains("N_prime")) {
    const json& np = doc["N_prime"];
    if (np.is_number()) s.n_primes.push_back(np.get<double>());
    else if (np.is_array()) {
      for (std::size_t i = 0; i < np.size(); ++i) s.n_primes.push_back(number(np[i], at("N_prime", i)));
    } else throw ConfigError("N_prime", "expected a number or an array of numbers");
    for (std::size_t i = 0; i < s.n_primes.size(); ++i)
      if (!(s.n_primes[i] >= s.n)) throw ConfigError(at("N_prime", i), "must be at least N");
  }
  if (s.n_primes.empty()) s.n_primes.push_back(s.n);

  if (doc.contains("seed")) {
    const json& j = doc["seed"];
    SeedSpec sp;
    const int k = n_space - 1;
    if (!j.contains("map")) throw ConfigError("seed.map", "missing");
    const json& mp = j["map"];
    if (!mp.is_array() || mp.size() != static_cast<std::size_t>(s.metric->dim))
      throw ConfigError("seed.map", "expected one expression per chart coordinate");
    for (std::size_t i = 0; i < mp.size(); ++i) {
      sp.map.push_back(text(mp[i], at("seed.map", i)));
      expression_field(at("seed.map", i), [&] { return parse(sp.map.back(), chart_variables(k, "u")); });
    }
    if (!j.contains("domain")) throw ConfigError("seed.domain", "missing");
    sp.domain = box_of(j["domain"], "seed.domain", static_cast<std::size_t>(k));
    if (j.contains("rule")) {
      const std::string r = text(j["rule"], "seed.rule");
      if (r == "gauss_legendre") sp.rule = QuadratureRule::GaussLegendre;
      else if (r == "uniform") sp.rule = QuadratureRule::Uniform;
      else throw ConfigError("seed.rule", "must be gauss_legendre or uniform");
    }
    if (!j.contains("resolution")) throw ConfigError("seed.resolution", "missing");
    const json& res = j["resolution"];
    if (res.is_number_integer()) sp.resolution.assign(static_cast<std::size_t>(k), res.get<int>());
    else if (res.is_array() && res.size() == static_cast<std::size_t>(k)) {
      for (std::size_t i = 0; i < res.size(); ++i) sp.resolution.push_back(integer(res[i], at("seed.resolution", i)));
    } else throw ConfigError("seed.resolution", "expected an integer or one integer per parameter");
    for (std::size_t i = 0; i < sp.resolution.size(); ++i)
      if (sp.resolution[i] < 1) throw ConfigError(at("seed.resolution", i), "must be positive");
    if (j.contains("orientation")) {
      const std::string o = text(j["orientation"], "seed.orientation");
      if (o == "flipped") sp.flipped = true;
      else if (o != "standard") throw ConfigError("seed.orientation", "must be standard or flipped");
    }
    s.seed = sp;
  }

  if (doc.contains("generator")) {
    const json& g = doc["generator"];
    if (g.contains("normal")) {
      const std::string n = text(g["normal"], "generator.normal");
      if (n == "outer") s.normal = NormalChoice::Outer;
      else if (n == "inner") s.normal = NormalChoice::Inner;
      else throw ConfigError("generator.normal", "must be outer or inner");
    }
    s.scale = number_or(g, "scale", "generator", 1.0);
    if (!(s.scale > 0.0)) throw ConfigError("generator.scale", "must be positive");
    s.t_max = number_or(g, "t_max", "generator", 1.0);
    if (!(s.t_max >= 1.0)) throw ConfigError("generator.t_max", "must be at least 1 (the interpolation runs over [0, 1])");
  }

  if (doc.contains("measure")) {
    const json& mj = doc["measure"];
    s.measure = text(mj.contains("type") ? mj["type"] : json("uniform"), "measure.type");
    if (s.measure == "density") {
      if (!mj.contains("density")) throw ConfigError("measure.density", "missing");
      s.density = text(mj["density"], "measure.density");
      expression_field("measure.density", [&] { return parse(*s.density, s.metric->dim); });
    } else if (s.measure != "uniform") {
      throw ConfigError("measure.type", "must be uniform or density");
    }
  }

  if (doc.contains("t_grid")) {
    const json& tg = doc["t_grid"];
    if (tg.is_object()) {
      const int pts = integer_or(tg, "points", "t_grid", 33);
      if (pts < 2) throw ConfigError("t_grid.points", "needs at least 2 points");
      s.t_grid = uniform_grid(pts);
    } else if (tg.is_array()) {
      s.t_grid.clear();
      for (std::size_t i = 0; i < tg.size(); ++i) {
        const double t = number(tg[i], at("t_grid", i));
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError(at("t_grid", i), "value " + fmt17(t) + " outside [0, 1]");
        if (i > 0 && !(t > s.t_grid.back())) throw ConfigError(at("t_grid", i), "grid must be strictly increasing");
        s.t_grid.push_back(t);
      }
      if (s.t_grid.size() < 2 || s.t_grid.front() != 0.0 || s.t_grid.back() != 1.0)
        throw ConfigError("t_grid", "must start at 0 and end at 1");
    } else {
      throw ConfigError("t_grid", "expected an array or {\"points\": n}");
    }
  }

  if (doc.contains("tolerances")) {
    const json& t = doc["tolerances"];
    if (!t.is_object()) throw ConfigError("tolerances", "expected an object");
    s.tol.rtol = number_or(t, "rtol", "tolerances", s.tol.rtol);
    s.tol.atol = number_or(t, "atol", "tolerances", s.tol.atol);
    s.tol.y_tol = number_or(t, "y_tol", "tolerances", s.tol.y_tol);
    s.tol.null_tol = number_or(t, "null_tol", "tolerances", s.tol.null_tol);
    s.tol.gap_tol = number_or(t, "gap_tol", "tolerances", s.tol.gap_tol);
    s.tol.area_rel_tol = number_or(t, "area_rel_tol", "tolerances", s.tol.area_rel_tol);
    s.tol.blowup = number_or(t, "blowup", "tolerances", s.tol.blowup);
    for (auto it = t.begin(); it != t.end(); ++it)
      if (!(it.value().is_number() && it.value().get<double>() > 0.0)) throw ConfigError(at("tolerances", it.key()), "must be positive");
  }

  static const std::vector<std::string> known = {"curvature_scan", "witness", "convexity", "hawking", "trapped", "penrose"};
  if (!doc.contains("tasks") || !doc["tasks"].is_array() || doc["tasks"].empty())
    throw ConfigError("tasks", "expected a nonempty array");
  for (std::size_t i = 0; i < doc["tasks"].size(); ++i) {
    const json& tj = doc["tasks"][i];
    const std::string p = at("tasks", i);
    if (!tj.is_object() || !tj.contains("type")) throw ConfigError(p, "expected an object with a 'type'");
    TaskSpec t;
    t.type = text(tj["type"], at(p, "type"));
    if (std::find(known.begin(), known.end(), t.type) == known.end()) throw ConfigError(at(p, "type"), "unknown task '" + t.type + "'");
    t.path = p;
    t.expect = expectation(tj, p);
    t.params = tj;
    const bool needs_seed = t.type == "convexity" || t.type == "hawking" || t.type == "trapped" || t.type == "penrose";
    if (needs_seed && !s.seed) throw ConfigError("seed", "task '" + t.type + "' needs a seed surface");
    if (t.type == "hawking") {
      const double t0 = number_or(tj, "t0", p, 0.0), t1 = number_or(tj, "t1", p, 1.0);
      if (!(t0 >= 0.0 && t0 < t1)) throw ConfigError(at(p, "t0"), "need 0 <= t0 < t1");
      if (t1 > s.t_max) throw ConfigError(at(p, "t1"), "exceeds generator.t_max");
    }
    if (t.type == "curvature_scan" && !tj.contains("box")) throw ConfigError(at(p, "box"), "missing");
    if (t.type == "witness") {
      if (!tj.contains("point")) throw ConfigError(at(p, "point"), "missing");
      if (!tj.contains("direction")) throw ConfigError(at(p, "direction"), "missing");
    }
    s.tasks.push_back(std::move(t));
  }
  if (doc.contains("output")) {
    const json& o = doc["output"];
    if (o.contains("directory")) s.output_dir = text(o["directory"], "output.directory");
  }
  return s;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed document: ") + e.what());
  }
  return load_scenario(doc);
}

struct TaskResult {
  std::string type;
  std::string verdict;  // task-specific wording
  VerdictClass cls = VerdictClass::Inconclusive;
  VerdictClass expect = VerdictClass::Holds;
  int code = 0;
  json summary;
};

struct RunResult {
  json report;
  int exit_code = 0;
  std::vector<TaskResult> tasks;
  std::map<std::string, std::string> tables;  // file name -> CSV text
};

namespace detail {

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline std::string entropy_csv(const InterpolationReport& rep) {
  std::string s = "t,S,chord,slack,min_ray_slack\n";
  for (std::size_t j = 0; j < rep.entropy.size(); ++j)
    s += fmt17(rep.t[j]) + "," + fmt17(rep.entropy[j]) + "," + fmt17(rep.chord[j]) + "," + fmt17(rep.slack[j]) + "," +
         fmt17(rep.min_ray_slack[j]) + "\n";
  return s;
}

inline VerdictClass convexity_class(ConvexityVerdict v) {
  switch (v) {
    case ConvexityVerdict::Consistent: return VerdictClass::Holds;
    case ConvexityVerdict::Violated: return VerdictClass::Violated;
    default: return VerdictClass::Inconclusive;
  }
}

inline int code_for(VerdictClass got, VerdictClass expect) {
  if (got == expect) return 0;
  return got == VerdictClass::Violated ? 1 : 2;
}

inline int worse(int a, int b) {
  auto rank = [](int c) { return c == 3 ? 3 : c == 1 ? 2 : c == 2 ? 1 : 0; };
  return rank(a) >= rank(b) ? a : b;
}

}  // namespace detail

inline RunResult run_scenario(const Scenario& sc) {
  using namespace detail;
  RunResult out;
  json& rep = out.report;
  rep["scenario"] = sc.name;
  rep["version"] = kVersion;
  rep["metric"] = {{"name", sc.metric->name}, {"dim", sc.metric->dim}, {"weighted", sc.metric->has_weight()}};
  for (const auto& [k, v] : sc.metric->parameters) rep["metric"]["parameters"][k] = v;
  rep["N"] = sc.n;
  rep["N_prime"] = sc.n_primes;
  rep["tolerances"] = {{"rtol", sc.tol.rtol},       {"atol", sc.tol.atol},
                       {"y_tol", sc.tol.y_tol},     {"null_tol", sc.tol.null_tol},
                       {"gap_tol", sc.tol.gap_tol}, {"area_rel_tol", sc.tol.area_rel_tol},
                       {"blowup", sc.tol.blowup}};
  rep["assumptions"] = json::array({
      "endpoint cross-sections are acausal by construction (t-slices of a congruence from a spacelike seed); not re-verified",
      "future completeness is tested only as: no focal point or chart exit on the integrated range",
      "measures are absolutely continuous; the singular part is zero",
  });

  RayOptions ray_opts;
  ray_opts.ode.rtol = sc.tol.rtol;
  ray_opts.ode.atol = sc.tol.atol;
  ray_opts.y_tol = sc.tol.y_tol;
  ray_opts.blowup_limit = sc.tol.blowup;
  ray_opts.null_tol = std::max(sc.tol.null_tol, 1e-8);

  std::optional<SeedSurface> seed;
  if (sc.seed)
    seed = seed_from_expressions(sc.metric->dim, sc.seed->map, sc.seed->domain, sc.seed->rule, sc.seed->resolution,
                                 sc.seed->flipped);

  CongruencePtr cong;
  auto congruence = [&]() -> CongruencePtr {
    if (!cong) {
      CongruenceOptions co;
      co.normal = sc.normal;
      co.scale = sc.scale;
      co.ray = ray_opts;
      cong = std::make_shared<const Congruence>(build_congruence(sc.metric, *seed, sc.t_max, co));
    }
    return cong;
  };
  auto measure = [&]() {
    if (sc.density) return density_measure(congruence(), parse(*sc.density, sc.metric->dim));
    return uniform_measure(congruence());
  };

  std::optional<TrappedReport> trapped;
  auto trapped_report = [&]() -> const TrappedReport& {
    if (!trapped) trapped = converging_test(sc.metric, *seed);
    return *trapped;
  };

  static const std::vector<std::string> order = {"curvature_scan", "witness", "trapped", "convexity", "hawking", "penrose"};
  std::vector<const TaskSpec*> tasks;
  for (const auto& name : order)
    for (const auto& t : sc.tasks)
      if (t.type == name) tasks.push_back(&t);

  int exit_code = 0;
  rep["tasks"] = json::array();
  int scan_index = 0, witness_index = 0;
  for (const TaskSpec* tp : tasks) {
    const TaskSpec& t = *tp;
    const json& p = t.params;
    TaskResult tr;
    tr.type = t.type;
    tr.expect = t.expect.value_or(VerdictClass::Holds);
    json& sum = tr.summary;

    if (t.type == "curvature_scan") {
      const Box box = box_of(p["box"], at(t.path, "box"), static_cast<std::size_t>(sc.metric->dim));
      std::vector<Vec> pts;
      if (p.contains("random")) {
        const int count = integer(p["random"], at(t.path, "random"));
        pts = random_points(box, static_cast<std::size_t>(std::max(count, 0)),
                            static_cast<std::uint64_t>(integer_or(p, "seed", t.path, 1)));
      } else {
        std::vector<int> counts(box.size(), 3);
        if (p.contains("grid")) {
          const json& g = p["grid"];
          if (!g.is_array() || g.size() != box.size()) throw ConfigError(at(t.path, "grid"), "one count per box dimension");
          for (std::size_t i = 0; i < g.size(); ++i) counts[i] = integer(g[i], at(at(t.path, "grid"), i));
        }
        pts = grid_points(box, counts);
      }
      ScanOptions so;
      so.n_prime = number_or(p, "N_prime", t.path, *std::max_element(sc.n_primes.begin(), sc.n_primes.end()));
      if (!(so.n_prime > sc.metric->dim - 2))
        throw ConfigError(at(t.path, "N_prime"), "the scan needs N' > n-1 = " + std::to_string(sc.metric->dim - 2));
      so.directions = integer_or(p, "directions", t.path, 16);
      so.gap_tol = sc.tol.gap_tol;
      so.seed = static_cast<std::uint64_t>(integer_or(p, "seed", t.path, 1));
      const ScanReport sr = nec_scan(*sc.metric, pts, so);
      tr.cls = sr.verdict == EnergyVerdict::Holds ? VerdictClass::Holds : VerdictClass::Violated;
      tr.verdict = to_string(sr.verdict);
      sum = {{"min_gap", sr.min_gap}, {"N_prime", so.n_prime}, {"points", sr.points.size()},
             {"skipped", sr.skipped}, {"evaluations", sr.evaluations}, {"gap_tol", sr.gap_tol}};
      if (sr.argmin_point.size()) {
        sum["argmin_point"] = to_json(sr.argmin_point);
        sum["argmin_direction"] = to_json(sr.argmin_direction);
      }
      std::string csv;
      for (int i = 0; i < sc.metric->dim; ++i) csv += "x" + std::to_string(i) + ",";
      csv += "min_gap\n";
      for (std::size_t i = 0; i < sr.points.size(); ++i) {
        for (Eigen::Index c = 0; c < sr.points[i].size(); ++c) csv += fmt17(sr.points[i](c)) + ",";
        csv += fmt17(sr.point_min_gap[i]) + "\n";
      }
      out.tables[scan_index++ ? "scan_" + std::to_string(scan_index) + ".csv" : "scan.csv"] = csv;
    } else if (t.type == "witness") {
      const int d = sc.metric->dim;
      const Vec x = vector_of(p["point"], at(t.path, "point"), d);
      const Vec v = vector_of(p["direction"], at(t.path, "direction"), d);
      WitnessOptions wo;
      wo.delta = number_or(p, "delta", t.path, wo.delta);
      wo.r = number_or(p, "r", t.path, wo.r);
      wo.max_halvings = integer_or(p, "max_halvings", t.path, wo.max_halvings);
      wo.resolution = integer_or(p, "resolution", t.path, wo.resolution);
      if (p.contains("lambda")) wo.lambda = number(p["lambda"], at(t.path, "lambda"));
      wo.t_grid = sc.t_grid;
      wo.ray = ray_opts;
      const double exponent = number_or(p, "exponent", t.path, sc.n);
      const WitnessResult w = witness_violation(sc.metric, x, v, exponent, wo);
      tr.cls = w.found ? VerdictClass::Violated : VerdictClass::Inconclusive;
      tr.verdict = w.found ? "violation found" : "inconclusive: shrink limit reached without violation";
      sum = {{"point", to_json(w.point)}, {"direction", to_json(w.direction)}, {"exponent", w.exponent},
             {"lambda", w.lambda},        {"gap", w.gap},                     {"attempts", json::array()}};
      for (const auto& a : w.attempts)
        sum["attempts"].push_back({{"delta", a.delta}, {"r", a.r}, {"min_slack", a.min_slack},
                                   {"violation_margin", a.violation_margin}, {"verdict", to_string(a.verdict)}});
      if (w.report && w.report->verdict != ConvexityVerdict::Incomplete) {
        sum["min_slack"] = w.report->min_slack;
        sum["argmin_t"] = w.report->argmin_t;
        sum["slack_tol"] = w.report->slack_tol;
        out.tables[witness_index++ ? "witness_" + std::to_string(witness_index) + ".csv" : "witness.csv"] =
            entropy_csv(*w.report);
      }
    } else if (t.type == "trapped") {
      const TrappedReport& tr2 = trapped_report();
      tr.cls = tr2.trapped ? VerdictClass::Holds : VerdictClass::Violated;
      tr.verdict = tr2.trapped ? "synthetically trapped" : "not trapped";
      sum = {{"eps", tr2.eps}, {"eps_outer", tr2.eps_outer}, {"eps_inner", tr2.eps_inner}, {"nodes", tr2.nodes.size()}};
      if (tr2.cap)
        sum["cap_check"] = {{"node", tr2.cap->node},         {"H_outer", tr2.cap->h_outer},
                            {"H_inner", tr2.cap->h_inner},   {"dlog_outer", tr2.cap->dlog_outer},
                            {"dlog_inner", tr2.cap->dlog_inner}, {"signs_agree", tr2.cap->signs_agree}};
    } else if (t.type == "convexity") {
      const Measure mu = measure();
      const CongruencePtr c = congruence();
      tr.cls = VerdictClass::Holds;
      std::vector<std::string> verdicts;
      sum["reports"] = json::array();
      for (std::size_t i = 0; i < sc.n_primes.size(); ++i) {
        const InterpolationReport r = convexity_report(mu, sc.n_primes[i], sc.t_grid);
        const VerdictClass cls = convexity_class(r.verdict);
        if (cls == VerdictClass::Violated || (cls == VerdictClass::Inconclusive && tr.cls == VerdictClass::Holds)) tr.cls = cls;
        verdicts.push_back(to_string(r.verdict));
        json jr = {{"N_prime", sc.n_primes[i]}, {"verdict", to_string(r.verdict)}};
        if (r.verdict == ConvexityVerdict::Incomplete) {
          jr["dead_ray"] = *r.dead_ray;
          jr["dead_at"] = *r.dead_at;
        } else {
          const LocalizationRecord loc = localized_implies_global(mu, r);
          jr.update({{"S0", r.entropy.front()},
                     {"S1", r.entropy.back()},
                     {"min_slack", r.min_slack},
                     {"argmin_t", r.argmin_t},
                     {"slack_tol", r.slack_tol},
                     {"max_mass_error", r.max_mass_error},
                     {"localization_max_difference", loc.max_difference},
                     {"localized_inequality_holds", loc.local_holds},
                     {"max_second_difference", max_second_difference(r)}});
          out.tables[i == 0 ? "entropy.csv" : "entropy_" + std::to_string(i) + ".csv"] = entropy_csv(r);
        }
        sum["reports"].push_back(jr);
      }
      tr.verdict = verdicts.front();
      for (std::size_t i = 1; i < verdicts.size(); ++i) tr.verdict += "/" + verdicts[i];
      // Ray invariants and per-ray tracks.
      RayDiagnostics worst;
      worst.trace_cs = std::numeric_limits<double>::infinity();
      std::string csv = "ray,t,trU,y,z,rho\n";
      std::size_t focal = 0;
      for (const auto& r : c->rays()) {
        const RayDiagnostics dg = ray_diagnostics(r.ray);
        worst.null_residual = std::max(worst.null_residual, dg.null_residual);
        worst.gram_drift = std::max(worst.gram_drift, dg.gram_drift);
        worst.raychaudhuri = std::max(worst.raychaudhuri, dg.raychaudhuri);
        worst.asymmetry = std::max(worst.asymmetry, dg.asymmetry);
        worst.trace_cs = std::min(worst.trace_cs, dg.trace_cs);
        worst.log_det = std::max(worst.log_det, dg.log_det);
        if (r.ray.focal_time()) ++focal;
        for (double tt : sc.t_grid) {
          if (!r.ray.alive_at(tt) || r.ray.det(tt) <= sc.tol.y_tol) break;
          const double rho = mu.carries_mass(r.node) ? pushforward_density(mu, r.node, tt) : 0.0;
          csv += std::to_string(r.node) + "," + fmt17(tt) + "," + fmt17(r.ray.expansion(tt)) + "," + fmt17(r.ray.det(tt)) +
                 "," + fmt17(r.ray.weighted_det(tt)) + "," + fmt17(rho) + "\n";
        }
      }
      out.tables["rays.csv"] = csv;
      sum["rays"] = c->size();
      sum["focal_rays"] = focal;
      sum["invariants"] = {{"null_residual", worst.null_residual}, {"gram_drift", worst.gram_drift},
                           {"raychaudhuri_residual", worst.raychaudhuri}, {"asymmetry", worst.asymmetry},
                           {"trace_cauchy_schwarz_min", worst.trace_cs}, {"log_det_residual", worst.log_det}};
    } else if (t.type == "hawking") {
      const double t0 = number_or(p, "t0", t.path, 0.0), t1 = number_or(p, "t1", t.path, 1.0);
      const HawkingReport h = hawking_check(*congruence(), t0, t1, {}, sc.tol.area_rel_tol);
      switch (h.verdict) {
        case HawkingVerdict::Monotone:
        case HawkingVerdict::NonMonotoneIncomplete: tr.cls = VerdictClass::Holds; break;
        case HawkingVerdict::NonMonotoneComplete: tr.cls = VerdictClass::Violated; break;
        case HawkingVerdict::Inconclusive: tr.cls = VerdictClass::Inconclusive; break;
      }
      tr.verdict = h.describe();
      sum = {{"t0", t0}, {"t1", t1}, {"area_tol", h.area_tol}};
      if (h.m0) sum["m0"] = *h.m0;
      if (h.m1) sum["m1"] = *h.m1;
      if (h.completeness_fails_at) sum["completeness_fails_at"] = *h.completeness_fails_at;
    } else if (t.type == "penrose") {
      const TrappedReport& trr = trapped_report();
      const std::string mode = p.contains("eps") ? text(p["eps"], at(t.path, "eps")) : "family";
      if (mode != "family" && mode != "global") throw ConfigError(at(t.path, "eps"), "must be family or global");
      const double eps = mode == "global" ? trr.eps : (sc.normal == NormalChoice::Outer ? trr.eps_outer : trr.eps_inner);
      const double np = number_or(p, "N_prime", t.path, sc.n_primes.front());
      sum = {{"eps", eps}, {"eps_mode", mode}, {"N_prime", np}};
      if (!(eps > 0.0)) {
        tr.cls = VerdictClass::Inconclusive;
        tr.verdict = "refused: seed is not converging (eps <= 0)";
      } else {
        CongruenceOptions co;
        co.normal = sc.normal;
        co.ray = ray_opts;
        const double horizon = std::max(sc.t_max, 1.05 * np / eps);
        const Congruence c = build_congruence(sc.metric, *seed, horizon, co);
        const PenroseReport pr = penrose_bound(c, eps, np);
        sum.update({{"bound", pr.bound}, {"unit_bound", pr.unit_bound}, {"inconclusive_rays", pr.inconclusive},
                    {"unit_bound_holds", pr.unit_bound_holds}});
        double mx = 0.0;
        std::string csv = "ray,status,focal_time,extrapolated,bound,within_bound,unit_bound,within_unit_bound\n";
        for (const auto& r : pr.rays) {
          if (r.focal_time) mx = std::max(mx, *r.focal_time);
          csv += std::to_string(r.node) + "," + to_string(r.status) + "," + (r.focal_time ? fmt17(*r.focal_time) : "") + "," +
                 (r.extrapolated ? "1" : "0") + "," + fmt17(pr.bound) + "," + (r.within_bound ? "1" : "0") + "," +
                 fmt17(pr.unit_bound) + "," + (r.within_unit_bound ? "1" : "0") + "\n";
        }
        out.tables["penrose.csv"] = csv;
        sum["max_focal_time"] = mx;
        if (pr.incompleteness_forced) {
          tr.cls = VerdictClass::Holds;
          tr.verdict = "incompleteness forced";
        } else if (pr.inconclusive) {
          tr.cls = VerdictClass::Inconclusive;
          tr.verdict = "inconclusive: rays left the chart before the bound";
        } else {
          tr.cls = VerdictClass::Violated;
          tr.verdict = "focal bound violated";
        }
      }
    }
    tr.code = code_for(tr.cls, tr.expect);
    exit_code = worse(exit_code, tr.code);
    rep["tasks"].push_back({{"type", tr.type},
                            {"verdict", tr.verdict},
                            {"class", to_string(tr.cls)},
                            {"expect", to_string(tr.expect)},
                            {"code", tr.code},
                            {"summary", tr.summary}});
    out.tasks.push_back(std::move(tr));
  }
  out.exit_code = exit_code;
  rep["exit_code"] = exit_code;
  return out;
}

inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "report.json");
    f << r.report.dump(2) << "\n";
  }
  for (const auto& [name, text] : r.tables) {
    std::ofstream f(dir / name);
    f << text;
  }
}

}  // namespace nullconvex

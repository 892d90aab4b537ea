#pragma once

// Measures carried by a congruence, their pushforwards along T_t, relative Renyi entropies
// and convexity along the null displacement interpolation.
//
// With mu_0 = rho_0 m_H and m_H = e^{-V} vol, the area formula gives
//   rho_t(T_t x) = rho_0(x) e^{V(T_t x) - V(x)} / y_x(t),
//   S_N(mu_t) = -sum_k mu_k (rho_t o T_t)(x_k)^{-1/N},   mu_k = w_k rho_0 e^{-V_0} J_k.

#include "nullconvex/congruence.hpp"
#include "nullconvex/core.hpp"
#include "nullconvex/expression.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nullconvex {

using CongruencePtr = std::shared_ptr<const Congruence>;

class Measure {
 public:
  // rho0[k] is the unnormalized density at node k (0 outside the support).
  Measure(CongruencePtr c, std::vector<double> rho0) : c_(std::move(c)), rho0_(std::move(rho0)) {
    if (rho0_.size() != c_->size()) throw PreconditionError("one density value per ray");
    double z = 0.0;
    v0_.resize(rho0_.size());
    for (std::size_t k = 0; k < rho0_.size(); ++k) {
      if (!(rho0_[k] >= 0.0) || !std::isfinite(rho0_[k])) throw PreconditionError("density must be finite and nonnegative");
      const auto& r = c_->ray(k);
      v0_[k] = weight_at(c_->metric(), r.seed_point);
      z += r.weight * rho0_[k] * std::exp(-v0_[k]) * r.area_element;
    }
    if (!(z > 0.0)) throw PreconditionError("measure has zero mass");
    normalization_ = z;
    mass_.resize(rho0_.size());
    for (std::size_t k = 0; k < rho0_.size(); ++k) {
      rho0_[k] /= z;
      const auto& r = c_->ray(k);
      mass_[k] = r.weight * rho0_[k] * std::exp(-v0_[k]) * r.area_element;
    }
  }

  const Congruence& congruence() const { return *c_; }
  const CongruencePtr& congruence_ptr() const { return c_; }
  std::size_t size() const { return rho0_.size(); }
  double rho0(std::size_t k) const { return rho0_[k]; }
  double mass(std::size_t k) const { return mass_[k]; }
  bool carries_mass(std::size_t k) const { return rho0_[k] > 0.0; }
  double normalization() const { return normalization_; }

  // m_H of the support of mu_0 on the seed.
  double support_area() const {
    double a = 0.0;
    for (std::size_t k = 0; k < size(); ++k)
      if (carries_mass(k)) {
        const auto& r = c_->ray(k);
        a += r.weight * std::exp(-v0_[k]) * r.area_element;
      }
    return a;
  }

  double seed_weight(std::size_t k) const { return v0_[k]; }

 private:
  CongruencePtr c_;
  std::vector<double> rho0_;
  std::vector<double> mass_;
  std::vector<double> v0_;
  double normalization_ = 1.0;
};

inline Measure uniform_measure(CongruencePtr c, const NodePredicate& support = {}) {
  std::vector<double> rho(c->size(), 0.0);
  for (std::size_t k = 0; k < rho.size(); ++k) rho[k] = !support || support(k) ? 1.0 : 0.0;
  return Measure(std::move(c), std::move(rho));
}

// Density given as an expression in the chart coordinates of the seed point.
inline Measure density_measure(CongruencePtr c, const Expression& density, const NodePredicate& support = {}) {
  std::vector<double> rho(c->size(), 0.0);
  for (std::size_t k = 0; k < rho.size(); ++k)
    if (!support || support(k)) rho[k] = evaluate(density, c->ray(k).seed_point);
  return Measure(std::move(c), std::move(rho));
}

inline double pushforward_density(const Measure& mu, std::size_t k, double t) {
  const auto& r = mu.congruence().ray(k);
  if (!r.ray.alive_at(t)) throw PreconditionError("ray " + std::to_string(k) + " is not alive at t = " + std::to_string(t));
  const double y = r.ray.det(t);
  if (!(y > mu.congruence().options().ray.y_tol))
    throw PreconditionError("ray " + std::to_string(k) + " is focal at t = " + std::to_string(t));
  return mu.rho0(k) * std::exp(r.ray.weight(t) - mu.seed_weight(k)) / y;
}

inline void check_exponent(const Congruence& c, double n_prime) {
  const int n = c.dim() - 1;
  if (!(n_prime >= n - 1)) throw PreconditionError("entropy exponent must be at least n - 1");
}

inline double renyi_entropy(const Measure& mu, double t, double n_prime) {
  check_exponent(mu.congruence(), n_prime);
  double s = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (!mu.carries_mass(k)) continue;
    s -= mu.mass(k) * std::pow(pushforward_density(mu, k, t), -1.0 / n_prime);
  }
  return s;
}

// sum_k w_k rho_t(T_t x_k) e^{-V(T_t x_k)} y_k(t) J_k; equals 1 by the area formula.
inline double transported_mass(const Measure& mu, double t) {
  double s = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (!mu.carries_mass(k)) continue;
    const auto& r = mu.congruence().ray(k);
    s += r.weight * pushforward_density(mu, k, t) * r.ray.weighted_det(t) * r.area_element;
  }
  return s;
}

// Per-ray localized slack f(t) - (1-t) f(0) - t f(1) with f = rho^{-1/N}.
inline double local_slack(double rho0, double rho_t, double rho1, double t, double n_prime) {
  const double e = -1.0 / n_prime;
  return std::pow(rho_t, e) - (1.0 - t) * std::pow(rho0, e) - t * std::pow(rho1, e);
}

enum class ConvexityVerdict { Consistent, Marginal, Violated, Incomplete };

inline const char* to_string(ConvexityVerdict v) {
  switch (v) {
    case ConvexityVerdict::Consistent: return "consistent";
    case ConvexityVerdict::Marginal: return "marginal";
    case ConvexityVerdict::Violated: return "violated";
    case ConvexityVerdict::Incomplete: return "incomplete";
  }
  return "?";
}

struct InterpolationReport {
  double n_prime = 0.0;
  std::vector<double> t;          // full grid
  std::vector<double> entropy;    // S at each grid point
  std::vector<double> chord;      // (1-t) S_0 + t S_1
  std::vector<double> slack;      // chord - S; zero at the endpoints
  std::vector<double> min_ray_slack;
  std::vector<std::size_t> rays;  // mass-carrying ray indices
  std::vector<std::vector<double>> density;     // [ray][t] rho_t o T_t
  std::vector<std::vector<double>> ray_slack;   // [ray][t] localized slack
  double slack_tol = 0.0;
  double violation_margin = 0.0;  // 100 * slack_tol
  double min_slack = 0.0;
  double argmin_t = 0.0;
  double max_mass_error = 0.0;
  ConvexityVerdict verdict = ConvexityVerdict::Consistent;
  // Set when a mass-carrying ray dies inside the grid.
  std::optional<std::size_t> dead_ray;
  std::optional<double> dead_at;
};

inline std::vector<double> uniform_grid(int n = 33) {
  if (n < 2) throw PreconditionError("t-grid needs at least two points");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
  return g;
}

inline void validate_grid(const std::vector<double>& grid) {
  if (grid.size() < 2) throw PreconditionError("t-grid needs at least two points");
  if (grid.front() != 0.0 || grid.back() != 1.0) throw PreconditionError("t-grid must start at 0 and end at 1");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw PreconditionError("t-grid must be strictly increasing");
}

inline InterpolationReport convexity_report(const Measure& mu, double n_prime, const std::vector<double>& grid = uniform_grid()) {
  validate_grid(grid);
  check_exponent(mu.congruence(), n_prime);
  InterpolationReport rep;
  rep.n_prime = n_prime;
  rep.t = grid;
  for (std::size_t k = 0; k < mu.size(); ++k)
    if (mu.carries_mass(k)) rep.rays.push_back(k);

  for (std::size_t k : rep.rays) {
    const auto& r = mu.congruence().ray(k).ray;
    if (!r.alive_at(1.0) || r.det(1.0) <= mu.congruence().options().ray.y_tol) {
      double at = r.focal_time() ? *r.focal_time() : r.t_end();
      if (!rep.dead_at || at < *rep.dead_at) {
        rep.dead_at = at;
        rep.dead_ray = k;
      }
    }
  }
  if (rep.dead_ray) {
    rep.verdict = ConvexityVerdict::Incomplete;
    return rep;
  }

  const std::size_t nt = grid.size();
  rep.density.assign(rep.rays.size(), std::vector<double>(nt));
  rep.ray_slack.assign(rep.rays.size(), std::vector<double>(nt, 0.0));
  rep.entropy.assign(nt, 0.0);
  for (std::size_t j = 0; j < nt; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rep.rays.size(); ++i) {
      const std::size_t k = rep.rays[i];
      const double rho = pushforward_density(mu, k, grid[j]);
      rep.density[i][j] = rho;
      s -= mu.mass(k) * std::pow(rho, -1.0 / n_prime);
    }
    rep.entropy[j] = s;
    rep.max_mass_error = std::max(rep.max_mass_error, std::abs(transported_mass(mu, grid[j]) - 1.0));
  }
  const double s0 = rep.entropy.front(), s1 = rep.entropy.back();
  rep.slack_tol = 1e-8 * (1.0 + std::abs(s0) + std::abs(s1));
  rep.violation_margin = 100.0 * rep.slack_tol;
  rep.chord.resize(nt);
  rep.slack.resize(nt);
  rep.min_ray_slack.assign(nt, 0.0);
  rep.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < nt; ++j) {
    const double t = grid[j];
    rep.chord[j] = (1.0 - t) * s0 + t * s1;
    rep.slack[j] = rep.chord[j] - rep.entropy[j];
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rep.rays.size(); ++i) {
      const auto& d = rep.density[i];
      rep.ray_slack[i][j] = local_slack(d.front(), d[j], d.back(), t, n_prime);
      mn = std::min(mn, rep.ray_slack[i][j]);
    }
    rep.min_ray_slack[j] = mn;
    if (j > 0 && j + 1 < nt && rep.slack[j] < rep.min_slack) {
      rep.min_slack = rep.slack[j];
      rep.argmin_t = t;
    }
  }
  if (nt == 2) rep.min_slack = 0.0;
  if (rep.min_slack < -rep.violation_margin) rep.verdict = ConvexityVerdict::Violated;
  else if (rep.min_slack < -rep.slack_tol) rep.verdict = ConvexityVerdict::Marginal;
  else rep.verdict = ConvexityVerdict::Consistent;
  return rep;
}

// Quadrature of the per-ray slacks against mu_0 compared with the global slack.
struct LocalizationRecord {
  std::vector<double> integrated;  // sum_k mu_k * ray_slack_k(t)
  std::vector<double> global;      // slack(t)
  double max_difference = 0.0;
  bool local_holds = true;         // every per-ray slack >= -slack_tol
};

inline LocalizationRecord localized_implies_global(const Measure& mu, const InterpolationReport& rep) {
  if (rep.verdict == ConvexityVerdict::Incomplete) throw PreconditionError("interpolation is incomplete");
  LocalizationRecord out;
  out.global = rep.slack;
  out.integrated.assign(rep.t.size(), 0.0);
  for (std::size_t j = 0; j < rep.t.size(); ++j) {
    for (std::size_t i = 0; i < rep.rays.size(); ++i) {
      out.integrated[j] += mu.mass(rep.rays[i]) * rep.ray_slack[i][j];
      if (rep.ray_slack[i][j] < -rep.slack_tol) out.local_holds = false;
    }
    out.max_difference = std::max(out.max_difference, std::abs(out.integrated[j] - out.global[j]));
  }
  return out;
}

inline LocalizationRecord localized_implies_global(const Measure& mu, double n_prime,
                                                   const std::vector<double>& grid = uniform_grid()) {
  return localized_implies_global(mu, convexity_report(mu, n_prime, grid));
}

// Largest second difference of t -> rho_t^{-1/N} over rays and interior grid points,
// normalized to a uniform step. Nonpositive up to rounding when the ray data are concave.
inline double max_second_difference(const InterpolationReport& rep) {
  double mx = -std::numeric_limits<double>::infinity();
  const double e = -1.0 / rep.n_prime;
  for (const auto& d : rep.density)
    for (std::size_t j = 1; j + 1 < d.size(); ++j) {
      const double h0 = rep.t[j] - rep.t[j - 1], h1 = rep.t[j + 1] - rep.t[j];
      const double f0 = std::pow(d[j - 1], e), f1 = std::pow(d[j], e), f2 = std::pow(d[j + 1], e);
      const double dd = 2.0 * (h0 * f2 - (h0 + h1) * f1 + h1 * f0) / (h0 * h1 * (h0 + h1));
      mx = std::max(mx, dd * h0 * h1);
    }
  return mx;
}

}  // namespace nullconvex

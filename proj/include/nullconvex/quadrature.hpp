#pragma once

#include "nullconvex/core.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace nullconvex {

enum class QuadratureRule { GaussLegendre, Uniform };

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [a, b].
inline Rule1D gauss_legendre(int n, double a, double b) {
  if (n < 1) throw PreconditionError("quadrature needs at least one node");
  Rule1D r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (x * p0 - p1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(n - 1 - i);
    r.nodes[lo] = mid - half * x;
    r.nodes[hi] = mid + half * x;
    r.weights[lo] = r.weights[hi] = half * w;
  }
  return r;
}

// Midpoint rule; spectrally accurate for periodic integrands.
inline Rule1D uniform_rule(int n, double a, double b) {
  if (n < 1) throw PreconditionError("quadrature needs at least one node");
  Rule1D r;
  const double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    r.nodes.push_back(a + (i + 0.5) * h);
    r.weights.push_back(h);
  }
  return r;
}

inline Rule1D make_rule(QuadratureRule kind, int n, double a, double b) {
  return kind == QuadratureRule::GaussLegendre ? gauss_legendre(n, a, b) : uniform_rule(n, a, b);
}

struct ProductNode {
  std::vector<double> theta;
  double weight;
};

// Tensor-product rule over a box; rules[i] covers parameter i.
inline std::vector<ProductNode> product_rule(const std::vector<Rule1D>& rules) {
  std::vector<ProductNode> out{{{}, 1.0}};
  for (const Rule1D& r : rules) {
    std::vector<ProductNode> next;
    for (const ProductNode& p : out)
      for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        ProductNode q = p;
        q.theta.push_back(r.nodes[i]);
        q.weight *= r.weights[i];
        next.push_back(std::move(q));
      }
    out = std::move(next);
  }
  return out;
}

}  // namespace nullconvex

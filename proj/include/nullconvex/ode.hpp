#pragma once

// Dormand-Prince 5(4) with Hairer's continuous extension. The stepper hands back one
// accepted step at a time so callers can inspect the dense output for events.

#include "nullconvex/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace nullconvex {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_init = 0.0;  // 0: automatic
  double h_max = std::numeric_limits<double>::infinity();
  double h_min_rel = 1e-14;
  // Optional partition of the state into blocks (start indices, ascending). Within a block the
  // error scale never drops below block_floor * rtol * (largest entry of the block), so rounding
  // noise in entries that vanish analytically does not drive the step size down.
  std::vector<Eigen::Index> blocks;
  double block_floor = 1e-4;
};

// Raised when the step size underflows; carries the last accepted state.
class StepUnderflow : public Error {
 public:
  StepUnderflow(double t, Vec y) : Error("step size underflow at t = " + std::to_string(t)), t_(t), y_(std::move(y)) {}
  double t() const noexcept { return t_; }
  const Vec& state() const noexcept { return y_; }

 private:
  double t_;
  Vec y_;
};

// Interpolant of one accepted step on [t0, t0 + h].
struct DenseSegment {
  double t0 = 0.0;
  double h = 0.0;
  Vec r1, r2, r3, r4, r5;

  double t1() const { return t0 + h; }

  Vec eval(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
  }

  // Time derivative of the interpolant.
  Vec rate(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    const Vec r = r4 + s1 * r5;
    const Vec q = r3 + s * r;
    const Vec dq = r - s * r5;
    const Vec dp = -q + s1 * dq;
    return (r2 + s1 * q + s * dp) / h;
  }
};

template <class Rhs>
class Dopri5 {
 public:
  Dopri5(Rhs rhs, double t0, Vec y0, OdeOptions opts = {})
      : rhs_(std::move(rhs)), opts_(opts), t_(t0), y_(std::move(y0)) {
    k1_ = rhs_(t_, y_);
    h_ = opts_.h_init > 0.0 ? opts_.h_init : initial_step();
  }

  double t() const { return t_; }
  const Vec& y() const { return y_; }
  const Vec& derivative() const { return k1_; }

  // Replaces the current state (e.g. after a constraint projection).
  void reset_state(Vec y) {
    y_ = std::move(y);
    k1_ = rhs_(t_, y_);
  }

  // Takes one accepted step that does not pass t_stop (> t()).
  DenseSegment step(double t_stop) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    const double h_min = opts_.h_min_rel * std::max(1.0, std::abs(t_));
    for (;;) {
      double h = std::min({h_, opts_.h_max, t_stop - t_});
      bool last = h >= t_stop - t_;
      if (h < h_min && !last) throw StepUnderflow(t_, y_);

      Vec k2, k3, k4, k5, k6, k7, y1;
      bool domain_ok = true;
      try {
        k2 = rhs_(t_ + c2 * h, y_ + h * (a21 * k1_));
        k3 = rhs_(t_ + c3 * h, y_ + h * (a31 * k1_ + a32 * k2));
        k4 = rhs_(t_ + c4 * h, y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3));
        k5 = rhs_(t_ + c5 * h, y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
        k6 = rhs_(t_ + h, y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        y1 = y_ + h * (a71 * k1_ + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        k7 = rhs_(t_ + h, y1);
      } catch (const DomainError&) {
        domain_ok = false;
      } catch (const GeometryError&) {
        domain_ok = false;
      }
      if (!domain_ok || !y1.allFinite() || !k7.allFinite()) {
        h_ = 0.25 * h;
        continue;
      }
      const Vec err = h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double sum = 0.0;
      const Vec mag = y_.cwiseAbs().cwiseMax(y1.cwiseAbs());
      for (std::size_t b = 0; b < std::max<std::size_t>(opts_.blocks.size(), 1); ++b) {
        const Eigen::Index lo = opts_.blocks.empty() ? 0 : opts_.blocks[b];
        const Eigen::Index hi = b + 1 < opts_.blocks.size() ? opts_.blocks[b + 1] : err.size();
        const double floor = opts_.blocks.empty() ? 0.0 : opts_.block_floor * mag.segment(lo, hi - lo).maxCoeff();
        for (Eigen::Index i = lo; i < hi; ++i) {
          const double sc = opts_.atol + opts_.rtol * std::max(mag(i), floor);
          const double r = err(i) / sc;
          sum += r * r;
        }
      }
      const double en = std::sqrt(sum / static_cast<double>(err.size()));
      if (en <= 1.0) {
        DenseSegment seg;
        seg.t0 = t_;
        seg.h = h;
        seg.r1 = y_;
        seg.r2 = y1 - y_;
        seg.r3 = h * k1_ - seg.r2;
        seg.r4 = seg.r2 - h * k7 - seg.r3;
        seg.r5 = h * (d1 * k1_ + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        if (!last || fac < 1.0) h_ = h * fac;
        t_ = last ? t_stop : t_ + h;
        y_ = std::move(y1);
        k1_ = std::move(k7);
        return seg;
      }
      h_ = h * std::clamp(0.9 * std::pow(en, -0.2), 0.2, 1.0);
    }
  }

 private:
  double initial_step() {
    auto scale = [&](const Vec& v) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double sc = opts_.atol + opts_.rtol * std::abs(y_(i));
        s += (v(i) / sc) * (v(i) / sc);
      }
      return std::sqrt(s / static_cast<double>(v.size()));
    };
    const double d0 = scale(y_), d1 = scale(k1_);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, opts_.h_max);
    try {
      const Vec k = rhs_(t_ + h0, y_ + h0 * k1_);
      const double d2 = scale(k - k1_) / h0;
      const double m = std::max(d1, d2);
      const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
      return std::min({100 * h0, h1, opts_.h_max});
    } catch (const Error&) {
      return h0;
    }
  }

  Rhs rhs_;
  OdeOptions opts_;
  double t_;
  Vec y_;
  Vec k1_;
  double h_ = 0.0;
};

}  // namespace nullconvex

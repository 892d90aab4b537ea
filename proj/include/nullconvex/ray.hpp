#pragma once

// Null geodesics with an optional screen frame and screen Jacobi matrix carried along.
//
// State layout (d = chart dimension, k = d - 2):
//   x[d] u[d] | E_1..E_k [k*d] lbar[d] A[k*k] A'[k*k]
// E_i and lbar are parallel transported; A solves A'' = -R_s A with
// R_s(j,i) = <E_j, R(E_i, u)u>, the tidal operator on the screen.

#include "nullconvex/core.hpp"
#include "nullconvex/curvature.hpp"
#include "nullconvex/metric.hpp"
#include "nullconvex/ode.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace nullconvex {

enum class RayExit { Reached, ChartExit, CurvatureBlowup, StepUnderflow, Focal };

inline const char* to_string(RayExit e) {
  switch (e) {
    case RayExit::Reached: return "reached";
    case RayExit::ChartExit: return "chart_exit";
    case RayExit::CurvatureBlowup: return "curvature_blowup";
    case RayExit::StepUnderflow: return "step_underflow";
    case RayExit::Focal: return "focal";
  }
  return "?";
}

struct RayOptions {
  OdeOptions ode{};
  double t_max = 1.0;
  double y_tol = 1e-10;          // focal threshold on det A
  double blowup_limit = 1e16;    // on max |Christoffel|
  double null_tol = 1e-8;        // initial null check, relative to |v|^2
  bool project_frame = true;
  int focal_samples = 16;        // dense samples per step scanned for focal points
};

// Initial screen data at the seed point.
struct ScreenInit {
  Mat frame;  // d x k, orthonormal, orthogonal to the generator
  Vec lbar;   // null, <lbar, generator> = -1, orthogonal to frame
  Mat u0;     // k x k initial Weingarten matrix, A'(0)
};

class RaySolution {
 public:
  RaySolution(MetricPtr metric, bool screen) : metric_(std::move(metric)), screen_(screen) {
    d_ = metric_ ? metric_->dim : 0;
    k_ = d_ - 2;
  }

  const MetricSpec& metric() const { return *metric_; }
  int dim() const { return d_; }
  bool has_screen() const { return screen_; }

  double t_end() const { return t_end_; }
  RayExit exit() const { return exit_; }
  const std::optional<double>& focal_time() const { return focal_; }
  bool focal_extrapolated() const { return focal_extrapolated_; }
  double max_frame_drift() const { return max_drift_; }
  // Largest pre-projection drift over steps ending at or before t.
  double max_frame_drift(double t) const {
    double out = 0.0;
    for (const auto& [te, dr] : drift_log_)
      if (te <= t) out = std::max(out, dr);
    return out;
  }
  std::size_t steps() const { return segments_.size(); }

  bool alive_at(double t) const { return t >= 0.0 && t <= t_end_ && (!focal_ || t < *focal_); }

  Vec state(double t) const {
    if (t < 0.0 || t > t_end_ * (1 + 1e-15) + 1e-300) throw PreconditionError("ray is not defined at t = " + std::to_string(t));
    if (segments_.empty()) return initial_;
    const DenseSegment& seg = segment_at(t);
    return seg.eval(std::min(t, seg.t1()));
  }

  Vec state_rate(double t) const {
    if (segments_.empty()) throw PreconditionError("ray has no integrated segment");
    return segment_at(t).rate(t);
  }

  Vec position(double t) const { return state(t).head(d_); }
  Vec velocity(double t) const { return state(t).segment(d_, d_); }

  Mat frame(double t) const { return frame_of(state(t)); }
  Vec lbar(double t) const { return state(t).segment(2 * d_ + k_ * d_, d_); }
  Mat jacobi(double t) const { return jacobi_of(state(t)); }
  Mat jacobi_rate(double t) const { return jacobi_rate_of(state(t)); }

  Mat weingarten(double t) const {
    const Vec s = state(t);
    return jacobi_rate_of(s) * jacobi_of(s).inverse();
  }
  double det(double t) const { return jacobi(t).determinant(); }
  double expansion(double t) const { return weingarten(t).trace(); }
  double weight(double t) const { return weight_at(*metric_, position(t)); }
  double weighted_det(double t) const { return std::exp(-weight(t)) * det(t); }

  Mat frame_of(const Vec& s) const {
    require_screen();
    return Eigen::Map<const Mat>(s.data() + 2 * d_, d_, k_);
  }
  Mat jacobi_of(const Vec& s) const {
    require_screen();
    return Eigen::Map<const Mat>(s.data() + 3 * d_ + k_ * d_, k_, k_);
  }
  Mat jacobi_rate_of(const Vec& s) const {
    require_screen();
    return Eigen::Map<const Mat>(s.data() + 3 * d_ + k_ * d_ + k_ * k_, k_, k_);
  }

 private:
  friend RaySolution trace_ray(MetricPtr, const Vec&, const Vec&, const RayOptions&, const ScreenInit*);

  const DenseSegment& segment_at(double t) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double tt, const DenseSegment& s) { return tt < s.t0; });
    if (it != segments_.begin()) --it;
    return *it;
  }

  void require_screen() const {
    if (!screen_) throw PreconditionError("ray was integrated without a screen frame");
  }

  MetricPtr metric_;
  bool screen_;
  int d_ = 0, k_ = 0;
  Vec initial_;
  std::vector<DenseSegment> segments_;
  double t_end_ = 0.0;
  RayExit exit_ = RayExit::Reached;
  std::optional<double> focal_;
  bool focal_extrapolated_ = false;
  double max_drift_ = 0.0;
  std::vector<std::pair<double, double>> drift_log_;
};

namespace detail {

struct RayRhs {
  const MetricSpec* m;
  bool screen;
  int d, k;

  Vec operator()(double, const Vec& y) const {
    const Vec x = y.head(d);
    const Vec u = y.segment(d, d);
    const Connection c = connection_at(*m, x, screen);
    Vec dy(y.size());
    dy.head(d) = u;
    dy.segment(d, d) = c.acceleration(u, u);
    if (!screen) return dy;
    Mat frame = Eigen::Map<const Mat>(y.data() + 2 * d, d, k);
    for (int i = 0; i < k; ++i) dy.segment(2 * d + i * d, d) = c.acceleration(u, frame.col(i));
    const int lb = 2 * d + k * d;
    dy.segment(lb, d) = c.acceleration(u, y.segment(lb, d));
    Mat tidal(k, k);
    for (int i = 0; i < k; ++i) {
      const Vec r = c.g * c.curvature_operator(frame.col(i), u, u);
      for (int j = 0; j < k; ++j) tidal(j, i) = frame.col(j).dot(r);
    }
    const int ao = lb + d;
    Eigen::Map<const Mat> a(y.data() + ao, k, k);
    Eigen::Map<const Mat> ap(y.data() + ao + k * k, k, k);
    Eigen::Map<Mat>(dy.data() + ao, k, k) = ap;
    Eigen::Map<Mat>(dy.data() + ao + k * k, k, k) = -tidal * a;
    return dy;
  }
};

inline double smallest_singular_value(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues().minCoeff();
}

}  // namespace detail

// Integrates the null geodesic exp_x(t v) for t in [0, t_max]. With `screen` the frame,
// auxiliary null vector and screen Jacobi matrix are integrated alongside and focal points
// terminate the ray.
inline RaySolution trace_ray(MetricPtr metric, const Vec& x0, const Vec& v0, const RayOptions& opts,
                             const ScreenInit* screen = nullptr) {
  const MetricSpec& m = *metric;
  const int d = m.dim, k = d - 2;
  if (x0.size() != d || v0.size() != d) throw PreconditionError("point and direction must match the chart dimension");
  if (!inside_chart(m, x0)) throw GeometryError("initial point is outside the chart domain");
  const CausalClass cls = classify_vector(m, x0, v0, opts.null_tol);
  if (cls.type != CausalType::Null) throw PreconditionError("initial direction is not null");
  if (cls.orientation != TimeOrientation::Future) throw PreconditionError("initial direction is not future-directed");

  RaySolution ray(metric, screen != nullptr);
  const int size = screen ? 3 * d + k * d + 2 * k * k : 2 * d;
  Vec y0(size);
  y0.head(d) = x0;
  y0.segment(d, d) = v0;
  if (screen) {
    Eigen::Map<Mat>(y0.data() + 2 * d, d, k) = screen->frame;
    y0.segment(2 * d + k * d, d) = screen->lbar;
    const int ao = 3 * d + k * d;
    Eigen::Map<Mat>(y0.data() + ao, k, k) = Mat::Identity(k, k);
    Eigen::Map<Mat>(y0.data() + ao + k * k, k, k) = screen->u0;
  }
  ray.initial_ = y0;

  auto project = [&](Vec& y) {
    const Vec x = y.head(d);
    const Vec u = y.segment(d, d);
    const Mat g = metric_at(m, x);
    const int lb = 2 * d + k * d;
    Vec lbar = y.segment(lb, d);
    double drift = std::abs(dot(g, lbar, lbar)) + std::abs(dot(g, lbar, u) + 1.0);
    lbar *= -1.0 / dot(g, lbar, u);
    lbar += 0.5 * dot(g, lbar, lbar) * u;
    Eigen::Map<Mat> frame(y.data() + 2 * d, d, k);
    for (int i = 0; i < k; ++i) {
      drift = std::max(drift, std::abs(dot(g, frame.col(i), u)));
      drift = std::max(drift, std::abs(dot(g, frame.col(i), lbar)));
      for (int j = 0; j <= i; ++j)
        drift = std::max(drift, std::abs(dot(g, frame.col(i), frame.col(j)) - (i == j ? 1.0 : 0.0)));
    }
    for (int i = 0; i < k; ++i) {
      Vec e = frame.col(i);
      e += dot(g, e, lbar) * u + dot(g, e, u) * lbar;
      for (int j = 0; j < i; ++j) e -= dot(g, e, frame.col(j)) * Vec(frame.col(j));
      frame.col(i) = e / std::sqrt(dot(g, e, e));
    }
    y.segment(lb, d) = lbar;
    return drift;
  };

  OdeOptions ode = opts.ode;
  if (ode.blocks.empty()) {
    for (int b = 0; b < (screen ? 3 + k : 2); ++b) ode.blocks.push_back(static_cast<Eigen::Index>(b) * d);
    if (screen) {
      ode.blocks.push_back(3 * d + k * d);
      ode.blocks.push_back(3 * d + k * d + k * k);
    }
  }
  Dopri5<detail::RayRhs> stepper(detail::RayRhs{&m, screen != nullptr, d, k}, 0.0, y0, ode);

  struct Sample {
    double t, det, sigma;
  };
  const int ao = 3 * d + k * d;
  auto sample_of = [&](const Vec& s, double t) {
    const Mat a = Eigen::Map<const Mat>(s.data() + ao, k, k);
    return Sample{t, a.determinant(), detail::smallest_singular_value(a)};
  };
  std::vector<Sample> recent;
  if (screen) recent.push_back({0.0, 1.0, 1.0});

  auto finish = [&](double t_end, RayExit e) {
    ray.t_end_ = t_end;
    ray.exit_ = e;
  };

  for (;;) {
    DenseSegment seg;
    try {
      seg = stepper.step(opts.t_max);
    } catch (const StepUnderflow& su) {
      finish(su.t(), RayExit::StepUnderflow);
      return ray;
    }
    ray.segments_.push_back(seg);
    const double t1 = stepper.t();
    Vec y1 = stepper.y();

    auto blown_at = [&](const Vec& x) {
      try {
        const double gmax = connection_at(m, x, false).max_abs_christoffel();
        return !std::isfinite(gmax) || gmax > opts.blowup_limit;
      } catch (const Error&) {
        return true;
      }
    };
    auto bisect = [&](double lo, double hi, const auto& good) {
      for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (good(seg.eval(mid).head(d)) ? lo : hi) = mid;
      }
      return lo;
    };

    if (!inside_chart(m, y1.head(d))) {
      const double lo = bisect(seg.t0, t1, [&](const Vec& x) { return inside_chart(m, x); });
      // A chart boundary reached through diverging curvature is a singularity, not an edge.
      if (blown_at(seg.eval(lo).head(d))) {
        finish(bisect(seg.t0, lo, [&](const Vec& x) { return !blown_at(x); }), RayExit::CurvatureBlowup);
      } else {
        finish(lo, RayExit::ChartExit);
      }
      return ray;
    }

    const bool blown = blown_at(y1.head(d));

    if (screen) {
      auto eval_at = [&](double t) { return ray.state(std::min(t, t1)); };
      ray.t_end_ = t1;
      std::optional<double> focal, end_at;
      bool extrapolated = false;
      const int ns = std::max(2, opts.focal_samples);
      for (int j = 1; j <= ns && !focal; ++j) {
        const double tj = j == ns ? t1 : seg.t0 + seg.h * j / ns;
        const Sample cur = sample_of(seg.eval(tj), tj);
        // Interior minimum of the smallest singular value at the previous sample.
        if (recent.size() >= 2) {
          const Sample& a = recent[recent.size() - 2];
          const Sample& b = recent.back();
          if (b.sigma < a.sigma && b.sigma < cur.sigma) {
            const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
            double lo = a.t, hi = cur.t;
            auto sig = [&](double t) { return sample_of(eval_at(t), t).sigma; };
            double c1 = hi - gr * (hi - lo), c2 = lo + gr * (hi - lo);
            double f1 = sig(c1), f2 = sig(c2);
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
              if (f1 < f2) {
                hi = c2; c2 = c1; f2 = f1;
                c1 = hi - gr * (hi - lo); f1 = sig(c1);
              } else {
                lo = c1; c1 = c2; f1 = f2;
                c2 = lo + gr * (hi - lo); f2 = sig(c2);
              }
            }
            const double tm = 0.5 * (lo + hi);
            if (std::abs(sample_of(eval_at(tm), tm).det) <= opts.y_tol) {
              focal = tm;
              end_at = tm;
              break;
            }
          }
        }
        if (cur.det <= opts.y_tol) {
          const Sample& prev = recent.back();
          if (cur.det < 0.0 && prev.det > 0.0) {
            double lo = prev.t, hi = cur.t;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
              const double mid = 0.5 * (lo + hi);
              (sample_of(eval_at(mid), mid).det > 0.0 ? lo : hi) = mid;
            }
            focal = 0.5 * (lo + hi);
            end_at = lo;
          } else {
            double lo = prev.t, hi = cur.t;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
              const double mid = 0.5 * (lo + hi);
              (sample_of(eval_at(mid), mid).det > opts.y_tol ? lo : hi) = mid;
            }
            end_at = lo;
            focal = lo;
            // Advance to the singular point of U with the local Riccati estimate.
            const Vec s = eval_at(lo);
            const Mat a = Eigen::Map<const Mat>(s.data() + ao, k, k);
            const Mat ap = Eigen::Map<const Mat>(s.data() + ao + k * k, k, k);
            const Mat u = ap * a.inverse();
            const double tr = u.trace(), tr2 = (u * u).trace();
            if (tr < 0.0 && tr2 > 0.0 && std::isfinite(tr2)) {
              focal = lo + (-tr / tr2);
              extrapolated = true;
            }
          }
          break;
        }
        recent.push_back(cur);
        if (recent.size() > 3) recent.erase(recent.begin());
      }
      if (focal) {
        ray.focal_ = focal;
        ray.focal_extrapolated_ = extrapolated;
        finish(*end_at, RayExit::Focal);
        return ray;
      }
      if (opts.project_frame && !blown) {
        const double dr = project(y1);
        ray.max_drift_ = std::max(ray.max_drift_, dr);
        ray.drift_log_.emplace_back(t1, dr);
        stepper.reset_state(y1);
      }
    }

    if (blown) {
      finish(t1, RayExit::CurvatureBlowup);
      return ray;
    }
    if (t1 >= opts.t_max) {
      finish(opts.t_max, RayExit::Reached);
      return ray;
    }
  }
}

// Geodesic only.
inline RaySolution integrate_ray(MetricPtr metric, const Vec& x, const Vec& v, double t_max, RayOptions opts = {}) {
  opts.t_max = t_max;
  return trace_ray(std::move(metric), x, v, opts, nullptr);
}

}  // namespace nullconvex

#include "nullconvex/congruence.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace nullconvex;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double c : v) x(i++) = c;
  return x;
}

MetricPtr ptr(MetricSpec m) { return std::make_shared<const MetricSpec>(std::move(m)); }

SeedSurface horizon_sphere(int n_polar = 6, int n_azimuth = 8) {
  return seed_from_expressions(4, {"0", "2", "u0", "u1"}, {{0.0, kPi}, {0.0, 2 * kPi}}, QuadratureRule::GaussLegendre,
                               {n_polar, n_azimuth});
}

}  // namespace

TEST(NullNormals, MinkowskiSphere) {
  const MetricSpec m = minkowski(4);
  const SeedSurface s = coordinate_sphere(0.0, 1.0, 4, 4);
  const std::vector<double> theta = {0.9, 2.1};
  const NullNormals n = null_normals(m, s, theta);
  const Vec r = vec({0, std::sin(0.9) * std::cos(2.1), std::sin(0.9) * std::sin(2.1), std::cos(0.9)});
  EXPECT_LT((n.outer - (vec({1, 0, 0, 0}) + r)).norm(), 1e-14);
  EXPECT_LT((n.inner - (vec({1, 0, 0, 0}) - r)).norm(), 1e-14);
}

TEST(NullNormals, HorizonGenerator) {
  const std::vector<double> theta = {1.2, 0.4};
  const NullNormals n = null_normals(schwarzschild_ef(1.0), horizon_sphere(), theta);
  EXPECT_LT((n.outer - vec({1, 0, 0, 0})).norm(), 1e-14);
}

TEST(NullNormals, OrientationFlagSwaps) {
  const MetricSpec m = flrw("1 + x0^2");
  const SeedSurface s = coordinate_sphere(0.3, 1.0, 4, 4);
  const std::vector<double> theta = {0.7, 5.0};
  const NullNormals a = null_normals(m, s, theta), b = null_normals(m, s.with_flipped_orientation(), theta);
  EXPECT_LT((a.outer - b.inner).norm(), 1e-14);
  EXPECT_LT((a.inner - b.outer).norm(), 1e-14);
}

TEST(NullNormals, TimelikeTangentIsRejected) {
  const SeedSurface s = seed_from_expressions(4, {"u0", "0", "0", "u1"}, {{0, 1}, {0, 1}}, QuadratureRule::GaussLegendre, {2, 2});
  const std::vector<double> theta = {0.5, 0.5};
  EXPECT_THROW(null_normals(minkowski(4), s, theta), GeometryError);
}

TEST(SecondFundamentalForm, FlatSphere) {
  const MetricSpec m = minkowski(4);
  const SeedSurface s = coordinate_sphere(0.0, 1.0, 4, 4);
  const std::vector<double> theta = {1.1, 0.3};
  const NullNormals n = null_normals(m, s, theta);
  const SecondFundamentalForm out = second_fundamental_form(m, s, theta, n.outer);
  EXPECT_LT((out.pi - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(out.mean, 2.0, 1e-14);
  EXPECT_NEAR(second_fundamental_form(m, s, theta, n.inner).mean, -2.0, 1e-14);
  EXPECT_THROW(second_fundamental_form(m, s, theta, vec({1, 0, 0, 0})), GeometryError);
}

TEST(SecondFundamentalForm, FlatPlane) {
  const MetricSpec m = minkowski(4);
  const SeedSurface s = seed_from_expressions(4, {"0", "0", "u0", "u1"}, {{-1, 1}, {-1, 1}}, QuadratureRule::GaussLegendre, {2, 2});
  const std::vector<double> theta = {0.2, -0.4};
  const NullNormals n = null_normals(m, s, theta);
  EXPECT_EQ(second_fundamental_form(m, s, theta, n.outer).pi.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ray, MinkowskiStraightLine) {
  const RaySolution r = integrate_ray(ptr(minkowski(4)), Vec::Zero(4), vec({1, 1, 0, 0}), 2.0);
  EXPECT_EQ(r.exit(), RayExit::Reached);
  for (double t : {0.0, 0.37, 1.0, 2.0}) EXPECT_LT((r.position(t) - vec({t, t, 0, 0})).norm(), 1e-12);
}

TEST(Ray, HorizonGeneratorStaysOnHorizon) {
  const RaySolution r = integrate_ray(ptr(schwarzschild_ef(1.0)), vec({0, 2, 1.0, 0.5}), vec({1, 0, 0, 0}), 10.0);
  EXPECT_EQ(r.exit(), RayExit::Reached);
  for (int i = 0; i <= 20; ++i) EXPECT_NEAR(r.position(0.5 * i)(1), 2.0, 1e-8);
}

TEST(Ray, IngoingRayStopsBeforeSingularity) {
  const RaySolution r = integrate_ray(ptr(schwarzschild_ef(1.0)), vec({0, 3, 1.0, 0.5}), vec({0, -1, 0, 0}), 5.0);
  EXPECT_TRUE(r.exit() == RayExit::CurvatureBlowup || r.exit() == RayExit::StepUnderflow) << to_string(r.exit());
  EXPECT_LT(r.t_end(), 3.0);
  const double r_end = r.position(r.t_end())(1);
  EXPECT_GT(r_end, 0.0);
  EXPECT_LT(r_end, 1e-2);
  // r decreases linearly in affine parameter along ingoing radial rays.
  EXPECT_NEAR(r.position(1.5)(1), 1.5, 1e-8);
}

TEST(Ray, RejectsNonNullAndPastDirections) {
  const MetricPtr m = ptr(minkowski(4));
  EXPECT_THROW(integrate_ray(m, Vec::Zero(4), vec({1, 0.5, 0, 0}), 1.0), PreconditionError);
  EXPECT_THROW(integrate_ray(m, Vec::Zero(4), vec({-1, 1, 0, 0}), 1.0), PreconditionError);
}

TEST(Ray, ChartExitIsRecorded) {
  MetricSpec m = minkowski(4);
  m.chart_domain = parse("2 - x1", 4);
  const RaySolution r = integrate_ray(ptr(m), Vec::Zero(4), vec({1, 1, 0, 0}), 5.0);
  EXPECT_EQ(r.exit(), RayExit::ChartExit);
  EXPECT_NEAR(r.t_end(), 2.0, 1e-6);
}

TEST(Congruence, OutgoingFlatCone) {
  const Congruence c = build_congruence(ptr(minkowski(4)), coordinate_sphere(0.0, 1.0, 8, 16), 1.0);
  EXPECT_NEAR(cross_section_measure(c, 0.0), 4 * kPi, 1e-4 * 4 * kPi);
  EXPECT_NEAR(cross_section_measure(c, 1.0), 16 * kPi, 1e-4 * 16 * kPi);
  for (const auto& ray : c.rays()) {
    const RaySolution& r = ray.ray;
    EXPECT_EQ(r.exit(), RayExit::Reached);
    EXPECT_FALSE(r.focal_time());
    for (double t : {0.0, 0.25, 0.6, 1.0}) {
      EXPECT_NEAR(r.det(t), (1 + t) * (1 + t), 1e-9);
      EXPECT_NEAR(r.expansion(t), 2 / (1 + t), 1e-9);
      const Mat e = r.frame(t);
      EXPECT_LT((e.transpose() * e - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
    }
    // y^{1/2} is affine: the flat equality case.
    for (int i = 1; i < 10; ++i) {
      const double t = i / 10.0;
      EXPECT_NEAR(std::sqrt(r.det(t)), 0.5 * (std::sqrt(r.det(t - 0.1)) + std::sqrt(r.det(t + 0.1))), 1e-7);
    }
  }
}

TEST(Congruence, IngoingFlatConeFocuses) {
  CongruenceOptions o;
  o.normal = NormalChoice::Inner;
  const Congruence c = build_congruence(ptr(minkowski(4)), coordinate_sphere(0.0, 1.0, 4, 6), 1.5, o);
  for (const auto& ray : c.rays()) {
    ASSERT_TRUE(ray.ray.focal_time());
    EXPECT_NEAR(*ray.ray.focal_time(), 1.0, 1e-6);
    EXPECT_EQ(ray.ray.exit(), RayExit::Focal);
    EXPECT_NEAR(ray.ray.det(0.5), 0.25, 1e-9);
    EXPECT_FALSE(ray.ray.alive_at(1.2));
  }
  EXPECT_THROW(cross_section_measure(c, 1.2), PreconditionError);
}

TEST(Congruence, HorizonHasConstantArea) {
  const Congruence c = build_congruence(ptr(schwarzschild_ef(1.0)), horizon_sphere(8, 8), 5.0);
  const double a0 = cross_section_measure(c, 0.0);
  EXPECT_NEAR(a0, 16 * kPi, 1e-4 * 16 * kPi);
  for (double t : {1.0, 2.5, 5.0}) EXPECT_NEAR(cross_section_measure(c, t), a0, 1e-6 * a0);
  for (const auto& ray : c.rays()) {
    for (double t : {0.0, 2.0, 5.0}) {
      EXPECT_NEAR(ray.ray.det(t), 1.0, 1e-7);
      EXPECT_NEAR(ray.ray.expansion(t), 0.0, 1e-7);
      // The screen stays tangent to the r = 2 spheres.
      const Mat e = ray.ray.frame(t);
      EXPECT_LT(e.topRows(2).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Congruence, InvariantsHoldOnCurvedBackgrounds) {
  struct Case {
    MetricPtr m;
    SeedSurface s;
    double t_max;
  };
  const std::vector<Case> cases = {
      {ptr(minkowski(4)), coordinate_sphere(0.0, 1.0, 4, 6), 1.0},
      {ptr(schwarzschild_ef(1.0)), seed_from_expressions(4, {"0", "3", "u0", "u1"}, {{0.3, kPi - 0.3}, {0, 2 * kPi}},
                                                         QuadratureRule::GaussLegendre, {4, 4}),
       4.0},
      {ptr(flrw("exp(x0^2)")), coordinate_sphere(0.0, 1.0, 4, 4), 0.8},
  };
  for (const auto& cs : cases) {
    for (NormalChoice nc : {NormalChoice::Outer, NormalChoice::Inner}) {
      CongruenceOptions o;
      o.normal = nc;
      const Congruence c = build_congruence(cs.m, cs.s, cs.t_max, o);
      for (const auto& ray : c.rays()) {
        const RayDiagnostics d = ray_diagnostics(ray.ray);
        EXPECT_LT(d.null_residual, 1e-8) << cs.m->name;
        EXPECT_LT(d.gram_drift, 1e-8) << cs.m->name;
        EXPECT_LT(d.raychaudhuri, 1e-6) << cs.m->name;
        EXPECT_LT(d.asymmetry, 1e-6) << cs.m->name;
        EXPECT_GT(d.trace_cs, -1e-8) << cs.m->name;
        EXPECT_LT(d.log_det, 1e-6) << cs.m->name;
      }
    }
  }
}

TEST(Congruence, ParallelBuildIsDeterministic) {
  CongruenceOptions one, many;
  one.workers = 1;
  many.workers = 4;
  const MetricPtr m = ptr(schwarzschild_ef(1.0));
  const SeedSurface s = seed_from_expressions(4, {"0", "3", "u0", "u1"}, {{0.3, kPi - 0.3}, {0, 2 * kPi}},
                                              QuadratureRule::GaussLegendre, {3, 4});
  const Congruence a = build_congruence(m, s, 2.0, one), b = build_congruence(m, s, 2.0, many);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.ray(i).node, i);
    EXPECT_EQ(a.ray(i).ray.state(1.7), b.ray(i).ray.state(1.7));
  }
}

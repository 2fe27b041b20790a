#include <gtest/gtest.h>

#include <random>

#include "subsonar/targetmodel.hpp"

using namespace subsonar;

TEST(TargetStrength, Sphere) {
  EXPECT_NEAR(sphere_ts(0.051), -31.9, 0.05);
  EXPECT_NEAR(sphere_ts(2.0), 0.0, 1e-12);
  EXPECT_NEAR(sphere_ts(0.1), -26.02, 0.005);
  EXPECT_THROW(sphere_ts(0.0), NumericalError);
}

TEST(TargetStrength, CylinderTableRowsShareOneWavelength) {
  const double a = 0.076;
  const double lam_long = cylinder_wavelength_for_ts(a, 0.610, -5.9);
  const double lam_short = cylinder_wavelength_for_ts(a, 0.305, -11.9);
  EXPECT_NEAR(lam_long, 0.0547, 0.001);
  EXPECT_NEAR(lam_short, 0.0547, 0.001);
  EXPECT_NEAR(cylinder_ts(a, 0.610, 0.0547), -5.9, 0.1);
  EXPECT_NEAR(cylinder_ts(a, 0.305, 0.0547), -11.9, 0.1);
  // a L^2 = 2 lambda gives 0 dB.
  EXPECT_NEAR(cylinder_ts(0.5, 2.0, 1.0), 0.0, 1e-12);
  EXPECT_THROW(cylinder_ts(0.1, 0.0, 0.05), NumericalError);
}

TEST(TargetStrength, Monotonicity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), L = u(rng), lam = 0.1 * u(rng), d = 1e-3;
    EXPECT_LT(sphere_ts(a), sphere_ts(a + d));
    EXPECT_LT(cylinder_ts(a, L, lam), cylinder_ts(a + d, L, lam));
    EXPECT_LT(cylinder_ts(a, L, lam), cylinder_ts(a, L + d, lam));
    EXPECT_GT(cylinder_ts(a, L, lam), cylinder_ts(a, L, lam + d));
  }
}

TEST(Echoes, SphereIsAspectIndependent) {
  TargetSpec t;
  t.kind = TargetKind::sphere;
  t.radius = 0.051;
  t.position = {0, 0, 0.5};
  const double ref = std::pow(10.0, sphere_ts(0.051) / 20.0);
  for (const Vec3& d : {Vec3{0, 0, -1}, Vec3{0.6, 0, -0.8}, Vec3{0, -0.6, -0.8}}) {
    const auto e = target_echoes(t, d, Vec3{0, 0, -1}, 27e3, 1767.0);
    ASSERT_EQ(e.size(), 1u);
    EXPECT_NEAR(e[0].amplitude(), ref, 1e-12);
    EXPECT_EQ(e[0].centre, t.position);
  }
}

TEST(Echoes, PointUsesOverride) {
  TargetSpec t;
  t.kind = TargetKind::point;
  t.fixed_ts_override = -10.0;
  const auto e = target_echoes(t, {0, 0, -1}, {0, 0, -1}, 20e3, 1480.0);
  EXPECT_NEAR(e[0].amplitude(), std::pow(10.0, -0.5), 1e-12);
}

TEST(Echoes, CylinderBroadsideAndEndOn) {
  TargetSpec t;
  t.kind = TargetKind::cylinder;
  t.radius = 0.076;
  t.length = 0.61;
  t.orientation = 0.0;  // axis along x
  t.position = {0, 0, 1.0};
  const double c = 1480.0, f = c / 0.0547;
  const auto broad = target_echoes(t, {0, 0, -1}, {0, 0, -1}, f, c);
  EXPECT_NEAR(broad[0].ts, cylinder_ts(0.076, 0.61, 0.0547), 1e-9);
  // Specular point on the surface facing the sensor.
  EXPECT_NEAR(broad[0].centre.z, 1.0 - 0.076, 1e-12);
  TargetSpec yawed = t;
  yawed.orientation = pi / 2;
  const auto end_on = target_echoes(yawed, {0, 1, 0}, {0, 1, 0}, f, c);
  EXPECT_LE(end_on[0].ts, broad[0].ts - 20.0);
  t.orientation.reset();
  EXPECT_THROW(target_echoes(t, {0, 0, -1}, {0, 0, -1}, f, c), ValidationError);
}

TEST(Echoes, Reciprocity) {
  TargetSpec t;
  t.kind = TargetKind::cylinder;
  t.radius = 0.1;
  t.length = 0.6;
  t.orientation = 0.4;
  t.position = {0.3, -0.2, 0.8};
  Scenario s;
  s.sediment = SedimentProperties::medium_sand();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 tx{u(rng), u(rng), -2.0}, rx{u(rng), u(rng), -2.0};
    const auto a = target_echoes(t, tx, rx, 27e3, s);
    const auto b = target_echoes(t, rx, tx, 27e3, s);
    EXPECT_NEAR(a[0].amplitude(), b[0].amplitude(), 1e-12 * std::max(1.0, a[0].amplitude()));
  }
}

TEST(Echoes, AspectTaper) {
  EXPECT_DOUBLE_EQ(cylinder_aspect_taper(0.61, 100.0, 0.0), 1.0);
  const double k = two_pi / 0.0547;
  EXPECT_LT(20.0 * std::log10(cylinder_aspect_taper(0.61, k, 1.0)), -20.0);
}

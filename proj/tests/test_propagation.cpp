#include <gtest/gtest.h>

#include <random>

#include "subsonar/propagation.hpp"

using namespace subsonar;

namespace {
const WaterProperties kWater{};
const SedimentProperties kSand = SedimentProperties::medium_sand();
const SedimentProperties kSilt = SedimentProperties::very_fine_silt();

double deg(double rad) { return rad * 180.0 / pi; }
}  // namespace

TEST(RefractedPath, VerticalIsStraight) {
  const RayPath r = refracted_path({1.0, 2.0, -2.0}, {1.0, 2.0, 1.0}, 1480.0, 1767.0);
  ASSERT_TRUE(r.crossing);
  EXPECT_NEAR(r.crossing->x, 1.0, 1e-12);
  EXPECT_NEAR(r.crossing->y, 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.incidence, 0.0);
  EXPECT_DOUBLE_EQ(r.refraction, 0.0);
  EXPECT_NEAR(r.travel_time, 2.0 / 1480.0 + 1.0 / 1767.0, 1e-15);
}

TEST(RefractedPath, EqualSpeedsGiveStraightLine) {
  const Vec3 a{0.0, 0.0, -2.0}, b{3.0, 1.0, 1.5};
  const RayPath r = refracted_path(a, b, 1500.0, 1500.0);
  EXPECT_NEAR(r.length(), distance(a, b), 1e-9);
  EXPECT_NEAR(r.travel_time, distance(a, b) / 1500.0, 1e-12);
}

TEST(RefractedPath, SnellAndFermatProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 a{u(rng) * 4 - 2, u(rng) * 4 - 2, -0.1 - 3 * u(rng)};
    const Vec3 b{u(rng) * 4 - 2, u(rng) * 4 - 2, 3 * u(rng)};
    for (auto [cw, cs] : {std::pair{1480.0, 1767.0}, std::pair{1480.0, 1476.0}}) {
      const RayPath r = refracted_path(a, b, cw, cs);
      EXPECT_NEAR(std::sin(r.incidence) / cw, std::sin(r.refraction) / cs, 1e-9);
      EXPECT_NEAR(r.travel_time, r.water_length / cw + r.sediment_length / cs, 1e-15);
      // Fermat: perturbing the crossing lengthens the travel time.
      const Vec3 c = *r.crossing;
      for (double d : {-1e-3, 1e-3}) {
        const Vec3 c2{c.x + d, c.y - d, 0.0};
        EXPECT_GE(distance(a, c2) / cw + distance(c2, b) / cs, r.travel_time - 1e-15);
      }
    }
  }
}

TEST(RefractedPath, RejectsBadEndpoints) {
  EXPECT_THROW(refracted_path({0, 0, 1.0}, {0, 0, 2.0}, 1480, 1767), NumericalError);
  EXPECT_THROW(refracted_path({0, 0, -1.0}, {0, 0, -0.5}, 1480, 1767), NumericalError);
}

TEST(RefractedPath, CriticalAngleSand) {
  EXPECT_NEAR(deg(critical_incidence_angle(1480.0, 1767.0)), 56.9, 0.05);
  EXPECT_DOUBLE_EQ(critical_incidence_angle(1480.0, 1476.0), pi / 2.0);
  // Far-off, shallow point: the refracted ray would need incidence near grazing.
  const RayPath shallow = refracted_path({0, 0, -0.1}, {50.0, 0, 0.01}, 1480, 1767);
  EXPECT_FALSE(shallow.evanescent);
  EXPECT_LT(deg(shallow.incidence), 56.9);
}

TEST(PropagationPath, Dispatch) {
  const RayPath w = propagation_path({0, 0, -2}, {1, 0, -1}, 1480, 1767);
  EXPECT_FALSE(w.crossing);
  EXPECT_NEAR(w.travel_time, std::sqrt(2.0) / 1480, 1e-15);
  const RayPath s = propagation_path({0, 0, 1}, {0, 0, 2}, 1480, 1767);
  EXPECT_NEAR(s.travel_time, 1.0 / 1767, 1e-15);
  const RayPath rev = propagation_path({0.5, 0, 1}, {0, 0, -2}, 1480, 1767);
  const RayPath fwd = propagation_path({0, 0, -2}, {0.5, 0, 1}, 1480, 1767);
  EXPECT_DOUBLE_EQ(rev.travel_time, fwd.travel_time);
}

TEST(Losses, Spreading) {
  EXPECT_DOUBLE_EQ(spreading_loss_db(1.0), 0.0);
  EXPECT_NEAR(spreading_loss_db(10.0), 20.0, 1e-12);
  EXPECT_THROW(spreading_loss_db(0.0), NumericalError);
}

TEST(Losses, SedimentAbsorption) {
  RayPath p;
  p.sediment_length = 1.0;
  EXPECT_NEAR(absorption_db(p, 20e3, kWater, kSand), 10.0, 1e-12);
  p.sediment_length = 2.0;
  EXPECT_NEAR(absorption_db(p, 40e3, kWater, kSand), 40.0, 1e-12);
  WaterProperties lossy = kWater;
  lossy.absorption = 0.01;
  p.water_length = 3.0;
  EXPECT_NEAR(absorption_db(p, 40e3, lossy, kSand), 40.03, 1e-12);
}

TEST(Coefficients, NormalIncidence) {
  EXPECT_NEAR(flat_reflection_coeff(kWater, kSilt, 0.0).real(), 0.067, 0.0015);
  EXPECT_NEAR(flat_reflection_coeff(kWater, kSand, 0.0).real(), 0.375, 0.0015);
  // Independent impedance oracle.
  const double z1 = 1000.0 * 1480.0, z2 = 1845.0 * 1767.0;
  EXPECT_NEAR(flat_reflection_coeff(kWater, kSand, 0.0).real(), (z2 - z1) / (z2 + z1), 1e-12);
}

TEST(Coefficients, IdenticalMedia) {
  SedimentProperties same = kSand;
  same.density = kWater.density;
  same.sound_speed = kWater.sound_speed;
  for (double th : {0.0, 0.3, 1.0}) {
    EXPECT_NEAR(std::abs(flat_reflection_coeff(kWater, same, th)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(transmission_coeff(kWater, same, th) - 1.0), 0.0, 1e-15);
  }
}

TEST(Coefficients, EnergyConservationBelowCritical) {
  for (const auto& sed : {kSand, kSilt}) {
    const double crit = critical_incidence_angle(kWater.sound_speed, sed.sound_speed);
    for (double th = 0.0; th < std::min(crit, 1.5); th += 0.05) {
      const double r2 = std::norm(flat_reflection_coeff(kWater, sed, th));
      EXPECT_NEAR(1.0 - r2, transmitted_power_fraction(kWater, sed, th), 1e-12) << th;
    }
  }
}

TEST(Coefficients, TotalReflectionBeyondCritical) {
  const double th = 1.2;  // > 56.9 deg
  EXPECT_NEAR(std::abs(flat_reflection_coeff(kWater, kSand, th)), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(transmitted_power_fraction(kWater, kSand, th), 0.0);
}

TEST(Coefficients, Eckart) {
  const cplx r{0.375, 0.0};
  EXPECT_EQ(eckart_coherent_coeff(r, 27e3, 0.0, 0.3, 1480.0), r);
  EXPECT_NEAR(std::abs(eckart_coherent_coeff(r, 27e3, 0.01, pi / 2, 1480.0) - r), 0.0, 1e-12);
  const double factor = std::abs(eckart_coherent_coeff(1.0, 27e3, 0.01, 0.0, 1480.0));
  EXPECT_NEAR(factor, 0.072, 0.001);
  const double k = two_pi * 27e3 / 1480.0;
  EXPECT_NEAR(factor, std::exp(-2.0 * std::pow(k * 0.01, 2)), 1e-15);
}

TEST(Directivity, RectangularPiston) {
  const double w = 0.091, c = 1480.0, f = c / 0.0547;  // ~27 kHz
  EXPECT_DOUBLE_EQ(rectangular_piston_directivity(w, w, f, c, {0, 0, 1}), 1.0);
  const double th = std::asin(c / f / w);
  EXPECT_NEAR(deg(th), 36.9, 0.1);
  EXPECT_NEAR(rectangular_piston_directivity(w, w, f, c, {std::sin(th), 0, std::cos(th)}), 0.0, 1e-12);
  EXPECT_NEAR(rectangular_piston_directivity(w, w, 1e-6, c, {0.7, 0.7, 0.14}), 1.0, 1e-9);
  for (double a = 0; a < 1.5; a += 0.1) {
    const double v = rectangular_piston_directivity(w, w, f, c, {std::sin(a), 0, std::cos(a)});
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Directivity, CircularPiston) {
  const double d = 0.1, f = 30e3, c = 1480.0;
  EXPECT_DOUBLE_EQ(circular_piston_directivity(d, f, c, {0, 0, 1}), 1.0);
  // First jinc null at k a sin(theta) = 3.8317.
  const double k = two_pi * f / c;
  const double s = 3.8317059702 / (k * 0.5 * d);
  ASSERT_LT(s, 1.0);
  EXPECT_NEAR(circular_piston_directivity(d, f, c, {s, 0, std::sqrt(1 - s * s)}), 0.0, 1e-6);
  EXPECT_NEAR(circular_piston_directivity(d, 1e-6, c, {1, 0, 0}), 1.0, 1e-9);
}

TEST(ImageSources, MirrorArithmetic) {
  SceneGeometry g;  // depth 2.5, altitude 2
  const auto im = enumerate_image_sources({0, 0, -2.0}, g, 2);
  ASSERT_EQ(im.size(), 5u);
  EXPECT_EQ(im[0].order, 0);
  EXPECT_EQ(im[0].position, (Vec3{0, 0, -2.0}));
  for (const auto& s : im) {
    if (s.order == 1 && s.first_bounce == Boundary::surface) {
      EXPECT_DOUBLE_EQ(s.position.z, -3.0);
      EXPECT_TRUE(s.reaches_seabed());
      EXPECT_EQ(s.boundary_factor(0.5), cplx(-1.0));
    }
    if (s.order == 1 && s.first_bounce == Boundary::bottom) {
      EXPECT_DOUBLE_EQ(s.position.z, 2.0);
      EXPECT_FALSE(s.reaches_seabed());
    }
    if (s.order == 2 && s.first_bounce == Boundary::bottom) {
      EXPECT_DOUBLE_EQ(s.position.z, -7.0);
      EXPECT_EQ(s.boundary_factor(0.5), cplx(-0.5));
      EXPECT_NEAR(s.accumulated_loss_db(0.5), 20.0 * std::log10(2.0), 1e-12);
    }
  }
}

TEST(ImageSources, MultipathApparentDepths) {
  // Extra two-way path of the first and second order returns at nadir,
  // mapped to sediment depth with the sand speed.
  SceneGeometry g;
  const double h = 2.0, cw = 1480.0, cs = 1767.0;
  const auto im = enumerate_image_sources({0, 0, -h}, g, 2);
  double first = 0, second = 0;
  for (const auto& s : im) {
    if (s.order == 1 && s.first_bounce == Boundary::surface) first = std::abs(s.position.z);
    if (s.order == 2 && s.first_bounce == Boundary::bottom) second = std::abs(s.position.z);
  }
  const double extra1 = (first + h) - 2 * h;
  const double extra2 = (second + h) - 2 * h;
  EXPECT_NEAR(extra1, 1.0, 1e-12);
  EXPECT_NEAR(extra2, 5.0, 1e-12);
  EXPECT_NEAR(0.5 * extra1 / cw * cs, 0.60, 0.01);
  EXPECT_GE(0.5 * extra2 / cw * cs, 2.9);
  EXPECT_LE(0.5 * extra2 / cw * cs, 3.0);
}

TEST(Noise, SlopeAndOrdering) {
  EXPECT_NEAR(ambient_noise_psd(20e3, 3) - ambient_noise_psd(40e3, 3), 17.0 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(17.0 * std::log10(2.0), 5.1, 0.05);
  EXPECT_LT(ambient_noise_psd(30e3, 0), ambient_noise_psd(30e3, 3));
  double prev = 1e9;
  for (double f = 10e3; f <= 40e3; f += 1e3) {
    const double v = ambient_noise_psd(f, 2.5);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_THROW(ambient_noise_psd(500.0, 3), NumericalError);
  EXPECT_THROW(ambient_noise_psd(20e3, 7), NumericalError);
}

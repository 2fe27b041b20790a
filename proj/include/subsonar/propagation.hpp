#pragma once

// Geometric acoustics for an isospeed water layer over a fluid sediment:
// two-media Fermat paths, losses, flat/rough interface coefficients, piston
// directivity, method-of-images multipath, and ambient noise.

#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "subsonar/core.hpp"
#include "subsonar/scene.hpp"

namespace subsonar {

inline constexpr double kAttenuationReferenceHz = 20.0e3;

// Sediment attenuation scales linearly with frequency from the 20 kHz value.
inline double sediment_attenuation_db_per_m(const SedimentProperties& s, double f_hz) {
  return s.attenuation_at_ref * f_hz / kAttenuationReferenceHz;
}

// ---------------------------------------------------------------------------
// Refracted paths
// ---------------------------------------------------------------------------

struct RayPath {
  Vec3 start;                    // water-side endpoint
  Vec3 end;                      // sediment-side endpoint (or second water point)
  std::optional<Vec3> crossing;  // interface crossing when the path refracts
  double water_length = 0.0;
  double sediment_length = 0.0;
  double travel_time = 0.0;
  double incidence = 0.0;   // from vertical, in water
  double refraction = 0.0;  // from vertical, in sediment
  double slowness = 0.0;    // horizontal slowness sin(incidence)/c_water, s/m
  bool evanescent = false;

  [[nodiscard]] double length() const { return water_length + sediment_length; }
};

inline double critical_incidence_angle(double c_water, double c_sed) {
  return c_sed > c_water ? std::asin(c_water / c_sed) : pi / 2.0;
}

// Fermat path from a point in water (z < 0) to a point in the sediment
// (z >= 0). The crossing offset is bracketed by bisection and polished by
// Newton on the Snell residual, which is monotone in the offset.
inline RayPath refracted_path(const Vec3& p_water, const Vec3& p_sed, double c_water, double c_sed) {
  if (!(p_water.z < 0.0 && p_sed.z >= 0.0))
    throw NumericalError("refracted_path: endpoints must straddle the interface (z_water < 0 <= z_sed)");
  RayPath r;
  r.start = p_water;
  r.end = p_sed;
  const double h1 = -p_water.z;
  const double h2 = p_sed.z;
  const double dx = p_sed.x - p_water.x;
  const double dy = p_sed.y - p_water.y;
  const double D = std::hypot(dx, dy);

  double s = 0.0;  // horizontal offset of the crossing from p_water
  if (D < 1e-15) {
    s = 0.0;
  } else if (h2 == 0.0) {
    s = D;
  } else {
    auto residual = [&](double x) {
      return x / (c_water * std::hypot(x, h1)) - (D - x) / (c_sed * std::hypot(D - x, h2));
    };
    auto slope = [&](double x) {
      const double a = std::hypot(x, h1), b = std::hypot(D - x, h2);
      return h1 * h1 / (c_water * a * a * a) + h2 * h2 / (c_sed * b * b * b);
    };
    double lo = 0.0, hi = D;
    for (int i = 0; i < 20; ++i) {
      const double mid = 0.5 * (lo + hi);
      (residual(mid) < 0.0 ? lo : hi) = mid;
    }
    s = 0.5 * (lo + hi);
    for (int i = 0; i < 50; ++i) {
      const double f = residual(s);
      if (f < 0.0) lo = s; else hi = s;
      double next = s - f / slope(s);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const double step = std::abs(next - s);
      s = next;
      if (step <= 1e-14 * std::max(1.0, D)) break;
    }
  }

  const double ux = D > 0.0 ? dx / D : 0.0;
  const double uy = D > 0.0 ? dy / D : 0.0;
  const Vec3 crossing{p_water.x + s * ux, p_water.y + s * uy, 0.0};
  r.crossing = crossing;
  r.water_length = std::hypot(s, h1);
  r.sediment_length = std::hypot(D - s, h2);
  r.travel_time = r.water_length / c_water + r.sediment_length / c_sed;
  r.incidence = std::atan2(s, h1);
  r.refraction = std::atan2(D - s, h2);
  r.slowness = r.water_length > 0.0 ? (s / r.water_length) / c_water : 0.0;
  r.evanescent = std::sin(r.incidence) > std::sin(critical_incidence_angle(c_water, c_sed)) + 1e-12;
  return r;
}

// Straight path inside one medium.
inline RayPath straight_path(const Vec3& a, const Vec3& b, double c, bool in_water) {
  RayPath r;
  r.start = a;
  r.end = b;
  const double L = distance(a, b);
  (in_water ? r.water_length : r.sediment_length) = L;
  r.travel_time = L / c;
  const double horiz = (b - a).horizontal_norm();
  const double ang = std::atan2(horiz, std::abs(b.z - a.z));
  (in_water ? r.incidence : r.refraction) = ang;
  r.slowness = L > 0.0 ? (horiz / L) / c : 0.0;
  return r;
}

// Path between any two points in the two-medium half spaces (water z < 0,
// sediment z >= 0). The first point must be in water when media differ.
inline RayPath propagation_path(const Vec3& a, const Vec3& b, double c_water, double c_sed) {
  const bool a_water = a.z < 0.0, b_water = b.z < 0.0;
  if (a_water && b_water) return straight_path(a, b, c_water, true);
  if (!a_water && !b_water) return straight_path(a, b, c_sed, false);
  return a_water ? refracted_path(a, b, c_water, c_sed) : refracted_path(b, a, c_water, c_sed);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline double spreading_loss_db(double r) {
  if (!(r > 0.0)) throw NumericalError("spreading_loss_db: range must be > 0");
  return 20.0 * std::log10(r);
}

inline double absorption_db(const RayPath& path, double f_hz, const WaterProperties& water,
                            const SedimentProperties& sediment) {
  return water.absorption * path.water_length + sediment_attenuation_db_per_m(sediment, f_hz) * path.sediment_length;
}

// ---------------------------------------------------------------------------
// Interface coefficients (two-fluid Rayleigh)
// ---------------------------------------------------------------------------

namespace detail {
// cos of the transmitted angle; imaginary beyond critical (decaying branch).
inline cplx transmitted_cosine(double c1, double c2, double sin1) {
  const double arg = 1.0 - (c2 / c1) * (c2 / c1) * sin1 * sin1;
  return arg >= 0.0 ? cplx(std::sqrt(arg), 0.0) : cplx(0.0, std::sqrt(-arg));
}
}  // namespace detail

// Pressure reflection coefficient for a wave in water incident on the
// sediment; real below the critical angle.
inline cplx flat_reflection_coeff(const WaterProperties& w, const SedimentProperties& s, double incidence) {
  const double cos1 = std::cos(incidence);
  const cplx cos2 = detail::transmitted_cosine(w.sound_speed, s.sound_speed, std::sin(incidence));
  const double z1 = w.density * w.sound_speed, z2 = s.density * s.sound_speed;
  return (z2 * cos1 - z1 * cos2) / (z2 * cos1 + z1 * cos2);
}

// Reflection at the boundary between two sediments (incidence measured in the
// upper one).
inline cplx layer_reflection_coeff(const SedimentProperties& upper, const SedimentProperties& lower,
                                   double incidence) {
  const double cos1 = std::cos(incidence);
  const cplx cos2 = detail::transmitted_cosine(upper.sound_speed, lower.sound_speed, std::sin(incidence));
  const double z1 = upper.density * upper.sound_speed, z2 = lower.density * lower.sound_speed;
  return (z2 * cos1 - z1 * cos2) / (z2 * cos1 + z1 * cos2);
}

enum class Crossing { water_to_sediment, sediment_to_water };

// Pressure transmission coefficient for the ray whose water-side angle from
// vertical is `incidence`. Water->sediment is 1 + R; sediment->water is 1 - R.
inline cplx transmission_coeff(const WaterProperties& w, const SedimentProperties& s, double incidence,
                               Crossing dir = Crossing::water_to_sediment) {
  const cplx r = flat_reflection_coeff(w, s, incidence);
  return dir == Crossing::water_to_sediment ? 1.0 + r : 1.0 - r;
}

// Fraction of incident power carried into the sediment (flux through the
// interface), from the transmission coefficient alone.
inline double transmitted_power_fraction(const WaterProperties& w, const SedimentProperties& s, double incidence) {
  const cplx cos2 = detail::transmitted_cosine(w.sound_speed, s.sound_speed, std::sin(incidence));
  if (cos2.imag() != 0.0) return 0.0;
  const cplx t = transmission_coeff(w, s, incidence);
  const double z1 = w.density * w.sound_speed, z2 = s.density * s.sound_speed;
  return std::norm(t) * (z1 / z2) * cos2.real() / std::cos(incidence);
}

// Coherent reflection from a rough interface: the flat coefficient reduced by
// the Gaussian roughness factor exp(-2 (k h cos(theta))^2).
inline cplx eckart_coherent_coeff(cplx flat_r, double f_hz, double rms_roughness, double incidence, double c_water) {
  const double k = two_pi * f_hz / c_water;
  const double g = k * rms_roughness * std::cos(incidence);
  return flat_r * std::exp(-2.0 * g * g);
}

// ---------------------------------------------------------------------------
// Directivity. `direction` is a unit vector in the world frame; elements face
// along z and the pattern depends only on the transverse components.
// ---------------------------------------------------------------------------

inline double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

inline double rectangular_piston_directivity(double width_x, double width_y, double f_hz, double c,
                                             const Vec3& direction) {
  const double k = two_pi * f_hz / c;
  return std::abs(sinc(0.5 * k * width_x * direction.x) * sinc(0.5 * k * width_y * direction.y));
}

inline double circular_piston_directivity(double diameter, double f_hz, double c, const Vec3& direction) {
  const double k = two_pi * f_hz / c;
  const double x = 0.5 * k * diameter * std::hypot(direction.x, direction.y);
  if (x < 1e-8) return 1.0;
  return std::abs(2.0 * std::cyl_bessel_j(1.0, x) / x);
}

// ---------------------------------------------------------------------------
// Image sources between the air-water surface (z = -D) and the seabed (z = 0).
// ---------------------------------------------------------------------------

enum class Boundary { none, surface, bottom };

struct ImageSource {
  Vec3 position;
  int order = 0;
  int surface_bounces = 0;
  int bottom_bounces = 0;
  Boundary first_bounce = Boundary::none;
  Boundary last_bounce = Boundary::none;
  double surface_factor = -1.0;

  // Product of per-bounce factors for a given seabed coefficient.
  [[nodiscard]] cplx boundary_factor(cplx bottom_coeff) const {
    cplx f = 1.0;
    for (int i = 0; i < surface_bounces; ++i) f *= surface_factor;
    for (int i = 0; i < bottom_bounces; ++i) f *= bottom_coeff;
    return f;
  }
  [[nodiscard]] double accumulated_loss_db(cplx bottom_coeff) const {
    return -20.0 * std::log10(std::abs(boundary_factor(bottom_coeff)));
  }
  // Whether the unfolded path can end on or below the seabed: the last bounce
  // must send the ray downward.
  [[nodiscard]] bool reaches_seabed() const { return order == 0 || last_bounce == Boundary::surface; }
};

inline std::vector<ImageSource> enumerate_image_sources(const Vec3& element, const SceneGeometry& g, int max_order,
                                                        double surface_factor = -1.0) {
  std::vector<ImageSource> out;
  ImageSource direct;
  direct.position = element;
  direct.surface_factor = surface_factor;
  out.push_back(direct);
  const double zs = g.surface_z();
  for (int n = 1; n <= max_order; ++n) {
    for (Boundary first : {Boundary::surface, Boundary::bottom}) {
      ImageSource im;
      im.position = element;
      im.order = n;
      im.first_bounce = first;
      im.surface_factor = surface_factor;
      Boundary b = first;
      for (int k = 0; k < n; ++k) {
        if (b == Boundary::surface) {
          im.position.z = 2.0 * zs - im.position.z;
          ++im.surface_bounces;
        } else {
          im.position.z = -im.position.z;
          ++im.bottom_bounces;
        }
        im.last_bounce = b;
        b = (b == Boundary::surface) ? Boundary::bottom : Boundary::surface;
      }
      out.push_back(im);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ambient noise: deep-water wind-noise spectra, -17 dB/decade above 1 kHz.
// Anchors are the 1 kHz levels (dB re 1 uPa^2/Hz) for sea states 0..6 as read
// from the Knudsen curves; fractional sea states interpolate linearly.
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 7> kNoiseAt1kHz{44.5, 55.0, 61.5, 64.5, 66.5, 68.5, 70.0};
inline constexpr double kNoiseSlopeDbPerDecade = -17.0;

inline double ambient_noise_psd(double f_hz, double sea_state) {
  if (!(f_hz >= 1.0e3 && f_hz <= 100.0e3)) throw NumericalError("ambient_noise_psd: frequency outside [1, 100] kHz");
  if (!(sea_state >= 0.0 && sea_state <= 6.0)) throw NumericalError("ambient_noise_psd: sea state outside [0, 6]");
  const auto lo = static_cast<std::size_t>(std::floor(sea_state));
  const std::size_t hi = std::min<std::size_t>(lo + 1, kNoiseAt1kHz.size() - 1);
  const double frac = sea_state - static_cast<double>(lo);
  const double at_1k = kNoiseAt1kHz[lo] + frac * (kNoiseAt1kHz[hi] - kNoiseAt1kHz[lo]);
  return at_1k + kNoiseSlopeDbPerDecade * std::log10(f_hz / 1.0e3);
}

}  // namespace subsonar

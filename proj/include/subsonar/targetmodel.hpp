#pragma once

// Geometric (ka >> 1) point responses for simple targets.

#include <cmath>
#include <vector>

#include "subsonar/core.hpp"
#include "subsonar/propagation.hpp"
#include "subsonar/scene.hpp"

namespace subsonar {

// Rigid sphere, large ka: TS = 20 log10(a / 2).
inline double sphere_ts(double radius) {
  if (!(radius > 0.0)) throw NumericalError("sphere_ts: radius must be > 0");
  return 20.0 * std::log10(radius / 2.0);
}

// Finite cylinder at broadside: TS = 10 log10(a L^2 / (2 lambda)).
inline double cylinder_ts(double radius, double length, double wavelength) {
  if (!(radius > 0.0 && length > 0.0 && wavelength > 0.0))
    throw NumericalError("cylinder_ts: radius, length and wavelength must be > 0");
  return 10.0 * std::log10(radius * length * length / (2.0 * wavelength));
}

// Wavelength at which a broadside cylinder has the given TS.
inline double cylinder_wavelength_for_ts(double radius, double length, double ts_db) {
  return radius * length * length / (2.0 * std::pow(10.0, ts_db / 10.0));
}

struct TargetEcho {
  Vec3 centre;  // effective scattering centre
  double ts = 0.0;
  TargetKind kind = TargetKind::point;

  // Scattering length, m.
  [[nodiscard]] double amplitude() const { return std::pow(10.0, ts / 20.0); }
};

// Amplitude taper of a cylinder as the bistatic bisector tilts out of the
// broadside plane: sinc^2((k L / 2) sin(tilt)).
inline double cylinder_aspect_taper(double length, double wavenumber, double sin_tilt) {
  const double s = sinc(0.5 * wavenumber * length * sin_tilt);
  return s * s;
}

// `to_tx` / `to_rx` are unit vectors at the target pointing back along the
// incident and scattered rays; `c_medium` is the sound speed around the target.
inline std::vector<TargetEcho> target_echoes(const TargetSpec& t, const Vec3& to_tx, const Vec3& to_rx, double f_hz,
                                             double c_medium) {
  TargetEcho e;
  e.kind = t.kind;
  e.centre = t.position;
  switch (t.kind) {
    case TargetKind::point:
      e.ts = t.fixed_ts_override.value_or(0.0);
      break;
    case TargetKind::sphere:
      e.ts = t.fixed_ts_override.value_or(sphere_ts(t.radius));
      break;
    case TargetKind::cylinder: {
      if (!t.orientation) throw ValidationError("target.orientation", "cylinder orientation is undefined");
      const double lambda = c_medium / f_hz;
      const Vec3 axis{std::cos(*t.orientation), std::sin(*t.orientation), 0.0};
      const Vec3 sum = to_tx.normalized() + to_rx.normalized();
      const Vec3 bisector = sum.norm() > 1e-12 ? sum.normalized() : Vec3{};
      const double along = bisector.dot(axis);
      const Vec3 normal = bisector - axis * along;
      if (normal.norm() > 1e-12) e.centre = t.position + normal.normalized() * t.radius;
      const double broadside = t.fixed_ts_override.value_or(cylinder_ts(t.radius, t.length, lambda));
      const double taper = cylinder_aspect_taper(t.length, two_pi / lambda, std::abs(along));
      e.ts = broadside + (taper > 0.0 ? 20.0 * std::log10(taper) : -400.0);
      break;
    }
  }
  return {e};
}

// Scenario form: resolves the local ray directions at the target (refracted
// when buried) from transmitter and receiver positions.
inline std::vector<TargetEcho> target_echoes(const TargetSpec& t, const Vec3& tx, const Vec3& rx, double f_hz,
                                             const Scenario& s) {
  const double cw = s.water.sound_speed, cs = s.sediment.sound_speed;
  auto back_direction = [&](const Vec3& from) {
    const RayPath p = propagation_path(from, t.position, cw, cs);
    const Vec3 last = (p.crossing && t.position.z >= 0.0) ? *p.crossing : from;
    return (last - t.position).normalized();
  };
  const double c_medium = t.position.z >= 0.0 ? cs : cw;
  return target_echoes(t, back_direction(tx), back_direction(rx), f_hz, c_medium);
}

}  // namespace subsonar

#pragma once

// Point-scatterer environment model. The interface and sediment volume are
// realised as random points; each point's return is a deterministic level
// (sonar-equation factors) times a unit-variance circular Gaussian factor.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "subsonar/core.hpp"
#include "subsonar/propagation.hpp"
#include "subsonar/scene.hpp"

namespace subsonar {

enum class ScattererKind : std::uint8_t { interface = 0, volume = 1 };

struct PointScatterer {
  Vec3 position;
  ScattererKind kind = ScattererKind::interface;
  double patch_measure = 0.0;  // m^2 (interface) or m^3 (volume)
  cplx stochastic_factor{0.0, 0.0};
};

struct Bounds {
  Vec3 lo;
  Vec3 hi;

  [[nodiscard]] double area_xy() const { return std::max(0.0, hi.x - lo.x) * std::max(0.0, hi.y - lo.y); }
  [[nodiscard]] double volume() const { return area_xy() * std::max(0.0, hi.z - lo.z); }
};

struct ScattererField {
  std::vector<PointScatterer> scatterers;
  Bounds extent;
  double interface_density = 0.0;
  double volume_density = 0.0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t count(ScattererKind k) const {
    return static_cast<std::size_t>(std::count_if(scatterers.begin(), scatterers.end(),
                                                  [k](const PointScatterer& p) { return p.kind == k; }));
  }
  [[nodiscard]] double total_measure(ScattererKind k) const {
    double sum = 0.0;
    for (const auto& p : scatterers)
      if (p.kind == k) sum += p.patch_measure;
    return sum;
  }
};

// ---------------------------------------------------------------------------
// Resolution cells: the interface annulus (or sediment shell) swept by one
// range-resolution bin at the sensor altitude.
// ---------------------------------------------------------------------------

inline double interface_resolution_cell(const Scenario& s) {
  const double h = s.geometry.sensor_altitude;
  const double dr = s.water.sound_speed / (2.0 * s.waveform.bandwidth());
  return pi * ((h + dr) * (h + dr) - h * h);
}

inline double volume_resolution_cell(const Scenario& s) {
  const double h = s.geometry.sensor_altitude;
  const double dr = s.sediment.sound_speed / (2.0 * s.waveform.bandwidth());
  return two_pi * h * h * dr;
}

inline void check_scatterer_density(const Scenario& s) {
  const auto& c = s.scatterers;
  if (c.interface_density > 0.0) {
    const double n = c.interface_density * interface_resolution_cell(s);
    if (n < c.min_per_cell)
      throw ValidationError("scatterers.interface_density",
                            "expects " + std::to_string(n) + " scatterers per resolution cell, below min_per_cell");
  }
  if (c.volume_density > 0.0) {
    const double n = c.volume_density * volume_resolution_cell(s);
    if (n < c.min_per_cell)
      throw ValidationError("scatterers.volume_density",
                            "expects " + std::to_string(n) + " scatterers per resolution cell, below min_per_cell");
  }
}

// ---------------------------------------------------------------------------
// Generation. The extent is cut into tiles of `tile_size`; each tile draws a
// Poisson count and uniform positions from its own derived seed, and its
// scatterers split the tile measure equally.
// ---------------------------------------------------------------------------

namespace detail {

struct Tile {
  Bounds box;
  std::uint64_t seed = 0;
};

inline std::vector<double> tile_edges(double lo, double hi, double step) {
  std::vector<double> e;
  if (!(hi > lo)) return e;
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step - 1e-9));
  for (std::size_t i = 0; i <= n; ++i) e.push_back(std::min(hi, lo + static_cast<double>(i) * step));
  e.back() = hi;
  return e;
}

inline void fill_tile(const Tile& t, ScattererKind kind, double density, std::vector<PointScatterer>& out) {
  const double measure = kind == ScattererKind::interface ? t.box.area_xy() : t.box.volume();
  if (!(measure > 0.0) || !(density > 0.0)) return;
  std::mt19937_64 rng(t.seed);
  std::poisson_distribution<long long> count_dist(density * measure);
  const auto n = static_cast<std::size_t>(count_dist(rng));
  if (n == 0) return;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  out.reserve(out.size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    PointScatterer p;
    p.kind = kind;
    p.position.x = t.box.lo.x + u01(rng) * (t.box.hi.x - t.box.lo.x);
    p.position.y = t.box.lo.y + u01(rng) * (t.box.hi.y - t.box.lo.y);
    // Volume depths in (lo, hi]; interface points sit on z = 0.
    p.position.z = kind == ScattererKind::interface ? 0.0 : t.box.hi.z - u01(rng) * (t.box.hi.z - t.box.lo.z);
    p.patch_measure = measure / static_cast<double>(n);
    const double re = gauss(rng);
    const double im = gauss(rng);
    p.stochastic_factor = {re, im};
    out.push_back(p);
  }
}

}  // namespace detail

// `extent` bounds the interface in x/y and the volume in z (z >= 0).
inline ScattererField generate_field(const Scenario& s, const Bounds& extent, std::uint64_t seed,
                                     std::size_t workers = 1) {
  check_scatterer_density(s);
  ScattererField f;
  f.extent = extent;
  f.seed = seed;
  f.interface_density = s.scatterers.interface_density;
  f.volume_density = s.scatterers.volume_density;

  const double step = s.scatterers.tile_size;
  const auto xs = detail::tile_edges(extent.lo.x, extent.hi.x, step);
  const auto ys = detail::tile_edges(extent.lo.y, extent.hi.y, step);
  const double z_lo = std::max(0.0, extent.lo.z);
  const double z_hi = std::min(extent.hi.z, s.scatterers.volume_depth);
  const auto zs = detail::tile_edges(z_lo, z_hi, step);

  struct Job {
    detail::Tile tile;
    ScattererKind kind;
    double density;
  };
  std::vector<Job> jobs;
  std::uint64_t index = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      if (f.interface_density > 0.0 && extent.lo.z <= 0.0 && extent.hi.z >= 0.0) {
        detail::Tile t{{{xs[i], ys[j], 0.0}, {xs[i + 1], ys[j + 1], 0.0}},
                       derive_seed(seed, kStreamInterfaceTiles, index)};
        jobs.push_back({t, ScattererKind::interface, f.interface_density});
      }
      for (std::size_t k = 0; k + 1 < zs.size(); ++k) {
        if (!(f.volume_density > 0.0)) break;
        const std::uint64_t vi = index * 4096 + k;
        detail::Tile t{{{xs[i], ys[j], zs[k]}, {xs[i + 1], ys[j + 1], zs[k + 1]}},
                       derive_seed(seed, kStreamVolumeTiles, vi)};
        jobs.push_back({t, ScattererKind::volume, f.volume_density});
      }
      ++index;
    }

  std::vector<std::vector<PointScatterer>> parts(jobs.size());
  parallel_for(jobs.size(), workers,
               [&](std::size_t i) { detail::fill_tile(jobs[i].tile, jobs[i].kind, jobs[i].density, parts[i]); });
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  f.scatterers.reserve(total);
  for (auto& p : parts) f.scatterers.insert(f.scatterers.end(), p.begin(), p.end());
  return f;
}

// Debug dump: one text line "count seed\n", then per scatterer seven
// little-endian float32 values (x, y, z, kind, measure, re, im).
inline void write_field_dump(const ScattererField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write scatterer dump '" + path + "'");
  out << f.scatterers.size() << ' ' << f.seed << '\n';
  for (const auto& p : f.scatterers) {
    const float rec[7] = {static_cast<float>(p.position.x), static_cast<float>(p.position.y),
                          static_cast<float>(p.position.z), static_cast<float>(p.kind),
                          static_cast<float>(p.patch_measure), static_cast<float>(p.stochastic_factor.real()),
                          static_cast<float>(p.stochastic_factor.imag())};
    out.write(reinterpret_cast<const char*>(rec), sizeof rec);
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Scattering cross sections
// ---------------------------------------------------------------------------

// Power-law roughness spectrum.
inline double roughness_spectrum(const SedimentProperties& s, double K) {
  return s.spectral_strength * std::pow(K, -s.spectral_exponent);
}

// Wavenumber below which the power-law spectrum is held flat: the scale at
// which the spectrum's tail carries the stated RMS interface height.
inline double spectral_cutoff(const SedimentProperties& s, double rms_roughness) {
  if (!(rms_roughness > 0.0)) return 0.0;
  const double g = s.spectral_exponent;
  return std::pow(two_pi * s.spectral_strength / ((g - 2.0) * rms_roughness * rms_roughness), 1.0 / (g - 2.0));
}

// First-order perturbation bistatic cross section per unit area per unit
// solid angle, fluid-fluid interface. `incident` and `scattered` are unit
// propagation directions (incident travelling down onto the interface,
// scattered travelling up away from it).
inline double interface_cross_section_vectors(const SedimentProperties& sed, const WaterProperties& water, double f_hz,
                                              const Vec3& incident, const Vec3& scattered,
                                              double min_wavenumber = 0.0) {
  const double k = two_pi * f_hz / water.sound_speed;
  const double a_rho = sed.density / water.density;
  const double kappa = water.sound_speed / sed.sound_speed;
  const double sin_i = std::min(1.0, std::abs(incident.z));
  const double sin_s = std::min(1.0, std::abs(scattered.z));
  const double cos_i2 = std::max(0.0, 1.0 - sin_i * sin_i);
  const double cos_s2 = std::max(0.0, 1.0 - sin_s * sin_s);
  auto vertical = [kappa](double cos2) {
    const double arg = kappa * kappa - cos2;
    return arg >= 0.0 ? cplx(std::sqrt(arg), 0.0) : cplx(0.0, std::sqrt(-arg));
  };
  const cplx p_i = vertical(cos_i2), p_s = vertical(cos_s2);
  const cplx r_i = (a_rho * sin_i - p_i) / (a_rho * sin_i + p_i);
  const cplx r_s = (a_rho * sin_s - p_s) / (a_rho * sin_s + p_s);
  // Horizontal components; their dot product is cos(th_i) cos(th_s) cos(phi).
  const double hx_i = incident.x, hy_i = incident.y, hx_s = scattered.x, hy_s = scattered.y;
  const double cross_term = hx_i * hx_s + hy_i * hy_s;
  const cplx g = (1.0 + r_i) * (1.0 + r_s) *
                 ((1.0 - 1.0 / a_rho) * (cross_term - p_i * p_s / a_rho) - 1.0 + kappa * kappa / a_rho);
  const double delta = k * std::hypot(hx_s - hx_i, hy_s - hy_i);
  const double K = std::max({delta, min_wavenumber, 1e-9 * k});
  return 0.25 * k * k * k * k * std::norm(g) * roughness_spectrum(sed, K);
}

// Angle form. Grazing angles in (0, pi/2]; bistatic_azimuth = pi is
// backscatter, 0 is the forward direction.
inline double interface_scattering_cross_section(const SedimentProperties& sed, const WaterProperties& water,
                                                 double f_hz, double incident_grazing, double scattered_grazing,
                                                 double bistatic_azimuth, double min_wavenumber = 0.0) {
  const Vec3 inc{std::cos(incident_grazing), 0.0, std::sin(incident_grazing)};
  const Vec3 sca{std::cos(scattered_grazing) * std::cos(bistatic_azimuth),
                 std::cos(scattered_grazing) * std::sin(bistatic_azimuth), -std::sin(scattered_grazing)};
  return interface_cross_section_vectors(sed, water, f_hz, inc, sca, min_wavenumber);
}

inline double volume_cross_section(const SedimentProperties& sed, double cell_volume) {
  if (!(cell_volume > 0.0)) throw NumericalError("volume_cross_section: cell volume must be > 0");
  return std::pow(10.0, sed.volume_scattering_strength / 10.0) * cell_volume;
}

// ---------------------------------------------------------------------------
// Composite level
// ---------------------------------------------------------------------------

// One propagation leg between an element (or its image) and a point at or
// below the seabed, or anywhere in the water.
struct Leg {
  double time = 0.0;
  double length = 0.0;          // unfolded path length (spreading)
  double directivity = 1.0;     // element pattern toward the departure direction
  double absorption_db = 0.0;
  cplx transmission{1.0, 0.0};  // interface crossing (buried endpoints)
  cplx boundary{1.0, 0.0};      // surface / seabed bounces
  Vec3 arrival;                 // unit propagation direction at the endpoint (element -> point)
  double incidence = 0.0;       // water-side angle from vertical
  bool reachable = true;
};

// Element description for directivity.
struct ElementShape {
  enum class Kind { rectangular, circular } kind = Kind::rectangular;
  double width_x = kReceiverPitch;
  double width_y = kReceiverPitch;
  double diameter = 0.10;

  static ElementShape of(const Receiver& r) { return {Kind::rectangular, r.aperture[0], r.aperture[1], 0.0}; }
  static ElementShape of(const Projector& p) { return {Kind::circular, 0.0, 0.0, p.aperture_diameter}; }

  [[nodiscard]] double response(double f_hz, double c, const Vec3& dir) const {
    return kind == Kind::rectangular ? rectangular_piston_directivity(width_x, width_y, f_hz, c, dir)
                                     : circular_piston_directivity(diameter, f_hz, c, dir);
  }
};

struct LegOptions {
  bool unit_transmission = false;
};

// `crossing` selects the transmission coefficient direction: water->sediment
// for transmit legs, sediment->water for receive legs.
inline Leg compute_leg(const ImageSource& image, const ElementShape& shape, const Vec3& point, const Scenario& s,
                       double f_hz, Crossing crossing, const LegOptions& opt = {}) {
  Leg leg;
  const double cw = s.water.sound_speed, cs = s.sediment.sound_speed;
  const RayPath path = propagation_path(image.position, point, cw, cs);
  leg.time = path.travel_time;
  leg.length = path.length();
  leg.incidence = path.incidence;
  leg.reachable = !path.evanescent;
  const Vec3 first_target = (path.crossing && point.z > 0.0) ? *path.crossing : point;
  const Vec3 depart = (first_target - image.position).normalized();
  leg.directivity = shape.response(f_hz, cw, depart);
  const Vec3 from_last = (path.crossing && point.z > 0.0) ? *path.crossing : image.position;
  leg.arrival = (point - from_last).normalized();
  if (point.z <= 0.0 && leg.arrival.norm() == 0.0) leg.arrival = depart;
  leg.absorption_db = absorption_db(path, f_hz, s.water, s.sediment);
  if (point.z > 0.0 && !opt.unit_transmission) leg.transmission = transmission_coeff(s.water, s.sediment, path.incidence, crossing);
  if (image.order > 0) {
    const cplx flat = flat_reflection_coeff(s.water, s.sediment, path.incidence);
    const cplx bottom = eckart_coherent_coeff(flat, f_hz, s.geometry.interface_rms_roughness, path.incidence, cw);
    leg.boundary = image.boundary_factor(bottom);
  }
  return leg;
}

struct CompositeLevel {
  cplx amplitude{0.0, 0.0};
  double delay = 0.0;
  double source = 0.0;
  double tx_directivity = 1.0;
  double rx_directivity = 1.0;
  double scattering = 0.0;  // sqrt(sigma * measure), m
  double spreading = 0.0;   // 1 / (r_tx r_rx)
  double absorption = 1.0;  // two-way amplitude factor
  cplx transmission{1.0, 0.0};
  cplx boundary{1.0, 0.0};
  bool reachable = true;
};

// Scattering amplitude (m) of a point for given arrival directions at it.
inline double scattering_amplitude(const PointScatterer& sc, const Scenario& s, double f_hz, const Vec3& incident,
                                   const Vec3& toward_rx) {
  if (sc.kind == ScattererKind::volume)
    return std::sqrt(volume_cross_section(s.sediment_at(sc.position.z), sc.patch_measure));
  const double cutoff = spectral_cutoff(s.sediment, s.geometry.interface_rms_roughness);
  const double sigma = interface_cross_section_vectors(s.sediment, s.water, f_hz, incident, toward_rx, cutoff);
  return std::sqrt(sigma * sc.patch_measure);
}

inline CompositeLevel combine_legs(const PointScatterer& sc, const Leg& tx, const Leg& rx, const Scenario& s,
                                   double f_hz) {
  CompositeLevel c;
  c.delay = tx.time + rx.time;
  c.reachable = tx.reachable && rx.reachable;
  c.source = db_to_amplitude(s.waveform.source_level);
  c.tx_directivity = tx.directivity;
  c.rx_directivity = rx.directivity;
  // rx.arrival points from the receiver toward the scatterer; the scattered
  // wave travels the other way.
  c.scattering = scattering_amplitude(sc, s, f_hz, tx.arrival, -rx.arrival);
  c.spreading = 1.0 / (tx.length * rx.length);
  c.absorption = db_to_amplitude(-(tx.absorption_db + rx.absorption_db));
  c.transmission = tx.transmission * rx.transmission;
  c.boundary = tx.boundary * rx.boundary;
  if (!c.reachable) return c;
  c.amplitude = c.source * c.tx_directivity * c.rx_directivity * c.scattering * c.spreading * c.absorption *
                c.transmission * c.boundary * sc.stochastic_factor;
  return c;
}

// Direct (order-0) composite level for one transmitter/receiver position pair.
inline CompositeLevel composite_level(const PointScatterer& sc, const Vec3& tx_pos, const ElementShape& tx_shape,
                                      const Vec3& rx_pos, const ElementShape& rx_shape, const Scenario& s,
                                      double f_hz, const LegOptions& opt = {}) {
  ImageSource tx_im, rx_im;
  tx_im.position = tx_pos;
  rx_im.position = rx_pos;
  const Leg tx = compute_leg(tx_im, tx_shape, sc.position, s, f_hz, Crossing::water_to_sediment, opt);
  const Leg rx = compute_leg(rx_im, rx_shape, sc.position, s, f_hz, Crossing::sediment_to_water, opt);
  return combine_legs(sc, tx, rx, s, f_hz);
}

}  // namespace subsonar

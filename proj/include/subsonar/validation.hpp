#pragma once

// Validation experiments: the statistical and geometric consistency checks
// run by `subsonar validate` and by the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "subsonar/beamform.hpp"
#include "subsonar/core.hpp"
#include "subsonar/imageproc.hpp"
#include "subsonar/records.hpp"
#include "subsonar/scatterfield.hpp"
#include "subsonar/scene.hpp"
#include "subsonar/synth.hpp"
#include "subsonar/targetmodel.hpp"

namespace subsonar {

struct Check {
  std::string name;
  double measured = 0.0;
  double lo = 0.0, hi = 0.0;  // pass band (inclusive)
  bool pass = false;
  std::string note;
};

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;
  std::vector<std::pair<std::string, std::string>> values;

  [[nodiscard]] bool passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  void check(const std::string& name, double measured, double lo, double hi, std::string note = {}) {
    checks.push_back({name, measured, lo, hi, measured >= lo && measured <= hi, std::move(note)});
  }
  void value(const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    values.emplace_back(key, buf);
  }
  void value(const std::string& key, const std::string& v) { values.emplace_back(key, v); }

  // Line-oriented key=value text.
  [[nodiscard]] std::string to_text() const {
    std::string out;
    char buf[512];
    for (const auto& [k, v] : values) out += "suite=" + suite + " " + k + "=" + v + "\n";
    for (const auto& c : checks) {
      std::snprintf(buf, sizeof buf, "suite=%s check=%s measured=%.6g lo=%.6g hi=%.6g pass=%d%s%s\n", suite.c_str(),
                    c.name.c_str(), c.measured, c.lo, c.hi, c.pass ? 1 : 0, c.note.empty() ? "" : " note=",
                    c.note.c_str());
      out += buf;
    }
    out += "suite=" + suite + " result=" + (passed() ? "pass" : "fail") + "\n";
    return out;
  }
};

struct ValidationOptions {
  std::size_t seeds = 0;  // 0: suite default
  std::size_t workers = 1;
  std::uint64_t base_seed = 1;
};

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

// Scene of the buried-cylinder study: 2 m altitude, 2.5 m water, 1 cm RMS
// roughness. Scatterer densities are reduced for desk-scale runs; results are
// density invariant as long as each resolution cell holds several points.
inline Scenario desk_scenario(const SedimentProperties& sediment, std::size_t pings) {
  Scenario s;
  s.sediment = sediment;
  s.geometry.water_depth = 2.5;
  s.geometry.sensor_altitude = 2.0;
  s.geometry.interface_rms_roughness = 0.01;
  s.track.ping_count = pings;
  s.track.tx_schedule = TxSchedule::round_robin;
  s.scatterers.interface_density = 25.0;
  s.scatterers.volume_density = 20.0;
  s.scatterers.min_per_cell = 5.0;
  s.synthesis.gate_guard = 1.0e-3;
  return s;
}

inline double track_centre_x(const Scenario& s) {
  return 0.5 * static_cast<double>(s.track.ping_count - 1) * s.track.along_track_advance;
}

inline std::vector<PingRecord> simulate_compressed(const Scenario& s, std::size_t workers,
                                                   SynthesisParts parts = {}) {
  std::vector<PingRecord> out;
  const Waveform w = make_waveform(s.waveform);
  simulate_survey(
      s, [&](PingRecord&& r) { out.push_back(matched_filter(r, w)); }, workers, parts);
  return out;
}

inline VoxelVolume image_scenario(const Scenario& s, std::size_t workers, RayMode mode = RayMode::refracted,
                                  SynthesisParts parts = {}) {
  const auto pings = simulate_compressed(s, workers, parts);
  BackprojectOptions opt;
  opt.rays = mode;
  opt.workers = workers;
  return backproject(pings, make_grid(s.image), s, opt);
}

// Mean intensity per z plane, dB.
inline std::vector<double> depth_profile_db(const VoxelVolume& v) {
  const auto& d = v.grid.dims;
  std::vector<double> p(d[2], 0.0);
  for (std::size_t i = 0; i < d[0]; ++i)
    for (std::size_t j = 0; j < d[1]; ++j)
      for (std::size_t k = 0; k < d[2]; ++k) p[k] += std::norm(v.at(i, j, k));
  for (auto& x : p) x = 10.0 * std::log10(std::max(x / static_cast<double>(d[0] * d[1]), 1e-300));
  return p;
}

struct Ridge {
  double depth = 0.0;
  double prominence_db = 0.0;
  bool local_max = false;
};

// Strongest plane within [lo, hi] and its prominence over the higher of the
// two flanking minima within `flank` metres.
inline Ridge find_ridge(const std::vector<double>& profile, const VoxelGrid& g, double lo, double hi, double flank) {
  const double dz = g.spacing[2];
  std::size_t best = profile.size();
  for (std::size_t k = 0; k < profile.size(); ++k) {
    const double z = g.coordinate(2, k);
    if (z < lo - 1e-9 || z > hi + 1e-9) continue;
    if (best == profile.size() || profile[k] > profile[best]) best = k;
  }
  Ridge r;
  if (best == profile.size()) return r;
  r.depth = g.coordinate(2, best);
  const auto reach = static_cast<std::size_t>(std::llround(flank / dz));
  double left = profile[best], right = profile[best];
  for (std::size_t k = best; k-- > 0 && best - k <= reach;) left = std::min(left, profile[k]);
  for (std::size_t k = best + 1; k < profile.size() && k - best <= reach; ++k) right = std::min(right, profile[k]);
  r.prominence_db = profile[best] - std::max(left, right);
  r.local_max = (best == 0 || profile[best] >= profile[best - 1]) &&
                (best + 1 == profile.size() || profile[best] >= profile[best + 1]);
  return r;
}

// ---------------------------------------------------------------------------
// Target strength table
// ---------------------------------------------------------------------------

inline SuiteReport suite_target_strength(const ValidationOptions& = {}) {
  SuiteReport r;
  r.suite = "target_strength";
  const double a_cyl = 0.076;
  const double lam_long = cylinder_wavelength_for_ts(a_cyl, 0.610, -5.9);
  const double lam_short = cylinder_wavelength_for_ts(a_cyl, 0.305, -11.9);
  const double lam = 0.5 * (lam_long + lam_short);
  r.value("wavelength_long_row_m", lam_long);
  r.value("wavelength_short_row_m", lam_short);
  r.value("shared_wavelength_m", lam);
  r.value("implied_frequency_hz", 1500.0 / lam);
  r.check("sphere_ts_r0.051", sphere_ts(0.051), -32.0, -31.8);
  r.check("sphere_ts_r2", sphere_ts(2.0), -1e-9, 1e-9);
  r.check("shared_wavelength", lam, 0.0540, 0.0555);
  r.check("cylinder_ts_long", cylinder_ts(a_cyl, 0.610, lam), -6.0, -5.8);
  r.check("cylinder_ts_short", cylinder_ts(a_cyl, 0.305, lam), -12.0, -11.8);
  const double end_on = 20.0 * std::log10(std::max(cylinder_aspect_taper(0.61, two_pi / 0.0547, 1.0), 1e-20));
  r.check("cylinder_end_on_drop_db", end_on, -400.0, -20.0);
  return r;
}

// ---------------------------------------------------------------------------
// Multipath geometry
// ---------------------------------------------------------------------------

// Apparent sediment depth at nadir of a multipath arrival whose transmit leg
// comes from `tx_image` and receive leg from `rx_image` (vertical geometry).
inline double multipath_apparent_depth(const Scenario& s, const ImageSource& tx_image, const ImageSource& rx_image) {
  const double h = s.geometry.sensor_altitude;
  const double delay = (std::abs(tx_image.position.z) + std::abs(rx_image.position.z)) / s.water.sound_speed;
  return (0.5 * delay - h / s.water.sound_speed) * s.sediment.sound_speed;
}

inline Scenario multipath_desk_scenario() {
  Scenario s = desk_scenario(SedimentProperties::medium_sand(), 11);
  s.image = {0.0, 0.9, -0.5, 0.5, 0.0, 3.3, 0.02};
  return s;
}

inline SuiteReport suite_multipath_geometry(const ValidationOptions& opt = {}) {
  SuiteReport r;
  r.suite = "multipath_geometry";
  Scenario s = multipath_desk_scenario();
  s.rng_seed = opt.base_seed;

  // Ray oracle at nadir.
  const auto images = enumerate_image_sources({0.0, 0.0, s.geometry.sensor_z()}, s.geometry, 2);
  auto find = [&](int order, Boundary first) {
    for (const auto& im : images)
      if (im.order == order && (order == 0 || im.first_bounce == first)) return im;
    throw NumericalError("image not found");
  };
  const ImageSource direct = find(0, Boundary::none);
  const ImageSource surf = find(1, Boundary::surface);
  const ImageSource bs = find(2, Boundary::bottom);
  r.value("oracle_depth_direct_surface_m", multipath_apparent_depth(s, direct, surf));
  r.value("oracle_depth_surface_surface_m", multipath_apparent_depth(s, surf, surf));
  r.value("oracle_depth_direct_bottom_surface_m", multipath_apparent_depth(s, direct, bs));

  // Flat-bottom simulation.
  const VoxelVolume v = image_scenario(s, opt.workers);
  const auto profile = depth_profile_db(v);
  for (std::size_t k = 0; k < profile.size(); k += 5) {
    char key[48];
    std::snprintf(key, sizeof key, "profile_db_z%.2f", v.grid.coordinate(2, k));
    r.value(key, profile[k]);
  }
  const Ridge first = find_ridge(profile, v.grid, 0.4, 0.8, 0.3);
  const Ridge second = find_ridge(profile, v.grid, 2.7, 3.2, 0.3);
  r.value("first_ridge_prominence_db", first.prominence_db);
  r.value("second_ridge_prominence_db", second.prominence_db);
  r.check("first_order_ridge_depth", first.depth, 0.50, 0.70);
  r.check("second_order_ridge_depth", second.depth, 2.9, 3.1);
  r.check("first_order_ridge_prominence_db", first.local_max ? first.prominence_db : 0.0, 3.0, 1e9);
  r.check("second_order_ridge_prominence_db", second.local_max ? second.prominence_db : 0.0, 3.0, 1e9);
  return r;
}

// ---------------------------------------------------------------------------
// Point spread
// ---------------------------------------------------------------------------

struct PeakReport {
  std::array<std::size_t, 3> index{};
  Vec3 position;
  double pslr_db = 0.0;  // peak over highest sidelobe in the neighbourhood
};

// Peak and peak-to-sidelobe ratio within a cube of +-`radius` voxels. The
// main lobe is the ellipsoid reaching the first minimum along each axis.
inline PeakReport analyse_peak(const VoxelVolume& v, std::size_t radius = 10) {
  PeakReport p;
  const auto& g = v.grid;
  p.index = g.unravel(v.argmax_intensity());
  p.position = g.position(p.index[0], p.index[1], p.index[2]);
  const double peak = std::norm(v.values[v.argmax_intensity()]);
  std::array<double, 3> half{};
  for (int a = 0; a < 3; ++a) {
    double extent = 0.0;
    for (int dir : {-1, 1}) {
      auto idx = p.index;
      double prev = peak;
      std::size_t steps = 0;
      while (true) {
        auto& c = idx[static_cast<std::size_t>(a)];
        if ((dir < 0 && c == 0) || (dir > 0 && c + 1 >= g.dims[static_cast<std::size_t>(a)])) break;
        c = static_cast<std::size_t>(static_cast<long long>(c) + dir);
        const double cur = std::norm(v.values[g.index(idx[0], idx[1], idx[2])]);
        if (cur > prev) break;
        prev = cur;
        ++steps;
      }
      extent = std::max(extent, static_cast<double>(steps));
    }
    half[static_cast<std::size_t>(a)] = std::max(extent, 1.0);
  }
  double side = 0.0;
  const auto lo = [&](std::size_t c) { return c >= radius ? c - radius : 0; };
  for (std::size_t i = lo(p.index[0]); i <= std::min(g.dims[0] - 1, p.index[0] + radius); ++i)
    for (std::size_t j = lo(p.index[1]); j <= std::min(g.dims[1] - 1, p.index[1] + radius); ++j)
      for (std::size_t k = lo(p.index[2]); k <= std::min(g.dims[2] - 1, p.index[2] + radius); ++k) {
        const double di = (static_cast<double>(i) - static_cast<double>(p.index[0])) / half[0];
        const double dj = (static_cast<double>(j) - static_cast<double>(p.index[1])) / half[1];
        const double dk = (static_cast<double>(k) - static_cast<double>(p.index[2])) / half[2];
        if (di * di + dj * dj + dk * dk <= 1.0) continue;
        side = std::max(side, std::norm(v.values[g.index(i, j, k)]));
      }
  p.pslr_db = side > 0.0 ? 10.0 * std::log10(peak / side) : 300.0;
  return p;
}

inline Scenario point_target_scenario(const SedimentProperties& sediment, const Vec3& target_offset,
                                      std::size_t pings = 11) {
  Scenario s = desk_scenario(sediment, pings);
  s.scatterers.interface_density = 0.0;
  s.scatterers.volume_density = 0.0;
  s.noise.enabled = false;
  s.propagation.multipath_order = 0;
  s.propagation.coherent_reflection = false;
  TargetSpec t;
  t.kind = TargetKind::point;
  t.fixed_ts_override = 0.0;
  t.position = {track_centre_x(s) + target_offset.x, target_offset.y, target_offset.z};
  s.targets.push_back(t);
  const double sp = 0.02;
  // Grid nodes fall on the target position.
  const Vec3 c = t.position;
  s.image = {c.x - 15 * sp, c.x + 15 * sp, c.y - 15 * sp, c.y + 15 * sp, c.z - 10 * sp, c.z + 10 * sp, sp};
  return s;
}

inline std::array<long long, 3> index_error(const VoxelGrid& g, const std::array<std::size_t, 3>& idx,
                                            const Vec3& truth) {
  std::array<long long, 3> e{};
  const std::array<double, 3> t{truth.x, truth.y, truth.z};
  for (int a = 0; a < 3; ++a) {
    const double o = a == 0 ? g.origin.x : a == 1 ? g.origin.y : g.origin.z;
    const auto ti = std::llround((t[static_cast<std::size_t>(a)] - o) / g.spacing[static_cast<std::size_t>(a)]);
    e[static_cast<std::size_t>(a)] = static_cast<long long>(idx[static_cast<std::size_t>(a)]) - ti;
  }
  return e;
}

inline long long max_abs(const std::array<long long, 3>& e) {
  return std::max({std::llabs(e[0]), std::llabs(e[1]), std::llabs(e[2])});
}

inline SuiteReport suite_psf(const ValidationOptions& opt = {}) {
  SuiteReport r;
  r.suite = "psf";
  {
    const Scenario s = point_target_scenario(SedimentProperties::medium_sand(), {0.0, 0.06, -0.6});
    const VoxelVolume v = image_scenario(s, opt.workers);
    const PeakReport p = analyse_peak(v);
    const auto err = index_error(v.grid, p.index, s.targets[0].position);
    r.value("water_peak_x", p.position.x);
    r.value("water_peak_y", p.position.y);
    r.value("water_peak_z", p.position.z);
    r.check("water_point_index_error", static_cast<double>(max_abs(err)), 0.0, 1.0);
    r.check("water_point_pslr_db", p.pslr_db, 12.0, 1e9);
  }
  {
    Scenario s = point_target_scenario(SedimentProperties::medium_sand(), {0.0, 0.0, 1.0});
    s.image.z_min = 0.6;
    s.image.z_max = 1.2;
    const auto pings = simulate_compressed(s, opt.workers);
    const VoxelGrid g = make_grid(s.image);
    BackprojectOptions bo;
    bo.workers = opt.workers;
    const VoxelVolume refr = backproject(pings, g, s, bo);
    bo.rays = RayMode::straight;
    const VoxelVolume straight = backproject(pings, g, s, bo);
    const PeakReport pr = analyse_peak(refr);
    const PeakReport ps = analyse_peak(straight);
    r.value("buried_refracted_peak_z", pr.position.z);
    r.value("buried_straight_peak_z", ps.position.z);
    r.value("buried_straight_shift_m", ps.position.z - s.targets[0].position.z);
    const auto err = index_error(g, pr.index, s.targets[0].position);
    const auto err_s = index_error(g, ps.index, s.targets[0].position);
    r.check("buried_refracted_index_error", static_cast<double>(max_abs(err)), 0.0, 1.0);
    r.check("buried_straight_displacement_voxels", static_cast<double>(max_abs(err_s)), 2.0, 1e9);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sonar-equation consistency
// ---------------------------------------------------------------------------

inline Scenario sonar_equation_scenario() {
  Scenario s;
  s.sediment = SedimentProperties::very_fine_silt();
  s.array.layout = "single";
  s.track.ping_count = 1;
  s.noise.enabled = false;
  s.propagation.multipath_order = 0;
  s.propagation.coherent_reflection = false;
  // The interface cross section peaks sharply at normal incidence (a lobe a
  // few cm wide at 2 m altitude); the density must resolve it or the
  // ensemble mean converges far too slowly.
  s.scatterers.interface_density = 8000.0;
  s.scatterers.volume_density = 50.0;
  s.scatterers.volume_depth = 1.0;
  s.scatterers.min_per_cell = 5.0;
  s.synthesis.gate_guard = 0.5e-3;
  s.image = {-1.0, 1.0, -1.0, 1.0, 0.0, 0.5, 0.05};
  return s;
}

// Expected mean-square record E[p^2](t_n) = 1/2 sum over quadrature cells of
// |composite amplitude|^2 env^2(t_n - tau), using the same factor chain and
// delay gate as the synthesiser.
inline std::vector<double> predicted_mean_square(const Scenario& s, double interface_cell, double volume_cell) {
  const SynthesisTiming timing = synthesis_timing(s);
  const Bounds ext = survey_field_extent(s, timing);
  const auto array = s.array_geometry();
  const auto ev = ping_poses(s).front();
  const Vec3 tx = element_position(ev.pose, array.projectors.at(static_cast<std::size_t>(ev.tx_id)).offset);
  const Vec3 rx = element_position(ev.pose, array.receivers.front().offset);
  const ElementShape txs = ElementShape::of(array.projectors.at(static_cast<std::size_t>(ev.tx_id)));
  const ElementShape rxs = ElementShape::of(array.receivers.front());
  const double f0 = s.waveform.centre_frequency();
  const double fs = s.waveform.sample_rate;
  const double T = s.waveform.duration;
  std::vector<double> ms(timing.samples, 0.0);

  auto deposit = [&](const PointScatterer& sc) {
    const CompositeLevel c = composite_level(sc, tx, txs, rx, rxs, s, f0);
    if (!c.reachable || !timing.gate.contains(c.delay)) return;
    const double a2 = std::norm(c.amplitude);
    const double first = (c.delay - timing.record.lo) * fs;
    const auto n0 = static_cast<std::size_t>(std::max(0.0, std::ceil(first)));
    for (std::size_t n = n0; n < ms.size(); ++n) {
      const double u = (static_cast<double>(n) - first) / fs / T;
      if (u > 1.0) break;
      const double e = tukey(u, s.waveform.taper);
      ms[n] += 0.5 * a2 * e * e;
    }
  };

  const auto nx = static_cast<std::size_t>(std::ceil((ext.hi.x - ext.lo.x) / interface_cell));
  const auto ny = static_cast<std::size_t>(std::ceil((ext.hi.y - ext.lo.y) / interface_cell));
  const double dx = (ext.hi.x - ext.lo.x) / static_cast<double>(nx);
  const double dy = (ext.hi.y - ext.lo.y) / static_cast<double>(ny);
  if (s.scatterers.interface_density > 0.0) {
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        PointScatterer sc;
        sc.kind = ScattererKind::interface;
        sc.position = {ext.lo.x + (static_cast<double>(i) + 0.5) * dx, ext.lo.y + (static_cast<double>(j) + 0.5) * dy,
                       0.0};
        sc.patch_measure = dx * dy;
        sc.stochastic_factor = 1.0;
        deposit(sc);
      }
  }
  if (s.scatterers.volume_density > 0.0) {
    const double depth = std::min(ext.hi.z, s.scatterers.volume_depth);
    const auto vx = static_cast<std::size_t>(std::ceil((ext.hi.x - ext.lo.x) / volume_cell));
    const auto vy = static_cast<std::size_t>(std::ceil((ext.hi.y - ext.lo.y) / volume_cell));
    const auto vz = static_cast<std::size_t>(std::ceil(depth / volume_cell));
    const double ddx = (ext.hi.x - ext.lo.x) / static_cast<double>(vx);
    const double ddy = (ext.hi.y - ext.lo.y) / static_cast<double>(vy);
    const double ddz = depth / static_cast<double>(vz);
    for (std::size_t i = 0; i < vx; ++i)
      for (std::size_t j = 0; j < vy; ++j)
        for (std::size_t k = 0; k < vz; ++k) {
          PointScatterer sc;
          sc.kind = ScattererKind::volume;
          sc.position = {ext.lo.x + (static_cast<double>(i) + 0.5) * ddx,
                         ext.lo.y + (static_cast<double>(j) + 0.5) * ddy, (static_cast<double>(k) + 0.5) * ddz};
          sc.patch_measure = ddx * ddy * ddz;
          sc.stochastic_factor = 1.0;
          deposit(sc);
        }
  }
  return ms;
}

inline SuiteReport suite_sonar_equation(const ValidationOptions& opt = {}) {
  SuiteReport r;
  r.suite = "sonar_equation";
  const std::size_t seeds = opt.seeds ? opt.seeds : 200;
  Scenario s = sonar_equation_scenario();
  const SynthesisTiming timing = synthesis_timing(s);
  std::vector<double> sum(timing.samples, 0.0);
  const auto ev = ping_poses(s).front();
  std::vector<std::vector<double>> per(seeds);
  parallel_for(seeds, opt.workers, [&](std::size_t k) {
    Scenario sk = s;
    sk.rng_seed = derive_seed(opt.base_seed, kStreamEnsemble, k);
    const Survey v = prepare_survey(sk);
    const PingRecord rec = PingSynthesizer(sk, v.field).synthesize(ev);
    per[k].resize(rec.sample_count);
    for (std::size_t n = 0; n < rec.sample_count; ++n) {
      const double p = rec.real_at(0, n);
      per[k][n] = p * p;
    }
  });
  for (const auto& p : per)
    for (std::size_t n = 0; n < sum.size(); ++n) sum[n] += p[n] / static_cast<double>(seeds);
  const auto pred = predicted_mean_square(s, 0.005, 0.04);

  // Compare 0.5 ms block averages over the central 80% of the span from the
  // first arrival to the end of the record.
  const double fs = s.waveform.sample_rate;
  const double t_first = 2.0 * s.geometry.sensor_altitude / s.water.sound_speed;
  const double t_end = timing.record.hi;
  const double span = t_end - t_first;
  const auto n_a = static_cast<std::size_t>((t_first + 0.1 * span - timing.record.lo) * fs);
  const auto n_b = std::min(sum.size(), static_cast<std::size_t>((t_end - 0.1 * span - timing.record.lo) * fs));
  const auto block = static_cast<std::size_t>(0.5e-3 * fs);
  double worst = 0.0, mean_diff = 0.0;
  std::size_t blocks = 0;
  for (std::size_t a = n_a; a + block <= n_b; a += block) {
    double ms = 0.0, pr = 0.0;
    for (std::size_t n = a; n < a + block; ++n) {
      ms += sum[n];
      pr += pred[n];
    }
    const double d = 10.0 * std::log10(ms / pr);
    worst = std::max(worst, std::abs(d));
    mean_diff += d;
    ++blocks;
  }
  mean_diff /= static_cast<double>(std::max<std::size_t>(blocks, 1));
  r.value("seeds", static_cast<double>(seeds));
  r.value("blocks", static_cast<double>(blocks));
  r.value("mean_difference_db", mean_diff);
  r.check("max_block_difference_db", worst, 0.0, 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// Spatial coherence (van Cittert-Zernike)
// ---------------------------------------------------------------------------

inline Scenario vcz_scenario() {
  Scenario s;
  s.sediment = SedimentProperties::very_fine_silt();
  s.track.ping_count = 1;
  s.track.tx_schedule = TxSchedule::all_tx_per_location;
  s.noise.enabled = false;
  s.propagation.multipath_order = 0;
  s.propagation.coherent_reflection = false;
  s.scatterers.interface_density = 100.0;
  s.scatterers.volume_density = 0.0;
  s.scatterers.min_per_cell = 5.0;
  s.waveform.f_start = 24.0e3;
  s.waveform.f_stop = 26.0e3;
  s.array.projector_aperture_diameter = 0.3;
  s.synthesis.gate_guard = 1.0e-3;
  s.image = {-1.5, 1.5, -1.5, 1.5, 0.0, 0.02, 0.02};
  return s;
}

inline constexpr int kVczTransmitter = 2;
inline constexpr std::size_t kVczMaxSeparation = 8;

struct CoherenceWindow {
  double lo = 0.0, hi = 0.0;
};

inline CoherenceWindow vcz_window(const Scenario& s) {
  const double t0 = 2.0 * s.geometry.sensor_altitude / s.water.sound_speed;
  return {t0 - 0.25e-3, t0 + 1.0e-3};
}

// Receiver pairs in the same along-track row, grouped by cross-track
// separation in elements.
inline std::vector<std::vector<std::pair<std::size_t, std::size_t>>> vcz_pairs(const ArrayGeometry& array) {
  std::map<long long, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < array.receivers.size(); ++i)
    rows[std::llround(array.receivers[i].offset.x / kReceiverPitch)].push_back(i);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pairs(kVczMaxSeparation + 1);
  for (auto& [row, idx] : rows) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return array.receivers[a].offset.y < array.receivers[b].offset.y;
    });
    for (std::size_t d = 0; d <= kVczMaxSeparation; ++d)
      for (std::size_t c = 0; c + d < idx.size(); ++c) pairs[d].emplace_back(idx[c], idx[c + d]);
  }
  return pairs;
}

// Second-order moments accumulated per receiver pair.
struct PairMoments {
  std::vector<std::vector<cplx>> cross;
  std::vector<std::vector<double>> pa, pb;

  explicit PairMoments(const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& pairs) {
    for (const auto& p : pairs) {
      cross.emplace_back(p.size(), cplx{});
      pa.emplace_back(p.size(), 0.0);
      pb.emplace_back(p.size(), 0.0);
    }
  }
  void add(const PairMoments& o) {
    for (std::size_t d = 0; d < cross.size(); ++d)
      for (std::size_t k = 0; k < cross[d].size(); ++k) {
        cross[d][k] += o.cross[d][k];
        pa[d][k] += o.pa[d][k];
        pb[d][k] += o.pb[d][k];
      }
  }
  // Mean over pairs of the per-pair coherence magnitude.
  [[nodiscard]] std::vector<double> coherence() const {
    std::vector<double> out(cross.size(), 0.0);
    for (std::size_t d = 0; d < cross.size(); ++d) {
      for (std::size_t k = 0; k < cross[d].size(); ++k) {
        const double den = std::sqrt(pa[d][k] * pb[d][k]);
        out[d] += den > 0.0 ? std::abs(cross[d][k]) / den : 0.0;
      }
      if (!cross[d].empty()) out[d] /= static_cast<double>(cross[d].size());
    }
    return out;
  }
};

// Predicted pair coherence: the ensonified footprint intensity, discretised
// on `cell` x `cell` patches, transformed with the exact element-to-patch
// phase kernel (near-field form). Each patch is weighted by the part of its
// compressed echo envelope that falls in the window.
inline std::vector<double> predicted_coherence(const Scenario& s, double cell) {
  const auto array = s.array_geometry();
  const auto pairs = vcz_pairs(array);
  const auto ev = ping_poses(s).at(static_cast<std::size_t>(kVczTransmitter));
  const Vec3 tx = element_position(ev.pose, array.projectors.at(kVczTransmitter).offset);
  const ElementShape txs = ElementShape::of(array.projectors.at(kVczTransmitter));
  const Waveform w = make_waveform(s.waveform);
  const double fs = s.waveform.sample_rate;
  const double f0 = s.waveform.centre_frequency();
  const double w0 = two_pi * f0;

  // Baseband autocorrelation envelope g of the analytic pulse, by lag in samples.
  const std::size_t n = w.size();
  const std::size_t nfft = fft_good_size(2 * n);
  AlignedBuffer buf(nfft);
  std::fill(buf.data(), buf.data() + nfft, cplx{});
  for (std::size_t i = 0; i < n; ++i) buf[i] = w.analytic[i];
  fft_forward(buf);
  for (std::size_t i = 0; i < nfft; ++i) buf[i] = std::norm(buf[i]);
  fft_inverse(buf);
  std::vector<cplx> g(2 * n + 1);
  for (long long lag = -static_cast<long long>(n); lag <= static_cast<long long>(n); ++lag) {
    const std::size_t idx = static_cast<std::size_t>((lag + static_cast<long long>(nfft)) % static_cast<long long>(nfft));
    g[static_cast<std::size_t>(lag + static_cast<long long>(n))] =
        buf[idx] * std::polar(1.0, -w0 * static_cast<double>(lag) / fs);
  }
  auto g_at = [&](double lag) -> cplx {
    const double u = lag + static_cast<double>(n);
    if (u < 0.0 || u >= static_cast<double>(2 * n)) return {};
    const auto i = static_cast<std::size_t>(u);
    const double a = u - static_cast<double>(i);
    return (1.0 - a) * g[i] + a * g[i + 1];
  };
  const CoherenceWindow win = vcz_window(s);
  const auto n_lo = static_cast<long long>(std::ceil(win.lo * fs));
  const auto n_hi = static_cast<long long>(std::floor(win.hi * fs));

  const SynthesisTiming timing = synthesis_timing(s);
  const Bounds ext = survey_field_extent(s, timing);
  const std::size_t nrx = array.receivers.size();
  std::vector<Vec3> rx(nrx);
  std::vector<ElementShape> rxs;
  for (std::size_t i = 0; i < nrx; ++i) {
    rx[i] = element_position(ev.pose, array.receivers[i].offset);
    rxs.push_back(ElementShape::of(array.receivers[i]));
  }
  // Overlap of two envelopes offset by `lag` samples, normalised to zero lag.
  std::vector<cplx> overlap(4 * n + 1);
  for (std::size_t L = 0; L < overlap.size(); ++L) {
    const long long lag = static_cast<long long>(L) - 2 * static_cast<long long>(n);
    cplx acc{};
    for (long long k = 0; k < static_cast<long long>(g.size()); ++k) {
      const long long j = k + lag;
      if (j >= 0 && j < static_cast<long long>(g.size())) acc += g[static_cast<std::size_t>(k)] * std::conj(g[static_cast<std::size_t>(j)]);
    }
    overlap[L] = acc;
  }
  const double o0 = std::abs(overlap[2 * n]);
  auto overlap_at = [&](double lag) -> cplx {
    const double u = lag + 2.0 * static_cast<double>(n);
    if (u < 0.0 || u >= static_cast<double>(4 * n)) return {};
    const auto i = static_cast<std::size_t>(u);
    const double a = u - static_cast<double>(i);
    return ((1.0 - a) * overlap[i] + a * overlap[i + 1]) / o0;
  };

  // Envelope energy inside the window for an echo at delay d samples,
  // tabulated at 1/16 sample.
  constexpr double kSub = 16.0;
  const double d_first = static_cast<double>(n_lo) - static_cast<double>(n);
  const double d_last = static_cast<double>(n_hi) + static_cast<double>(n);
  std::vector<double> etab(static_cast<std::size_t>((d_last - d_first) * kSub) + 2, 0.0);
  for (std::size_t j = 0; j < etab.size(); ++j) {
    const double d0 = d_first + static_cast<double>(j) / kSub;
    for (long long m = n_lo; m <= n_hi; ++m) etab[j] += std::norm(g_at(static_cast<double>(m) - d0));
  }
  auto energy_at = [&](double d0) {
    const double u = (d0 - d_first) * kSub;
    if (u < 0.0 || u >= static_cast<double>(etab.size() - 1)) return 0.0;
    const auto j = static_cast<std::size_t>(u);
    const double a = u - static_cast<double>(j);
    return (1.0 - a) * etab[j] + a * etab[j + 1];
  };

  PairMoments acc(pairs);
  std::vector<cplx> amp(nrx);
  std::vector<double> delay(nrx), energy(nrx);
  const double r_max = s.water.sound_speed * (win.hi + 2.0 * static_cast<double>(n) / fs);
  for (double x = ext.lo.x + 0.5 * cell; x < ext.hi.x; x += cell)
    for (double y = ext.lo.y + 0.5 * cell; y < ext.hi.y; y += cell) {
      PointScatterer sc;
      sc.position = {x, y, 0.0};
      sc.patch_measure = cell * cell;
      sc.stochastic_factor = 1.0;
      if (distance(sc.position, tx) + distance(sc.position, ev.pose.position) > r_max) continue;
      bool any = false;
      for (std::size_t i = 0; i < nrx; ++i) {
        const CompositeLevel c = composite_level(sc, tx, txs, rx[i], rxs[i], s, f0);
        delay[i] = c.delay * fs;
        amp[i] = timing.gate.contains(c.delay) ? c.amplitude * std::polar(1.0, -w0 * c.delay) : cplx{};
        energy[i] = energy_at(delay[i]);
        any = any || (std::abs(amp[i]) > 0.0 && energy[i] > 0.0);
      }
      if (!any) continue;
      for (std::size_t d = 0; d < pairs.size(); ++d)
        for (std::size_t k = 0; k < pairs[d].size(); ++k) {
          const auto [a, b] = pairs[d][k];
          acc.cross[d][k] += amp[a] * std::conj(amp[b]) * std::sqrt(energy[a] * energy[b]) * overlap_at(delay[a] - delay[b]);
          acc.pa[d][k] += std::norm(amp[a]) * energy[a];
          acc.pb[d][k] += std::norm(amp[b]) * energy[b];
        }
    }
  return acc.coherence();
}

inline SuiteReport suite_vcz(const ValidationOptions& opt = {}) {
  SuiteReport r;
  r.suite = "vcz";
  const std::size_t seeds = opt.seeds ? opt.seeds : 200;
  const Scenario s = vcz_scenario();
  const auto pairs = vcz_pairs(s.array_geometry());
  const auto ev = ping_poses(s).at(static_cast<std::size_t>(kVczTransmitter));
  const Waveform w = make_waveform(s.waveform);
  const CoherenceWindow win = vcz_window(s);

  std::vector<PairMoments> per(seeds, PairMoments(pairs));
  parallel_for(seeds, opt.workers, [&](std::size_t k) {
    Scenario sk = s;
    sk.rng_seed = derive_seed(opt.base_seed, kStreamEnsemble, 1000 + k);
    const Survey v = prepare_survey(sk);
    const PingRecord rec = matched_filter(PingSynthesizer(sk, v.field).synthesize(ev), w);
    PairMoments& a = per[k];
    for (std::size_t n = 0; n < rec.sample_count; ++n) {
      const double t = rec.time_of(n);
      if (t < win.lo || t > win.hi) continue;
      for (std::size_t d = 0; d < pairs.size(); ++d)
        for (std::size_t c = 0; c < pairs[d].size(); ++c) {
          const std::complex<double> sa(rec.complex_at(pairs[d][c].first, n));
          const std::complex<double> sb(rec.complex_at(pairs[d][c].second, n));
          a.cross[d][c] += sa * std::conj(sb);
          a.pa[d][c] += std::norm(sa);
          a.pb[d][c] += std::norm(sb);
        }
    }
  });
  PairMoments tot(pairs);
  for (const auto& a : per) tot.add(a);
  const auto meas = tot.coherence();
  const auto pred = predicted_coherence(s, 0.02);
  double sq = 0.0;
  for (std::size_t d = 0; d <= kVczMaxSeparation; ++d) {
    r.value("coherence_measured_d" + std::to_string(d), meas[d]);
    r.value("coherence_predicted_d" + std::to_string(d), pred[d]);
    sq += (meas[d] - pred[d]) * (meas[d] - pred[d]);
  }
  r.value("seeds", static_cast<double>(seeds));
  r.check("coherence_rms_error", std::sqrt(sq / static_cast<double>(kVczMaxSeparation + 1)), 0.0, 0.1);
  return r;
}

// ---------------------------------------------------------------------------
// Buried cylinder contrast
// ---------------------------------------------------------------------------

inline Scenario buried_cylinder_scenario(const SedimentProperties& sediment, std::uint64_t seed,
                                         std::size_t pings = 21) {
  Scenario s = desk_scenario(sediment, pings);
  s.rng_seed = seed;
  TargetSpec t;
  t.kind = TargetKind::cylinder;
  t.radius = 0.1575;
  t.length = 0.61;
  t.orientation = 0.0;
  t.position = {track_centre_x(s), 0.0, 1.0};
  s.targets.push_back(t);
  const double xc = t.position.x;
  s.image = {xc - 1.0, xc + 1.0, -0.5, 0.5, 0.6, 1.4, 0.02};
  return s;
}

struct ContrastResult {
  double contrast_db = 0.0;  // normalised level at the target peak
  Vec3 peak;
};

// Depth gain, median background, normalisation; the target level is the
// largest normalised value near the cylinder.
inline ContrastResult measure_target_contrast(const VoxelVolume& v, const TargetSpec& t, double gain_db_per_m,
                                              std::size_t workers = 1) {
  const VoxelVolume gained = depth_gain(v, gain_db_per_m);
  const VoxelVolume bg = median_background(gained, kDefaultMedianKernel, workers);
  const VoxelVolume norm = normalize(gained, bg);
  ContrastResult r;
  r.contrast_db = -std::numeric_limits<double>::infinity();
  const auto& g = v.grid;
  for (std::size_t i = 0; i < g.dims[0]; ++i)
    for (std::size_t j = 0; j < g.dims[1]; ++j)
      for (std::size_t k = 0; k < g.dims[2]; ++k) {
        const Vec3 p = g.position(i, j, k);
        if (std::abs(p.x - t.position.x) > 0.15 || std::abs(p.y - t.position.y) > 0.15) continue;
        if (p.z < t.position.z - t.radius - 0.15 || p.z > t.position.z + t.radius) continue;
        const double val = norm.at(i, j, k).real();
        if (val > r.contrast_db) {
          r.contrast_db = val;
          r.peak = p;
        }
      }
  return r;
}

struct ContrastStudy {
  std::vector<double> sand, silt;
  [[nodiscard]] static double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
};

inline ContrastStudy buried_contrast_study(std::size_t seeds, std::size_t workers, std::uint64_t base_seed = 1,
                                           std::size_t pings = 21) {
  ContrastStudy out;
  for (std::size_t k = 0; k < seeds; ++k) {
    const std::uint64_t seed = derive_seed(base_seed, kStreamEnsemble, 5000 + k);
    for (bool sand : {true, false}) {
      const Scenario s =
          buried_cylinder_scenario(sand ? SedimentProperties::medium_sand() : SedimentProperties::very_fine_silt(),
                                   seed, pings);
      const VoxelVolume v = image_scenario(s, workers);
      const double gain = sand ? 10.0 : 0.0;
      const ContrastResult c = measure_target_contrast(v, s.targets.front(), gain, workers);
      (sand ? out.sand : out.silt).push_back(c.contrast_db);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"sonar_equation", "vcz", "multipath_geometry", "target_strength",
                                              "psf"};
  return names;
}

inline SuiteReport run_suite(const std::string& name, const ValidationOptions& opt = {}) {
  if (name == "sonar_equation") return suite_sonar_equation(opt);
  if (name == "vcz") return suite_vcz(opt);
  if (name == "multipath_geometry") return suite_multipath_geometry(opt);
  if (name == "target_strength") return suite_target_strength(opt);
  if (name == "psf") return suite_psf(opt);
  throw ValidationError("suite", "unknown suite '" + name + "'");
}

}  // namespace subsonar

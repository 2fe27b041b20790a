#pragma once

// World model: media, layering, arrays, survey track, targets, and the
// Scenario aggregate that drives every other stage.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "subsonar/core.hpp"

namespace subsonar {

// Geoacoustic parameters of one sediment. Attenuation is referenced to 20 kHz
// and the roughness spectrum is W(K) = spectral_strength * K^-spectral_exponent
// with K in rad/m.
struct SedimentProperties {
  double density = 0.0;                     // kg/m^3
  double sound_speed = 0.0;                 // m/s
  double attenuation_at_ref = 0.0;          // dB/m at 20 kHz
  double spectral_strength = 0.0;           // m^(4 - gamma)
  double spectral_exponent = 0.0;           // gamma
  double volume_scattering_strength = 0.0;  // dB/m

  bool operator==(const SedimentProperties&) const = default;

  static SedimentProperties medium_sand() { return {1845.0, 1767.0, 10.0, 1.410e-4, 3.25, -20.0}; }
  static SedimentProperties very_fine_silt() { return {1147.0, 1476.0, 1.4, 1.638e-5, 3.25, -28.6}; }

  void validate(const std::string& prefix) const {
    if (!(density > 0.0)) throw ValidationError(prefix + ".density", "must be > 0");
    if (!(sound_speed > 0.0)) throw ValidationError(prefix + ".sound_speed", "must be > 0");
    if (!(attenuation_at_ref >= 0.0)) throw ValidationError(prefix + ".attenuation_at_ref", "must be >= 0");
    if (!(spectral_strength > 0.0)) throw ValidationError(prefix + ".spectral_strength", "must be > 0");
    if (!(spectral_exponent > 2.0 && spectral_exponent < 4.0))
      throw ValidationError(prefix + ".spectral_exponent", "must lie in (2, 4)");
    if (!std::isfinite(volume_scattering_strength))
      throw ValidationError(prefix + ".volume_scattering_strength", "must be finite");
  }
};

struct WaterProperties {
  double density = 1000.0;
  double sound_speed = 1480.0;
  double absorption = 0.0;  // dB/m, frequency independent

  bool operator==(const WaterProperties&) const = default;
};

struct BuriedLayer {
  double depth_below_interface = 0.0;
  SedimentProperties lower_medium;

  bool operator==(const BuriedLayer&) const = default;
};

struct SceneGeometry {
  double water_depth = 2.5;
  double sensor_altitude = 2.0;
  double interface_rms_roughness = 0.01;
  std::optional<BuriedLayer> buried_layer;

  bool operator==(const SceneGeometry&) const = default;

  // z of the air-water surface.
  [[nodiscard]] double surface_z() const { return -water_depth; }
  [[nodiscard]] double sensor_z() const { return -sensor_altitude; }
};

// ---------------------------------------------------------------------------
// Arrays
// ---------------------------------------------------------------------------

inline constexpr double kReceiverPitch = 0.091;
inline constexpr double kModeledProjectorPitch = 0.229;

struct Receiver {
  int id = 0;
  Vec3 offset;
  std::array<double, 2> aperture{kReceiverPitch, kReceiverPitch};  // along, cross (rectangular piston)
};

struct Projector {
  int id = 0;
  Vec3 offset;
  double aperture_diameter = 0.10;  // circular piston
};

struct ArrayGeometry {
  std::string layout;
  std::vector<Receiver> receivers;
  std::vector<Projector> projectors;
  Vec3 reference_anchor;  // receive-array centre; poses locate this point

  bool operator==(const ArrayGeometry& o) const {
    auto same_rx = [](const Receiver& a, const Receiver& b) {
      return a.id == b.id && a.offset == b.offset && a.aperture == b.aperture;
    };
    auto same_tx = [](const Projector& a, const Projector& b) {
      return a.id == b.id && a.offset == b.offset && a.aperture_diameter == b.aperture_diameter;
    };
    return layout == o.layout && reference_anchor == o.reference_anchor &&
           std::equal(receivers.begin(), receivers.end(), o.receivers.begin(), o.receivers.end(), same_rx) &&
           std::equal(projectors.begin(), projectors.end(), o.projectors.begin(), o.projectors.end(), same_tx);
  }

  // Physical extent including element apertures.
  [[nodiscard]] double along_track_extent() const {
    double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
    for (const auto& r : receivers) {
      lo = std::min(lo, r.offset.x - 0.5 * r.aperture[0]);
      hi = std::max(hi, r.offset.x + 0.5 * r.aperture[0]);
    }
    return receivers.empty() ? 0.0 : hi - lo;
  }
  [[nodiscard]] double cross_track_extent() const {
    double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
    for (const auto& r : receivers) {
      lo = std::min(lo, r.offset.y - 0.5 * r.aperture[1]);
      hi = std::max(hi, r.offset.y + 0.5 * r.aperture[1]);
    }
    return receivers.empty() ? 0.0 : hi - lo;
  }
  // Largest horizontal distance of any element from the reference anchor.
  [[nodiscard]] double horizontal_radius() const {
    double r = 0.0;
    for (const auto& e : receivers) r = std::max(r, (e.offset - reference_anchor).horizontal_norm());
    for (const auto& e : projectors) r = std::max(r, (e.offset - reference_anchor).horizontal_norm());
    return r;
  }
};

namespace detail {

// Rows along-track (index 0 aft), columns cross-track; the grid is centred on
// (x_centre, 0).
inline void add_receiver_block(ArrayGeometry& a, int rows, int cols, double x_first, double width) {
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      Receiver r;
      r.id = static_cast<int>(a.receivers.size());
      r.offset = {x_first + i * kReceiverPitch, (j - 0.5 * (cols - 1)) * kReceiverPitch, 0.0};
      r.aperture = {width, width};
      a.receivers.push_back(r);
    }
  }
}

inline void add_projector_row(ArrayGeometry& a, int count, double pitch, double x, double diameter) {
  for (int k = 0; k < count; ++k) {
    Projector p;
    p.id = k;
    p.offset = {x, (k - 0.5 * (count - 1)) * pitch, 0.0};
    p.aperture_diameter = diameter;
    a.projectors.push_back(p);
  }
}

inline ArrayGeometry grid_with_projectors(const char* layout, int rows, int cols, int n_tx, double tx_pitch,
                                          double rx_width, double tx_diameter) {
  ArrayGeometry a;
  a.layout = layout;
  const double x_first = -0.5 * (rows - 1) * kReceiverPitch;
  add_receiver_block(a, rows, cols, x_first, rx_width);
  const double x_front = x_first + (rows - 1) * kReceiverPitch;
  add_projector_row(a, n_tx, tx_pitch, x_front + kReceiverPitch, tx_diameter);
  return a;
}

}  // namespace detail

// 4 along-track x 8 cross-track receivers, five forward projectors.
inline ArrayGeometry build_modeled_array(double rx_width = kReceiverPitch, double tx_diameter = 0.10) {
  return detail::grid_with_projectors("modeled_4x8", 4, 8, 5, kModeledProjectorPitch, rx_width, tx_diameter);
}

// The 48-channel (4x12) variant used for the simulation tallies.
inline ArrayGeometry build_modeled_array_4x12(double rx_width = kReceiverPitch, double tx_diameter = 0.10) {
  return detail::grid_with_projectors("modeled_4x12", 4, 12, 5, kModeledProjectorPitch, rx_width, tx_diameter);
}

// Field layout: 4x12 aft section plus a 4x8 section forward of it (80
// channels), six projectors forward of the array.
inline ArrayGeometry build_field_array(double rx_width = kReceiverPitch, double tx_diameter = 0.10) {
  ArrayGeometry a;
  a.layout = "field_80";
  const double x_first = -3.5 * kReceiverPitch;
  detail::add_receiver_block(a, 4, 12, x_first, rx_width);
  detail::add_receiver_block(a, 4, 8, x_first + 4 * kReceiverPitch, rx_width);
  detail::add_projector_row(a, 6, 2.0 * kReceiverPitch, x_first + 8 * kReceiverPitch, tx_diameter);
  return a;
}

struct ArrayConfig {
  std::string layout = "modeled_4x12";
  double receiver_element_width = kReceiverPitch;
  double projector_aperture_diameter = 0.10;

  bool operator==(const ArrayConfig&) const = default;
};

inline ArrayGeometry build_array(const ArrayConfig& c) {
  if (c.layout == "modeled_4x8") return build_modeled_array(c.receiver_element_width, c.projector_aperture_diameter);
  if (c.layout == "modeled_4x12")
    return build_modeled_array_4x12(c.receiver_element_width, c.projector_aperture_diameter);
  if (c.layout == "field_80") return build_field_array(c.receiver_element_width, c.projector_aperture_diameter);
  if (c.layout == "single") {
    // One projector and one receiver at the reference point; used for the
    // statistical validation suites.
    ArrayGeometry a;
    a.layout = "single";
    a.receivers.push_back({0, {}, {c.receiver_element_width, c.receiver_element_width}});
    a.projectors.push_back({0, {}, c.projector_aperture_diameter});
    return a;
  }
  throw ValidationError("array.layout", "unknown layout '" + c.layout + "'");
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

enum class TargetKind { sphere, cylinder, point };

inline const char* to_string(TargetKind k) {
  switch (k) {
    case TargetKind::sphere: return "sphere";
    case TargetKind::cylinder: return "cylinder";
    case TargetKind::point: return "point";
  }
  return "?";
}

struct TargetSpec {
  TargetKind kind = TargetKind::point;
  double radius = 0.05;
  double length = 0.0;
  Vec3 position;
  std::optional<double> orientation;  // yaw about z; cylinder axis = (cos, sin, 0)
  std::optional<double> fixed_ts_override;

  bool operator==(const TargetSpec&) const = default;

  [[nodiscard]] bool buried() const { return position.z >= 0.0; }
};

// ---------------------------------------------------------------------------
// Track, waveform, noise, and model controls
// ---------------------------------------------------------------------------

enum class TxSchedule { round_robin, all_tx_per_location };

inline const char* to_string(TxSchedule s) {
  return s == TxSchedule::round_robin ? "round_robin" : "all_tx_per_location";
}

struct TrackConfig {
  std::size_t ping_count = 51;
  double along_track_advance = kReceiverPitch;
  TxSchedule tx_schedule = TxSchedule::all_tx_per_location;

  bool operator==(const TrackConfig&) const = default;
};

struct WaveformConfig {
  double f_start = 10.0e3;
  double f_stop = 40.0e3;
  double duration = 0.010;
  double sample_rate = 200.0e3;
  double source_level = 190.0;  // dB re 1 uPa @ 1 m
  double taper = 0.1;           // cosine taper fraction; 0 = rectangular

  bool operator==(const WaveformConfig&) const = default;

  [[nodiscard]] double centre_frequency() const { return 0.5 * (f_start + f_stop); }
  [[nodiscard]] double bandwidth() const { return std::abs(f_stop - f_start); }
};

struct NoiseConfig {
  bool enabled = true;
  double sea_state = 3.0;

  bool operator==(const NoiseConfig&) const = default;
};

struct ScattererConfig {
  double interface_density = 250.0;  // per m^2; 0 disables
  double volume_density = 500.0;     // per m^3; 0 disables
  double volume_depth = 3.0;         // m below the interface
  double min_per_cell = 10.0;
  double tile_size = 1.0;            // m, generation tile edge

  bool operator==(const ScattererConfig&) const = default;
};

struct PropagationConfig {
  int multipath_order = 2;
  bool coherent_reflection = true;
  double surface_reflection = -1.0;

  bool operator==(const PropagationConfig&) const = default;
};

struct SynthesisConfig {
  int subbands = 1;
  // Contributions are kept when their two-way delay lies within the image
  // volume's delay span widened by this guard (s). Unset = one pulse length.
  std::optional<double> gate_guard;

  bool operator==(const SynthesisConfig&) const = default;
};

// Image volume (world coordinates).
struct ImageConfig {
  double x_min = 0.0, x_max = 15.0;
  double y_min = -1.0, y_max = 1.0;
  double z_min = 0.0, z_max = 2.0;
  double spacing = 0.02;

  bool operator==(const ImageConfig&) const = default;
};

struct Scenario {
  SceneGeometry geometry;
  WaterProperties water;
  SedimentProperties sediment = SedimentProperties::very_fine_silt();
  ArrayConfig array;
  TrackConfig track;
  WaveformConfig waveform;
  NoiseConfig noise;
  ScattererConfig scatterers;
  PropagationConfig propagation;
  SynthesisConfig synthesis;
  ImageConfig image;
  std::vector<TargetSpec> targets;
  std::uint64_t rng_seed = 1;

  bool operator==(const Scenario&) const = default;

  [[nodiscard]] ArrayGeometry array_geometry() const { return build_array(array); }

  // Medium properties at depth z (z >= 0).
  [[nodiscard]] const SedimentProperties& sediment_at(double z) const {
    if (geometry.buried_layer && z >= geometry.buried_layer->depth_below_interface)
      return geometry.buried_layer->lower_medium;
    return sediment;
  }
};

inline void validate(const Scenario& s) {
  const auto& g = s.geometry;
  if (!(g.water_depth > 0.0)) throw ValidationError("geometry.water_depth", "must be > 0");
  if (!(g.sensor_altitude > 0.0 && g.sensor_altitude < g.water_depth))
    throw ValidationError("geometry.sensor_altitude", "must satisfy 0 < sensor_altitude < water_depth");
  if (!(g.interface_rms_roughness >= 0.0))
    throw ValidationError("geometry.interface_rms_roughness", "must be >= 0");
  if (g.buried_layer) {
    if (!(g.buried_layer->depth_below_interface > 0.0))
      throw ValidationError("geometry.buried_layer.depth_below_interface", "must be > 0");
    g.buried_layer->lower_medium.validate("geometry.buried_layer");
  }
  if (!(s.water.density > 0.0)) throw ValidationError("water.density", "must be > 0");
  if (!(s.water.sound_speed > 0.0)) throw ValidationError("water.sound_speed", "must be > 0");
  if (!(s.water.absorption >= 0.0)) throw ValidationError("water.absorption", "must be >= 0");
  s.sediment.validate("sediment");

  if (!(s.array.receiver_element_width > 0.0))
    throw ValidationError("array.receiver_element_width", "must be > 0");
  if (!(s.array.projector_aperture_diameter > 0.0))
    throw ValidationError("array.projector_aperture_diameter", "must be > 0");
  (void)build_array(s.array);

  if (s.track.ping_count < 1) throw ValidationError("track.ping_count", "must be >= 1");
  if (!(s.track.along_track_advance > 0.0)) throw ValidationError("track.along_track_advance", "must be > 0");

  const auto& w = s.waveform;
  if (!(w.duration > 0.0)) throw ValidationError("waveform.duration", "must be > 0");
  if (!(w.f_start >= 1.0e3 && w.f_start <= 100.0e3)) throw ValidationError("waveform.f_start", "must lie in [1, 100] kHz");
  if (!(w.f_stop >= 1.0e3 && w.f_stop <= 100.0e3)) throw ValidationError("waveform.f_stop", "must lie in [1, 100] kHz");
  if (!(w.sample_rate > 2.0 * std::max(w.f_start, w.f_stop)))
    throw ValidationError("waveform.sample_rate", "must exceed twice the highest frequency (Nyquist)");
  if (!(w.taper >= 0.0 && w.taper <= 1.0)) throw ValidationError("waveform.taper", "must lie in [0, 1]");
  if (!std::isfinite(w.source_level)) throw ValidationError("waveform.source_level", "must be finite");

  if (!(s.noise.sea_state >= 0.0 && s.noise.sea_state <= 6.0))
    throw ValidationError("noise.sea_state", "must lie in [0, 6]");

  const auto& sc = s.scatterers;
  if (!(sc.interface_density >= 0.0)) throw ValidationError("scatterers.interface_density", "must be >= 0");
  if (!(sc.volume_density >= 0.0)) throw ValidationError("scatterers.volume_density", "must be >= 0");
  if (!(sc.volume_depth > 0.0)) throw ValidationError("scatterers.volume_depth", "must be > 0");
  if (!(sc.min_per_cell >= 1.0)) throw ValidationError("scatterers.min_per_cell", "must be >= 1");
  if (!(sc.tile_size > 0.0)) throw ValidationError("scatterers.tile_size", "must be > 0");

  if (s.propagation.multipath_order < 0) throw ValidationError("propagation.multipath_order", "must be >= 0");
  if (!(std::abs(s.propagation.surface_reflection) <= 1.0))
    throw ValidationError("propagation.surface_reflection", "must have magnitude <= 1");
  if (s.synthesis.subbands < 1) throw ValidationError("synthesis.subbands", "must be >= 1");
  if (s.synthesis.gate_guard && !(*s.synthesis.gate_guard >= 0.0))
    throw ValidationError("synthesis.gate_guard", "must be >= 0");

  const auto& im = s.image;
  if (!(im.spacing > 0.0)) throw ValidationError("image.spacing", "must be > 0");
  if (!(im.x_max > im.x_min)) throw ValidationError("image.x_max", "must exceed x_min");
  if (!(im.y_max > im.y_min)) throw ValidationError("image.y_max", "must exceed y_min");
  if (!(im.z_max > im.z_min)) throw ValidationError("image.z_max", "must exceed z_min");
  if (!(im.z_min > -g.sensor_altitude)) throw ValidationError("image.z_min", "must lie below the sensor");

  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    const auto& t = s.targets[i];
    const std::string p = "targets." + std::to_string(i);
    if (!(t.radius > 0.0)) throw ValidationError(p + ".radius", "must be > 0");
    if (t.kind == TargetKind::cylinder) {
      if (!(t.length > 0.0)) throw ValidationError(p + ".length", "must be > 0 for cylinders");
      if (!t.orientation) throw ValidationError(p + ".orientation", "required for cylinders");
    }
    if (t.kind == TargetKind::point && !t.fixed_ts_override)
      throw ValidationError(p + ".fixed_ts_override", "required for point targets");
    if (!(t.position.z > g.surface_z() && t.position.z <= s.scatterers.volume_depth + 10.0))
      throw ValidationError(p + ".position", "must lie below the surface");
  }
}

// ---------------------------------------------------------------------------
// Survey bookkeeping
// ---------------------------------------------------------------------------

struct Pose {
  Vec3 position;
  double roll = 0.0, pitch = 0.0, yaw = 0.0;

  bool operator==(const Pose&) const = default;
};

struct TransmitEvent {
  std::size_t event_index = 0;
  std::size_t location_index = 0;
  int tx_id = 0;
  Pose pose;
};

// Straight track along +x; location i sits i * advance from the origin at the
// sensor altitude.
inline std::vector<TransmitEvent> ping_poses(const Scenario& s) {
  const std::size_t n_tx = s.array_geometry().projectors.size();
  std::vector<TransmitEvent> events;
  for (std::size_t i = 0; i < s.track.ping_count; ++i) {
    Pose pose;
    pose.position = {static_cast<double>(i) * s.track.along_track_advance, 0.0, s.geometry.sensor_z()};
    if (s.track.tx_schedule == TxSchedule::round_robin) {
      events.push_back({events.size(), i, static_cast<int>(i % n_tx), pose});
    } else {
      for (std::size_t k = 0; k < n_tx; ++k) events.push_back({events.size(), i, static_cast<int>(k), pose});
    }
  }
  return events;
}

struct SurveyTally {
  std::size_t locations = 0;
  std::size_t transmit_events = 0;
  std::size_t receivers = 0;
  std::size_t series_per_transmitter = 0;  // locations x receivers
  std::size_t total_series = 0;            // transmit events x receivers
};

inline SurveyTally survey_tally(const Scenario& s) {
  const auto a = s.array_geometry();
  SurveyTally t;
  t.locations = s.track.ping_count;
  t.transmit_events = ping_poses(s).size();
  t.receivers = a.receivers.size();
  t.series_per_transmitter = t.locations * t.receivers;
  t.total_series = t.transmit_events * t.receivers;
  return t;
}

// World position of a receiver / projector for a pose (attitude is level).
inline Vec3 element_position(const Pose& pose, const Vec3& offset) { return pose.position + offset; }

}  // namespace subsonar

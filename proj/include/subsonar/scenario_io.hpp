#pragma once

// Scenario files: INI-style structured text.
//
//   # comment
//   rng_seed = 42
//   [geometry]
//   water_depth = 2.5
//   [targets.0]
//   kind = cylinder
//   position = 0.0, 0.0, 1.0
//
// Sections: geometry, geometry.buried_layer, water, sediment, array, track,
// waveform, noise, scatterers, propagation, synthesis, image, targets.N.
// Unknown sections and keys are errors. Missing keys keep their defaults.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "subsonar/scene.hpp"

namespace subsonar {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct RawEntry {
  std::string value;
  int line = 0;
  bool used = false;
};

using RawSection = std::map<std::string, RawEntry>;

class SectionReader {
 public:
  SectionReader(std::string name, RawSection& entries) : name_(std::move(name)), entries_(entries) {}

  void number(const char* key, double& out) {
    if (auto* e = take(key)) out = parse_double(*e, key);
  }
  void optional_number(const char* key, std::optional<double>& out) {
    if (auto* e = take(key)) out = parse_double(*e, key);
  }
  void integer(const char* key, int& out) {
    if (auto* e = take(key)) out = static_cast<int>(parse_int(*e, key));
  }
  void count(const char* key, std::size_t& out) {
    if (auto* e = take(key)) {
      const long long v = parse_int(*e, key);
      if (v < 0) fail(*e, key, "must be non-negative");
      out = static_cast<std::size_t>(v);
    }
  }
  void boolean(const char* key, bool& out) {
    if (auto* e = take(key)) {
      if (e->value == "true") out = true;
      else if (e->value == "false") out = false;
      else fail(*e, key, "expected true or false");
    }
  }
  void text(const char* key, std::string& out) {
    if (auto* e = take(key)) out = e->value;
  }
  void vec3(const char* key, Vec3& out) {
    if (auto* e = take(key)) {
      std::vector<double> v;
      std::stringstream ss(e->value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        RawEntry tmp{trim(item), e->line};
        v.push_back(parse_double(tmp, key));
      }
      if (v.size() != 3) fail(*e, key, "expected three comma-separated numbers");
      out = {v[0], v[1], v[2]};
    }
  }
  RawEntry* take(const char* key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  void sediment(SedimentProperties& s) {
    if (auto* e = take("preset")) {
      if (e->value == "medium_sand") s = SedimentProperties::medium_sand();
      else if (e->value == "very_fine_silt") s = SedimentProperties::very_fine_silt();
      else fail(*e, "preset", "unknown sediment preset");
    }
    number("density", s.density);
    number("sound_speed", s.sound_speed);
    number("attenuation_at_ref", s.attenuation_at_ref);
    number("spectral_strength", s.spectral_strength);
    number("spectral_exponent", s.spectral_exponent);
    number("volume_scattering_strength", s.volume_scattering_strength);
  }

  [[noreturn]] void fail(const RawEntry& e, const char* key, const std::string& msg) const {
    throw ParseError("line " + std::to_string(e.line) + ": [" + name_ + "] " + key + ": " + msg);
  }

 private:
  double parse_double(const RawEntry& e, const char* key) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(e.value, &pos);
      if (pos != e.value.size()) fail(e, key, "trailing characters in number '" + e.value + "'");
      return v;
    } catch (const std::logic_error&) {
      fail(e, key, "expected a number, got '" + e.value + "'");
    }
  }
  long long parse_int(const RawEntry& e, const char* key) const {
    long long v = 0;
    const auto* b = e.value.data();
    const auto* end = b + e.value.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc{} || p != end) fail(e, key, "expected an integer, got '" + e.value + "'");
    return v;
  }

  std::string name_;
  RawSection& entries_;
};

}  // namespace detail

inline Scenario parse_scenario(std::string_view text) {
  std::map<std::string, detail::RawSection> sections;
  std::string current;  // "" = top level
  sections[current];
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("line " + std::to_string(line_no) + ": unterminated section header");
      current = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (current.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty section name");
      if (sections.count(current) && !sections[current].empty())
        throw ParseError("line " + std::to_string(line_no) + ": duplicate section [" + current + "]");
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = detail::trim(std::string_view(line).substr(0, eq));
    std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key");
    auto& sec = sections[current];
    if (sec.count(key))
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    sec[key] = {value, line_no};
  }

  Scenario s;
  std::vector<std::pair<std::string, int>> target_sections;
  for (auto& [name, entries] : sections) {
    detail::SectionReader r(name, entries);
    if (name.empty()) {
      if (auto* e = r.take("rng_seed")) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
        if (ec != std::errc{} || p != e->value.data() + e->value.size())
          r.fail(*e, "rng_seed", "expected an unsigned 64-bit integer");
        s.rng_seed = v;
      }
    } else if (name == "geometry") {
      r.number("water_depth", s.geometry.water_depth);
      r.number("sensor_altitude", s.geometry.sensor_altitude);
      r.number("interface_rms_roughness", s.geometry.interface_rms_roughness);
    } else if (name == "geometry.buried_layer") {
      BuriedLayer layer;
      layer.lower_medium = SedimentProperties::medium_sand();
      r.number("depth_below_interface", layer.depth_below_interface);
      r.sediment(layer.lower_medium);
      s.geometry.buried_layer = layer;
    } else if (name == "water") {
      r.number("density", s.water.density);
      r.number("sound_speed", s.water.sound_speed);
      r.number("absorption", s.water.absorption);
    } else if (name == "sediment") {
      r.sediment(s.sediment);
    } else if (name == "array") {
      r.text("layout", s.array.layout);
      r.number("receiver_element_width", s.array.receiver_element_width);
      r.number("projector_aperture_diameter", s.array.projector_aperture_diameter);
    } else if (name == "track") {
      r.count("ping_count", s.track.ping_count);
      r.number("along_track_advance", s.track.along_track_advance);
      if (auto* e = r.take("tx_schedule")) {
        if (e->value == "round_robin") s.track.tx_schedule = TxSchedule::round_robin;
        else if (e->value == "all_tx_per_location") s.track.tx_schedule = TxSchedule::all_tx_per_location;
        else r.fail(*e, "tx_schedule", "expected round_robin or all_tx_per_location");
      }
    } else if (name == "waveform") {
      r.number("f_start", s.waveform.f_start);
      r.number("f_stop", s.waveform.f_stop);
      r.number("duration", s.waveform.duration);
      r.number("sample_rate", s.waveform.sample_rate);
      r.number("source_level", s.waveform.source_level);
      r.number("taper", s.waveform.taper);
    } else if (name == "noise") {
      r.boolean("enabled", s.noise.enabled);
      r.number("sea_state", s.noise.sea_state);
    } else if (name == "scatterers") {
      r.number("interface_density", s.scatterers.interface_density);
      r.number("volume_density", s.scatterers.volume_density);
      r.number("volume_depth", s.scatterers.volume_depth);
      r.number("min_per_cell", s.scatterers.min_per_cell);
      r.number("tile_size", s.scatterers.tile_size);
    } else if (name == "propagation") {
      r.integer("multipath_order", s.propagation.multipath_order);
      r.boolean("coherent_reflection", s.propagation.coherent_reflection);
      r.number("surface_reflection", s.propagation.surface_reflection);
    } else if (name == "synthesis") {
      r.integer("subbands", s.synthesis.subbands);
      r.optional_number("gate_guard", s.synthesis.gate_guard);
    } else if (name == "image") {
      r.number("x_min", s.image.x_min);
      r.number("x_max", s.image.x_max);
      r.number("y_min", s.image.y_min);
      r.number("y_max", s.image.y_max);
      r.number("z_min", s.image.z_min);
      r.number("z_max", s.image.z_max);
      r.number("spacing", s.image.spacing);
    } else if (name.rfind("targets.", 0) == 0) {
      int idx = -1;
      const std::string tail = name.substr(8);
      auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), idx);
      if (ec != std::errc{} || p != tail.data() + tail.size() || idx < 0)
        throw ParseError("section [" + name + "]: target index must be a non-negative integer");
      target_sections.emplace_back(name, idx);
      continue;  // read below, in index order
    } else {
      throw ParseError("unknown section [" + name + "]");
    }
  }

  std::sort(target_sections.begin(), target_sections.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  for (std::size_t i = 0; i < target_sections.size(); ++i) {
    const auto& [name, idx] = target_sections[i];
    if (idx != static_cast<int>(i))
      throw ParseError("target sections must be numbered 0..N-1 without gaps; found [" + name + "]");
    detail::SectionReader r(name, sections[name]);
    TargetSpec t;
    if (auto* e = r.take("kind")) {
      if (e->value == "sphere") t.kind = TargetKind::sphere;
      else if (e->value == "cylinder") t.kind = TargetKind::cylinder;
      else if (e->value == "point") t.kind = TargetKind::point;
      else r.fail(*e, "kind", "expected sphere, cylinder or point");
    }
    r.number("radius", t.radius);
    r.number("length", t.length);
    r.vec3("position", t.position);
    r.optional_number("orientation", t.orientation);
    r.optional_number("fixed_ts_override", t.fixed_ts_override);
    s.targets.push_back(t);
  }

  for (const auto& [name, entries] : sections)
    for (const auto& [key, e] : entries)
      if (!e.used)
        throw ParseError("line " + std::to_string(e.line) + ": unknown key '" + key + "' in [" +
                         (name.empty() ? std::string("top level") : name) + "]");

  validate(s);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

// Canonical text form. parse_scenario(serialize_scenario(s)) == s.
inline std::string serialize_scenario(const Scenario& s) {
  using detail::format_double;
  std::ostringstream o;
  auto kv = [&o](const char* k, const std::string& v) { o << k << " = " << v << '\n'; };
  auto num = [&kv](const char* k, double v) { kv(k, format_double(v)); };
  auto sed = [&num](const SedimentProperties& p) {
    num("density", p.density);
    num("sound_speed", p.sound_speed);
    num("attenuation_at_ref", p.attenuation_at_ref);
    num("spectral_strength", p.spectral_strength);
    num("spectral_exponent", p.spectral_exponent);
    num("volume_scattering_strength", p.volume_scattering_strength);
  };

  o << "rng_seed = " << s.rng_seed << "\n\n[geometry]\n";
  num("water_depth", s.geometry.water_depth);
  num("sensor_altitude", s.geometry.sensor_altitude);
  num("interface_rms_roughness", s.geometry.interface_rms_roughness);
  if (s.geometry.buried_layer) {
    o << "\n[geometry.buried_layer]\n";
    num("depth_below_interface", s.geometry.buried_layer->depth_below_interface);
    sed(s.geometry.buried_layer->lower_medium);
  }
  o << "\n[water]\n";
  num("density", s.water.density);
  num("sound_speed", s.water.sound_speed);
  num("absorption", s.water.absorption);
  o << "\n[sediment]\n";
  sed(s.sediment);
  o << "\n[array]\n";
  kv("layout", s.array.layout);
  num("receiver_element_width", s.array.receiver_element_width);
  num("projector_aperture_diameter", s.array.projector_aperture_diameter);
  o << "\n[track]\n";
  kv("ping_count", std::to_string(s.track.ping_count));
  num("along_track_advance", s.track.along_track_advance);
  kv("tx_schedule", to_string(s.track.tx_schedule));
  o << "\n[waveform]\n";
  num("f_start", s.waveform.f_start);
  num("f_stop", s.waveform.f_stop);
  num("duration", s.waveform.duration);
  num("sample_rate", s.waveform.sample_rate);
  num("source_level", s.waveform.source_level);
  num("taper", s.waveform.taper);
  o << "\n[noise]\n";
  kv("enabled", s.noise.enabled ? "true" : "false");
  num("sea_state", s.noise.sea_state);
  o << "\n[scatterers]\n";
  num("interface_density", s.scatterers.interface_density);
  num("volume_density", s.scatterers.volume_density);
  num("volume_depth", s.scatterers.volume_depth);
  num("min_per_cell", s.scatterers.min_per_cell);
  num("tile_size", s.scatterers.tile_size);
  o << "\n[propagation]\n";
  kv("multipath_order", std::to_string(s.propagation.multipath_order));
  kv("coherent_reflection", s.propagation.coherent_reflection ? "true" : "false");
  num("surface_reflection", s.propagation.surface_reflection);
  o << "\n[synthesis]\n";
  kv("subbands", std::to_string(s.synthesis.subbands));
  if (s.synthesis.gate_guard) num("gate_guard", *s.synthesis.gate_guard);
  o << "\n[image]\n";
  num("x_min", s.image.x_min);
  num("x_max", s.image.x_max);
  num("y_min", s.image.y_min);
  num("y_max", s.image.y_max);
  num("z_min", s.image.z_min);
  num("z_max", s.image.z_max);
  num("spacing", s.image.spacing);
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    const auto& t = s.targets[i];
    o << "\n[targets." << i << "]\n";
    kv("kind", to_string(t.kind));
    num("radius", t.radius);
    num("length", t.length);
    kv("position", format_double(t.position.x) + ", " + format_double(t.position.y) + ", " +
                       format_double(t.position.z));
    if (t.orientation) num("orientation", *t.orientation);
    if (t.fixed_ts_override) num("fixed_ts_override", *t.fixed_ts_override);
  }
  return o.str();
}

inline std::uint64_t scenario_hash(const Scenario& s) { return fnv1a64(serialize_scenario(s)); }

}  // namespace subsonar

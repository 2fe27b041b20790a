#pragma once

// Time-domain backprojection onto a world-coordinate voxel grid with
// two-medium (refracted) travel times.

#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "subsonar/core.hpp"
#include "subsonar/propagation.hpp"
#include "subsonar/scenario_io.hpp"
#include "subsonar/scene.hpp"
#include "subsonar/synth.hpp"

namespace subsonar {

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

// Voxel (i, j, k) sits at origin + (i sx, j sy, k sz); storage is z fastest.
struct VoxelGrid {
  Vec3 origin;
  std::array<double, 3> spacing{0.02, 0.02, 0.02};
  std::array<std::size_t, 3> dims{0, 0, 0};

  [[nodiscard]] std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * dims[1] + j) * dims[2] + k;
  }
  [[nodiscard]] std::array<std::size_t, 3> unravel(std::size_t n) const {
    const std::size_t k = n % dims[2];
    const std::size_t j = (n / dims[2]) % dims[1];
    return {n / (dims[1] * dims[2]), j, k};
  }
  [[nodiscard]] Vec3 position(std::size_t i, std::size_t j, std::size_t k) const {
    return {origin.x + static_cast<double>(i) * spacing[0], origin.y + static_cast<double>(j) * spacing[1],
            origin.z + static_cast<double>(k) * spacing[2]};
  }
  [[nodiscard]] double coordinate(int axis, std::size_t n) const {
    const double o = axis == 0 ? origin.x : axis == 1 ? origin.y : origin.z;
    return o + static_cast<double>(n) * spacing[static_cast<std::size_t>(axis)];
  }
  // Nearest index along an axis; throws when the coordinate lies outside the
  // grid by more than half a voxel.
  [[nodiscard]] std::size_t nearest_index(int axis, double coord) const {
    const auto a = static_cast<std::size_t>(axis);
    const double o = axis == 0 ? origin.x : axis == 1 ? origin.y : origin.z;
    const double u = (coord - o) / spacing[a];
    if (!(u >= -0.5 && u < static_cast<double>(dims[a]) - 0.5))
      throw ValidationError("coordinate", "coordinate " + format_coord(coord) + " lies outside the grid");
    return static_cast<std::size_t>(std::llround(std::max(0.0, u)));
  }

  bool operator==(const VoxelGrid&) const = default;

 private:
  static std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }
};

inline VoxelGrid make_grid(const Vec3& extents, double spacing, const Vec3& origin = {}) {
  if (!(spacing > 0.0)) throw ValidationError("spacing", "must be > 0");
  VoxelGrid g;
  g.origin = origin;
  g.spacing = {spacing, spacing, spacing};
  const std::array<double, 3> e{extents.x, extents.y, extents.z};
  for (std::size_t a = 0; a < 3; ++a) {
    if (!(e[a] > 0.0)) throw ValidationError("extents", "must be > 0 on every axis");
    if (spacing > e[a]) throw ValidationError("spacing", "exceeds the extent on an axis");
    g.dims[a] = static_cast<std::size_t>(std::llround(e[a] / spacing));
  }
  return g;
}

inline VoxelGrid make_grid(const ImageConfig& im) {
  return make_grid({im.x_max - im.x_min, im.y_max - im.y_min, im.z_max - im.z_min}, im.spacing,
                   {im.x_min, im.y_min, im.z_min});
}

// Splits the along-track image extent into consecutive tiles of `length`.
inline std::vector<ImageConfig> along_track_tiles(const ImageConfig& im, double length) {
  if (!(length > 0.0)) throw ValidationError("tile_length", "must be > 0");
  std::vector<ImageConfig> out;
  for (double x = im.x_min; x < im.x_max - 1e-9; x += length) {
    ImageConfig t = im;
    t.x_min = x;
    t.x_max = std::min(im.x_max, x + length);
    out.push_back(t);
  }
  return out;
}

enum class ValueKind : std::uint32_t { real = 0, complex = 1 };

struct VoxelVolume {
  VoxelGrid grid;
  ValueKind kind = ValueKind::complex;
  std::vector<cplx> values;
  std::vector<std::uint32_t> coverage;  // contributing pairs per voxel (backprojection only)
  std::uint64_t scenario_hash = 0;
  std::uint64_t ping_first = 0;
  std::uint64_t ping_count = 0;

  VoxelVolume() = default;
  VoxelVolume(const VoxelGrid& g, ValueKind k) : grid(g), kind(k), values(g.size(), cplx{}) {}

  cplx& at(std::size_t i, std::size_t j, std::size_t k) { return values[grid.index(i, j, k)]; }
  [[nodiscard]] const cplx& at(std::size_t i, std::size_t j, std::size_t k) const {
    return values[grid.index(i, j, k)];
  }
  [[nodiscard]] double intensity(std::size_t n) const { return std::norm(values[n]); }
  [[nodiscard]] std::size_t argmax_intensity() const {
    std::size_t best = 0;
    for (std::size_t n = 1; n < values.size(); ++n)
      if (std::norm(values[n]) > std::norm(values[best])) best = n;
    return best;
  }
};

// ---------------------------------------------------------------------------
// Travel times
// ---------------------------------------------------------------------------

enum class RayMode { refracted, straight };

// One-way time from an element (in water) to a voxel. Voxels within
// `interface_guard` of the seabed, and all voxels in straight mode, use the
// straight water ray.
inline double voxel_one_way_time(const Vec3& element, const Vec3& voxel, const Scenario& s, RayMode mode,
                                 double interface_guard) {
  if (mode == RayMode::straight || voxel.z <= interface_guard) return distance(element, voxel) / s.water.sound_speed;
  return refracted_path(element, voxel, s.water.sound_speed, s.sediment.sound_speed).travel_time;
}

// Times from an element height to every voxel plane as a function of
// horizontal range, tabulated with slopes (horizontal slowness) and evaluated
// by cubic Hermite interpolation.
class RadialTimeTable {
 public:
  RadialTimeTable(double element_z, const std::vector<double>& plane_z, double rho_max, const Scenario& s,
                  RayMode mode, double interface_guard, double step)
      : element_z_(element_z), c_water_(s.water.sound_speed), step_(step) {
    const auto nodes = static_cast<std::size_t>(std::ceil(rho_max / step)) + 2;
    nodes_ = nodes;
    planes_.resize(plane_z.size());
    for (std::size_t p = 0; p < plane_z.size(); ++p) {
      Plane& pl = planes_[p];
      pl.dz = plane_z[p] - element_z;
      pl.straight = mode == RayMode::straight || plane_z[p] <= interface_guard;
      if (pl.straight) continue;
      pl.time.resize(nodes);
      pl.slope.resize(nodes);
      for (std::size_t n = 0; n < nodes; ++n) {
        const Vec3 voxel{static_cast<double>(n) * step, 0.0, plane_z[p]};
        const RayPath r = refracted_path({0.0, 0.0, element_z}, voxel, s.water.sound_speed, s.sediment.sound_speed);
        pl.time[n] = r.travel_time;
        pl.slope[n] = r.slowness;
      }
    }
  }

  [[nodiscard]] double time(std::size_t plane, double rho) const {
    const Plane& pl = planes_[plane];
    if (pl.straight) return std::sqrt(rho * rho + pl.dz * pl.dz) / c_water_;
    const double u = rho / step_;
    auto j = static_cast<std::size_t>(u);
    if (j + 1 >= nodes_) j = nodes_ - 2;
    const double t = u - static_cast<double>(j);
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * pl.time[j] + h10 * step_ * pl.slope[j] + h01 * pl.time[j + 1] + h11 * step_ * pl.slope[j + 1];
  }

  [[nodiscard]] double element_z() const { return element_z_; }

 private:
  struct Plane {
    double dz = 0.0;
    bool straight = false;
    std::vector<double> time, slope;
  };
  double element_z_;
  double c_water_;
  double step_;
  std::size_t nodes_ = 0;
  std::vector<Plane> planes_;
};

enum class TableCache { radial, direct };

// Largest horizontal distance from a point to the grid footprint.
inline double max_horizontal_reach(const VoxelGrid& g, const Vec3& p) {
  double best = 0.0;
  for (double x : {g.coordinate(0, 0), g.coordinate(0, g.dims[0] - 1)})
    for (double y : {g.coordinate(1, 0), g.coordinate(1, g.dims[1] - 1)}) best = std::max(best, std::hypot(x - p.x, y - p.y));
  return best;
}

inline std::vector<double> plane_depths(const VoxelGrid& g) {
  std::vector<double> z(g.dims[2]);
  for (std::size_t k = 0; k < g.dims[2]; ++k) z[k] = g.coordinate(2, k);
  return z;
}

// Per-voxel one-way times from an element position.
inline std::vector<double> travel_time_table(const VoxelGrid& g, const Vec3& element, const Scenario& s,
                                             TableCache policy = TableCache::radial,
                                             RayMode mode = RayMode::refracted) {
  if (!(element.z < 0.0)) throw NumericalError("travel_time_table: element must be above the seabed");
  const double guard = 0.5 * g.spacing[2];
  std::vector<double> out(g.size());
  if (policy == TableCache::direct) {
    for (std::size_t n = 0; n < out.size(); ++n) {
      const auto [i, j, k] = g.unravel(n);
      out[n] = voxel_one_way_time(element, g.position(i, j, k), s, mode, guard);
    }
    return out;
  }
  const RadialTimeTable table(element.z, plane_depths(g), max_horizontal_reach(g, element), s, mode, guard,
                              0.5 * std::min(g.spacing[0], g.spacing[1]));
  for (std::size_t n = 0; n < out.size(); ++n) {
    const auto [i, j, k] = g.unravel(n);
    const Vec3 v = g.position(i, j, k);
    out[n] = table.time(k, std::hypot(v.x - element.x, v.y - element.y));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backprojection
// ---------------------------------------------------------------------------

enum class Interpolation { linear, nearest };
enum class Normalization { none, pair_count };

struct BackprojectOptions {
  RayMode rays = RayMode::refracted;
  Interpolation interpolation = Interpolation::linear;
  Normalization normalization = Normalization::pair_count;
  double centre_frequency = 0.0;  // 0: waveform band centre
  std::size_t workers = 1;
};

namespace detail {

struct PreparedPing {
  Vec3 tx;
  std::vector<Vec3> rx;
  double start_time = 0.0;
  std::size_t samples = 0;
  std::vector<std::complex<float>> base;  // basebanded, receiver-major
};

}  // namespace detail

inline VoxelVolume backproject(const std::vector<PingRecord>& pings, const VoxelGrid& grid, const Scenario& s,
                               const BackprojectOptions& opt = {}) {
  VoxelVolume vol(grid, ValueKind::complex);
  vol.coverage.assign(grid.size(), 0);
  vol.scenario_hash = scenario_hash(s);
  if (pings.empty()) return vol;
  vol.ping_first = pings.front().ping_index;
  vol.ping_count = pings.size();

  const double fs = pings.front().sample_rate;
  const auto array = s.array_geometry();
  for (const auto& p : pings) {
    if (p.kind != SampleKind::complex) throw NumericalError("backproject: pings must be pulse-compressed (complex)");
    if (p.sample_rate != fs) throw NumericalError("backproject: mismatched sample rates across pings");
    if (p.rx_count != array.receivers.size()) throw NumericalError("backproject: receiver count does not match array");
  }
  const double f0 = opt.centre_frequency > 0.0 ? opt.centre_frequency : s.waveform.centre_frequency();
  const double w0 = two_pi * f0;

  std::vector<detail::PreparedPing> prep(pings.size());
  parallel_for(pings.size(), opt.workers, [&](std::size_t p) {
    const auto& rec = pings[p];
    auto& pp = prep[p];
    pp.tx = element_position(rec.pose, array.projectors.at(static_cast<std::size_t>(rec.tx_id)).offset);
    for (const auto& r : array.receivers) pp.rx.push_back(element_position(rec.pose, r.offset));
    pp.start_time = rec.start_time;
    pp.samples = rec.sample_count;
    pp.base.resize(rec.rx_count * rec.sample_count);
    for (std::size_t n = 0; n < rec.sample_count; ++n) {
      const std::complex<float> rot(std::polar(1.0, -w0 * rec.time_of(n)));
      for (std::size_t r = 0; r < rec.rx_count; ++r)
        pp.base[r * rec.sample_count + n] = rec.complex_at(r, n) * rot;
    }
  });

  // One radial table per distinct element height.
  const double guard = 0.5 * grid.spacing[2];
  const double step = 0.5 * std::min(grid.spacing[0], grid.spacing[1]);
  const auto planes = plane_depths(grid);
  std::map<double, double> reach;
  for (const auto& pp : prep) {
    reach[pp.tx.z] = std::max(reach[pp.tx.z], max_horizontal_reach(grid, pp.tx));
    for (const auto& r : pp.rx) reach[r.z] = std::max(reach[r.z], max_horizontal_reach(grid, r));
  }
  std::map<double, RadialTimeTable> tables;
  for (const auto& [z, rho] : reach) {
    if (!(z < 0.0)) throw NumericalError("backproject: element below the seabed");
    tables.emplace(z, RadialTimeTable(z, planes, rho, s, opt.rays, guard, step));
  }

  const std::size_t ny = grid.dims[1], nz = grid.dims[2];
  const std::size_t slab = ny * nz;
  parallel_for(grid.dims[0], opt.workers, [&](std::size_t i) {
    std::vector<std::complex<double>> acc(slab, {0.0, 0.0});
    std::vector<std::uint32_t> count(slab, 0);
    std::vector<double> t_tx(slab);
    for (const auto& pp : prep) {
      const RadialTimeTable& ttab = tables.at(pp.tx.z);
      for (std::size_t j = 0; j < ny; ++j) {
        const Vec3 v = grid.position(i, j, 0);
        const double rho = std::hypot(v.x - pp.tx.x, v.y - pp.tx.y);
        for (std::size_t k = 0; k < nz; ++k) t_tx[j * nz + k] = ttab.time(k, rho);
      }
      const double last = static_cast<double>(pp.samples - 1);
      for (std::size_t r = 0; r < pp.rx.size(); ++r) {
        const RadialTimeTable& rtab = tables.at(pp.rx[r].z);
        const std::complex<float>* series = pp.base.data() + r * pp.samples;
        for (std::size_t j = 0; j < ny; ++j) {
          const Vec3 v = grid.position(i, j, 0);
          const double rho = std::hypot(v.x - pp.rx[r].x, v.y - pp.rx[r].y);
          for (std::size_t k = 0; k < nz; ++k) {
            const std::size_t n = j * nz + k;
            const double tau = t_tx[n] + rtab.time(k, rho);
            const double u = (tau - pp.start_time) * fs;
            if (!(u >= 0.0 && u <= last)) continue;
            std::complex<double> val;
            if (opt.interpolation == Interpolation::nearest) {
              val = std::complex<double>(series[static_cast<std::size_t>(std::llround(u))]);
            } else {
              const auto m = static_cast<std::size_t>(u);
              const double a = u - static_cast<double>(m);
              const std::complex<double> s0(series[m]);
              const std::complex<double> s1(m + 1 < pp.samples ? series[m + 1] : series[m]);
              val = s0 + a * (s1 - s0);
            }
            acc[n] += val * std::polar(1.0, w0 * tau);
            ++count[n];
          }
        }
      }
    }
    for (std::size_t n = 0; n < slab; ++n) {
      const std::size_t g = i * slab + n;
      vol.coverage[g] = count[n];
      cplx v = acc[n];
      if (opt.normalization == Normalization::pair_count && count[n] > 0) v /= static_cast<double>(count[n]);
      vol.values[g] = v;
    }
  });
  return vol;
}

// ---------------------------------------------------------------------------
// Volume files
// ---------------------------------------------------------------------------

inline constexpr char kVolumeMagic[8] = {'S', 'S', 'V', 'O', 'L', 'U', 'M', 'E'};
inline constexpr std::uint32_t kVolumeVersion = 1;

namespace detail {
template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError(path + ": truncated or corrupt file");
  return v;
}
}  // namespace detail

inline std::string volume_sidecar_text(const VoxelVolume& v) {
  std::string out;
  char buf[256];
  auto line = [&](const char* fmt, auto... a) {
    std::snprintf(buf, sizeof buf, fmt, a...);
    out += buf;
  };
  line("format = subsonar-volume\nversion = %u\n", kVolumeVersion);
  line("dims = %zu %zu %zu\n", v.grid.dims[0], v.grid.dims[1], v.grid.dims[2]);
  line("origin_m = %.12g %.12g %.12g\n", v.grid.origin.x, v.grid.origin.y, v.grid.origin.z);
  line("spacing_m = %.12g %.12g %.12g\n", v.grid.spacing[0], v.grid.spacing[1], v.grid.spacing[2]);
  line("value_kind = %s\n", v.kind == ValueKind::complex ? "complex" : "real");
  line("layout = z fastest, then y, then x; float32%s\n", v.kind == ValueKind::complex ? " (re, im) pairs" : "");
  line("scenario_hash = %016llx\n", static_cast<unsigned long long>(v.scenario_hash));
  line("ping_first = %llu\nping_count = %llu\n", static_cast<unsigned long long>(v.ping_first),
       static_cast<unsigned long long>(v.ping_count));
  out += "axes = x along-track (m), y cross-track (m), z depth below seabed (m)\n";
  return out;
}

inline void write_volume(const VoxelVolume& v, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path + ": cannot open for writing");
  os.write(kVolumeMagic, sizeof kVolumeMagic);
  detail::put(os, kVolumeVersion);
  detail::put(os, static_cast<std::uint32_t>(v.kind));
  for (auto d : v.grid.dims) detail::put(os, static_cast<std::uint64_t>(d));
  for (double o : {v.grid.origin.x, v.grid.origin.y, v.grid.origin.z}) detail::put(os, o);
  for (double sp : v.grid.spacing) detail::put(os, sp);
  detail::put(os, v.scenario_hash);
  detail::put(os, v.ping_first);
  detail::put(os, v.ping_count);
  std::vector<float> buf;
  buf.reserve(v.values.size() * 2);
  for (const auto& c : v.values) {
    buf.push_back(static_cast<float>(c.real()));
    if (v.kind == ValueKind::complex) buf.push_back(static_cast<float>(c.imag()));
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw IoError(path + ": write failed");
  std::ofstream side(path + ".txt");
  if (!side) throw IoError(path + ".txt: cannot open for writing");
  side << volume_sidecar_text(v);
}

inline VoxelVolume read_volume(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path + ": cannot open");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::string(magic, 8) != std::string(kVolumeMagic, 8)) throw IoError(path + ": not a volume file");
  if (detail::get<std::uint32_t>(is, path) != kVolumeVersion) throw IoError(path + ": unsupported volume version");
  const auto kind = detail::get<std::uint32_t>(is, path);
  if (kind > 1) throw IoError(path + ": bad value kind");
  VoxelGrid g;
  for (auto& d : g.dims) d = detail::get<std::uint64_t>(is, path);
  g.origin.x = detail::get<double>(is, path);
  g.origin.y = detail::get<double>(is, path);
  g.origin.z = detail::get<double>(is, path);
  for (auto& sp : g.spacing) sp = detail::get<double>(is, path);
  if (g.size() == 0 || g.size() > (std::size_t{1} << 34)) throw IoError(path + ": implausible dimensions");
  VoxelVolume v(g, static_cast<ValueKind>(kind));
  v.scenario_hash = detail::get<std::uint64_t>(is, path);
  v.ping_first = detail::get<std::uint64_t>(is, path);
  v.ping_count = detail::get<std::uint64_t>(is, path);
  const std::size_t per = v.kind == ValueKind::complex ? 2 : 1;
  std::vector<float> buf(g.size() * per);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is) throw IoError(path + ": truncated volume data");
  for (std::size_t n = 0; n < g.size(); ++n)
    v.values[n] = per == 2 ? cplx(buf[2 * n], buf[2 * n + 1]) : cplx(buf[n], 0.0);
  return v;
}

}  // namespace subsonar

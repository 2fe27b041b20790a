#pragma once

// Post-processing of beamformed volumes: depth gain, median background
// estimation and normalisation, dynamic range compression, projections and
// slices, and graymap output.

#include <ext/pb_ds/assoc_container.hpp>
#include <ext/pb_ds/tree_policy.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "subsonar/beamform.hpp"
#include "subsonar/core.hpp"

namespace subsonar {

inline VoxelVolume depth_gain(const VoxelVolume& v, double rate_db_per_m) {
  VoxelVolume out = v;
  for (std::size_t k = 0; k < v.grid.dims[2]; ++k) {
    const double z = v.grid.coordinate(2, k);
    if (z < 0.0) continue;
    const double g = db_to_amplitude(rate_db_per_m * z);
    for (std::size_t i = 0; i < v.grid.dims[0]; ++i)
      for (std::size_t j = 0; j < v.grid.dims[1]; ++j) out.at(i, j, k) *= g;
  }
  return out;
}

// Window sizes in voxels for a kernel given in metres per axis (x, y, z).
inline std::array<std::size_t, 3> kernel_voxels(const VoxelGrid& g, const Vec3& kernel_m) {
  const std::array<double, 3> k{kernel_m.x, kernel_m.y, kernel_m.z};
  std::array<std::size_t, 3> n{};
  for (std::size_t a = 0; a < 3; ++a) {
    const long long v = std::llround(k[a] / g.spacing[a]);
    if (v < 3) throw ValidationError("kernel", "median kernel must span at least 3 voxels on every axis");
    n[a] = static_cast<std::size_t>(v);
  }
  return n;
}

// Default kernel: 1.2 m along-track, 0.2 m cross-track, 0.1 m in depth.
inline const Vec3 kDefaultMedianKernel{1.2, 0.2, 0.1};

namespace detail {

// Window [i - lo, i + hi] with lo + hi + 1 = n, clamped to [0, dim).
inline std::pair<std::size_t, std::size_t> window(std::size_t i, std::size_t n, std::size_t dim) {
  const std::size_t lo = n / 2, hi = n - 1 - n / 2;
  const std::size_t a = i >= lo ? i - lo : 0;
  const std::size_t b = std::min(dim - 1, i + hi);
  return {a, b};
}

using OrderTree = __gnu_pbds::tree<std::pair<double, std::size_t>, __gnu_pbds::null_type,
                                   std::less<std::pair<double, std::size_t>>, __gnu_pbds::rb_tree_tag,
                                   __gnu_pbds::tree_order_statistics_node_update>;

inline double tree_median(const OrderTree& t) {
  const std::size_t m = t.size();
  const double hi = t.find_by_order(m / 2)->first;
  if (m % 2 == 1) return hi;
  return 0.5 * (hi + t.find_by_order(m / 2 - 1)->first);
}

}  // namespace detail

// Per-voxel median of |v|^2 over a window clamped at the borders. The window
// slides along x with an order-statistics tree per (y, z) lane.
inline VoxelVolume median_background(const VoxelVolume& v, const Vec3& kernel_m = kDefaultMedianKernel,
                                     std::size_t workers = 1) {
  const auto kn = kernel_voxels(v.grid, kernel_m);
  const auto& d = v.grid.dims;
  VoxelVolume bg(v.grid, ValueKind::real);
  bg.scenario_hash = v.scenario_hash;
  bg.ping_first = v.ping_first;
  bg.ping_count = v.ping_count;
  std::vector<double> inten(v.values.size());
  for (std::size_t n = 0; n < inten.size(); ++n) inten[n] = std::norm(v.values[n]);
  parallel_for(d[1] * d[2], workers, [&](std::size_t lane) {
    const std::size_t j = lane / d[2], k = lane % d[2];
    const auto [y0, y1] = detail::window(j, kn[1], d[1]);
    const auto [z0, z1] = detail::window(k, kn[2], d[2]);
    detail::OrderTree tree;
    auto plane = [&](std::size_t i, bool add) {
      for (std::size_t y = y0; y <= y1; ++y)
        for (std::size_t z = z0; z <= z1; ++z) {
          const std::size_t n = v.grid.index(i, y, z);
          if (add) tree.insert({inten[n], n});
          else tree.erase({inten[n], n});
        }
    };
    std::size_t cur0 = 0, cur1 = 0;
    bool empty = true;
    for (std::size_t i = 0; i < d[0]; ++i) {
      const auto [x0, x1] = detail::window(i, kn[0], d[0]);
      if (empty) {
        for (std::size_t x = x0; x <= x1; ++x) plane(x, true);
        empty = false;
      } else {
        for (std::size_t x = cur0; x < x0; ++x) plane(x, false);
        for (std::size_t x = cur1 + 1; x <= x1; ++x) plane(x, true);
      }
      cur0 = x0;
      cur1 = x1;
      bg.values[v.grid.index(i, j, k)] = detail::tree_median(tree);
    }
  });
  return bg;
}

// Nearest-rank percentile (p in [0, 100]) of a sample.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw NumericalError("percentile of an empty sample");
  const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()) - 1e-9);
  const std::size_t idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size()))) - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx), values.end());
  return values[idx];
}

inline constexpr double kBackgroundFloorPercentile = 1.0;
inline constexpr double kMinimumDb = -300.0;

// Intensity ratio |v|^2 / bg in dB. The background is floored at the 1st
// percentile of the volume's intensity.
inline VoxelVolume normalize(const VoxelVolume& v, const VoxelVolume& bg) {
  if (!(v.grid == bg.grid)) throw ValidationError("grid", "volume and background grids differ");
  std::vector<double> inten(v.values.size());
  for (std::size_t n = 0; n < inten.size(); ++n) inten[n] = std::norm(v.values[n]);
  double floor = percentile(inten, kBackgroundFloorPercentile);
  if (!(floor > 0.0)) {
    floor = 0.0;
    for (double x : inten)
      if (x > 0.0 && (floor == 0.0 || x < floor)) floor = x;
    if (floor == 0.0) floor = 1.0;
  }
  VoxelVolume out(v.grid, ValueKind::real);
  out.scenario_hash = v.scenario_hash;
  out.ping_first = v.ping_first;
  out.ping_count = v.ping_count;
  for (std::size_t n = 0; n < inten.size(); ++n) {
    const double b = std::max(bg.values[n].real(), floor);
    out.values[n] = inten[n] > 0.0 ? std::max(kMinimumDb, 10.0 * std::log10(inten[n] / b)) : kMinimumDb;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dynamic range compression
// ---------------------------------------------------------------------------

struct DrcParams {
  double p_low = 50.0;
  double p_high = 99.9;
  double gamma = 0.5;
};

struct DrcLimits {
  double low = 0.0;
  double high = 1.0;
  [[nodiscard]] bool degenerate() const { return !(high > low); }
};

inline DrcLimits drc_limits(const std::vector<double>& values, const DrcParams& p = {}) {
  return {percentile(values, p.p_low), percentile(values, p.p_high)};
}

inline double drc_map(double x, const DrcLimits& lim, double gamma) {
  if (lim.degenerate()) return 0.5;
  const double u = (std::clamp(x, lim.low, lim.high) - lim.low) / (lim.high - lim.low);
  return std::pow(u, gamma);
}

inline std::vector<double> real_values(const VoxelVolume& v) {
  std::vector<double> out(v.values.size());
  for (std::size_t n = 0; n < out.size(); ++n)
    out[n] = v.kind == ValueKind::real ? v.values[n].real() : std::abs(v.values[n]);
  return out;
}

struct DrcResult {
  VoxelVolume volume;
  DrcLimits limits;
  bool degenerate = false;  // percentiles coincided; output is a flat 0.5
};

inline DrcResult drc(const VoxelVolume& v, const DrcParams& p = {}) {
  const auto vals = real_values(v);
  DrcResult r;
  r.limits = drc_limits(vals, p);
  r.degenerate = r.limits.degenerate();
  r.volume = VoxelVolume(v.grid, ValueKind::real);
  r.volume.scenario_hash = v.scenario_hash;
  r.volume.ping_first = v.ping_first;
  r.volume.ping_count = v.ping_count;
  for (std::size_t n = 0; n < vals.size(); ++n) r.volume.values[n] = drc_map(vals[n], r.limits, p.gamma);
  return r;
}

// ---------------------------------------------------------------------------
// Projections and slices
// ---------------------------------------------------------------------------

enum class ProductKind { slice, mip };

inline const char* axis_name(int axis) { return axis == 0 ? "x" : axis == 1 ? "y" : "z"; }

inline int parse_axis(const std::string& s) {
  if (s == "x") return 0;
  if (s == "y") return 1;
  if (s == "z") return 2;
  throw ValidationError("axis", "unknown axis '" + s + "' (expected x, y or z)");
}

// 2D image over the two remaining axes: rows follow the lower-numbered axis,
// columns the higher one.
struct ImageProduct {
  ProductKind kind = ProductKind::mip;
  int axis = 2;
  double coordinate = 0.0;  // slice position (slices only)
  int row_axis = 0, col_axis = 1;
  std::size_t rows = 0, cols = 0;
  double row_origin = 0.0, row_step = 1.0, col_origin = 0.0, col_step = 1.0;
  std::vector<double> data;

  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

namespace detail {

inline ImageProduct blank_product(const VoxelGrid& g, int axis) {
  if (axis < 0 || axis > 2) throw ValidationError("axis", "axis must be 0, 1 or 2");
  ImageProduct p;
  p.axis = axis;
  p.row_axis = axis == 0 ? 1 : 0;
  p.col_axis = axis == 2 ? 1 : 2;
  p.rows = g.dims[static_cast<std::size_t>(p.row_axis)];
  p.cols = g.dims[static_cast<std::size_t>(p.col_axis)];
  p.row_origin = g.coordinate(p.row_axis, 0);
  p.col_origin = g.coordinate(p.col_axis, 0);
  p.row_step = g.spacing[static_cast<std::size_t>(p.row_axis)];
  p.col_step = g.spacing[static_cast<std::size_t>(p.col_axis)];
  p.data.assign(p.rows * p.cols, 0.0);
  return p;
}

inline std::size_t voxel_of(const VoxelGrid& g, int axis, std::size_t a, std::size_t r, std::size_t c) {
  std::array<std::size_t, 3> idx{};
  idx[static_cast<std::size_t>(axis)] = a;
  idx[axis == 0 ? 1 : 0] = r;
  idx[axis == 2 ? 1 : 2] = c;
  return g.index(idx[0], idx[1], idx[2]);
}

}  // namespace detail

inline ImageProduct mip(const VoxelVolume& v, int axis) {
  auto p = detail::blank_product(v.grid, axis);
  p.kind = ProductKind::mip;
  const auto vals = real_values(v);
  const std::size_t n = v.grid.dims[static_cast<std::size_t>(axis)];
  for (std::size_t r = 0; r < p.rows; ++r)
    for (std::size_t c = 0; c < p.cols; ++c) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < n; ++a) best = std::max(best, vals[detail::voxel_of(v.grid, axis, a, r, c)]);
      p.data[r * p.cols + c] = best;
    }
  return p;
}

inline ImageProduct slice(const VoxelVolume& v, int axis, double world_coord) {
  auto p = detail::blank_product(v.grid, axis);
  p.kind = ProductKind::slice;
  const std::size_t a = v.grid.nearest_index(axis, world_coord);
  p.coordinate = v.grid.coordinate(axis, a);
  const auto vals = real_values(v);
  for (std::size_t r = 0; r < p.rows; ++r)
    for (std::size_t c = 0; c < p.cols; ++c) p.data[r * p.cols + c] = vals[detail::voxel_of(v.grid, axis, a, r, c)];
  return p;
}

// Binary graymap. Values in [0, 1] map directly; anything else is scaled
// between the product's minimum and maximum.
inline void write_pgm(const ImageProduct& p, const std::string& path, int bits = 8) {
  if (bits != 8 && bits != 16) throw ValidationError("bits", "graymap depth must be 8 or 16");
  double lo = 0.0, hi = 1.0;
  const auto [mn, mx] = std::minmax_element(p.data.begin(), p.data.end());
  if (!p.data.empty() && (*mn < 0.0 || *mx > 1.0)) {
    lo = *mn;
    hi = *mx;
  }
  const int maxval = bits == 8 ? 255 : 65535;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path + ": cannot open for writing");
  os << "P5\n" << p.cols << ' ' << p.rows << '\n' << maxval << '\n';
  for (double x : p.data) {
    const double u = hi > lo ? std::clamp((x - lo) / (hi - lo), 0.0, 1.0) : 0.5;
    const auto q = static_cast<unsigned>(std::lround(u * maxval));
    if (bits == 8) {
      os.put(static_cast<char>(q));
    } else {
      os.put(static_cast<char>(q >> 8));
      os.put(static_cast<char>(q & 0xff));
    }
  }
  if (!os) throw IoError(path + ": write failed");
  std::ofstream side(path + ".txt");
  if (!side) throw IoError(path + ".txt: cannot open for writing");
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "kind = %s\naxis = %s\n%s"
                "rows = %zu\nrow_axis = %s\nrow_origin_m = %.12g\nrow_step_m = %.12g\n"
                "cols = %zu\ncol_axis = %s\ncol_origin_m = %.12g\ncol_step_m = %.12g\n"
                "bits = %d\nvalue_at_0 = %.12g\nvalue_at_max = %.12g\n",
                p.kind == ProductKind::mip ? "mip" : "slice", axis_name(p.axis),
                p.kind == ProductKind::slice ? ("coordinate_m = " + std::to_string(p.coordinate) + "\n").c_str() : "",
                p.rows, axis_name(p.row_axis), p.row_origin, p.row_step, p.cols, axis_name(p.col_axis), p.col_origin,
                p.col_step, bits, lo, hi);
  side << buf;
}

}  // namespace subsonar

// subsonar: simulate, beamform, post-process and validate sub-bottom imagery.
//
// Exit codes: 0 success, 2 usage, 3 validation failure, 4 I/O, 5 numerical.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "subsonar/beamform.hpp"
#include "subsonar/imageproc.hpp"
#include "subsonar/records.hpp"
#include "subsonar/scenario_io.hpp"
#include "subsonar/synth.hpp"
#include "subsonar/validation.hpp"

namespace fs = std::filesystem;
using namespace subsonar;

namespace {

constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kValidation = 3, kIo = 4, kNumerical = 5 };

// Error raised by a named pipeline stage.
struct StageError : std::runtime_error {
  StageError(std::string stage_name, int exit_code, const std::string& what)
      : std::runtime_error(what), stage(std::move(stage_name)), code(exit_code) {}
  std::string stage;
  int code;
};

std::size_t env_workers(std::size_t fallback) {
  if (const char* v = std::getenv("SUBSONAR_WORKERS")) {
    try {
      const long long n = std::stoll(v);
      if (n > 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    throw StageError("environment", kUsage, std::string("SUBSONAR_WORKERS: expected a positive integer, got '") + v + "'");
  }
  return fallback;
}

std::string env_out_dir(const std::string& fallback) {
  const char* v = std::getenv("SUBSONAR_OUT_DIR");
  return v && *v ? std::string(v) : fallback;
}

// Runs `fn`, translating library errors into a stage-named StageError.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ParseError& e) {
    throw StageError(name, kValidation, e.what());
  } catch (const ValidationError& e) {
    throw StageError(name, kValidation, e.what());
  } catch (const IoError& e) {
    throw StageError(name, kIo, e.what());
  } catch (const NumericalError& e) {
    throw StageError(name, kNumerical, e.what());
  } catch (const std::bad_alloc&) {
    throw StageError(name, kNumerical, "out of memory");
  }
}

struct RunManifest {
  std::uint64_t scenario_hash = 0;
  bool has_scenario = false;
  std::string command;
  std::vector<std::string> inputs, outputs;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;

  void write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError(path + ": cannot open for writing");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(scenario_hash));
    os << "# subsonar run manifest\n";
    os << "tool_version = " << kToolVersion << "\n";
    os << "command = " << command << "\n";
    if (has_scenario) os << "scenario_hash = " << buf << "\n";
    os << "seed = " << seed << "\n";
    for (const auto& p : inputs) os << "input = " << p << "\n";
    for (const auto& p : outputs) os << "output = " << p << "\n";
    char t[64];
    std::snprintf(t, sizeof t, "%.3f", wall_seconds);
    os << "wall_time_s = " << t << "\n";
    const std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    os << "finished_at = " << stamp << "\n";
    if (!os) throw IoError(path + ": write failed");
  }
};

std::string joined_command(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string out_dir;
  std::size_t workers = 0;
  bool compressed = false;
};

int cmd_simulate(const SimulateArgs& a, const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario s = stage("load scenario", [&] { return load_scenario(a.scenario); });
  stage("validate scenario", [&] {
    validate(s);
    return 0;
  });
  const std::string out = env_out_dir(a.out_dir);
  if (out.empty()) throw StageError("simulate", kUsage, "no output directory (use --out or SUBSONAR_OUT_DIR)");
  stage("create output directory", [&] {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError(out + ": " + ec.message());
    return 0;
  });
  const std::size_t workers = env_workers(a.workers ? a.workers : default_workers());
  Manifest m;
  m.scenario_hash = scenario_hash(s);
  m.rng_seed = s.rng_seed;
  RunManifest run;
  run.scenario_hash = m.scenario_hash;
  run.has_scenario = true;
  run.command = command;
  run.seed = s.rng_seed;
  run.inputs.push_back(a.scenario);
  const Waveform w = make_waveform(s.waveform);
  stage("synthesis", [&] {
    simulate_survey(
        s,
        [&](PingRecord&& r) {
          const PingRecord rec = a.compressed ? matched_filter(r, w) : std::move(r);
          const std::string name = ping_file_name(rec);
          write_ping(rec, (fs::path(out) / name).string());
          m.entries.push_back({rec.ping_index, rec.location_index, rec.tx_id, name});
          run.outputs.push_back((fs::path(out) / name).string());
        },
        workers);
    return 0;
  });
  stage("write manifest", [&] {
    write_manifest(m, out);
    run.outputs.push_back((fs::path(out) / kManifestName).string());
    run.wall_seconds = seconds_since(t0);
    run.write((fs::path(out) / "run_manifest.txt").string());
    return 0;
  });
  std::printf("simulate: %zu ping files written to %s\n", m.entries.size(), out.c_str());
  return kOk;
}

// ---------------------------------------------------------------------------
// beamform
// ---------------------------------------------------------------------------

struct BeamformArgs {
  std::string ping_dir;
  std::string scenario;
  std::string output;
  std::vector<double> x_range, y_range, z_range;
  double spacing = 0.0;
  bool straight_ray = false;
  bool nearest = false;
  bool no_normalize = false;
  std::size_t workers = 0;
};

std::vector<PingRecord> load_pings(const std::string& dir, const Scenario& s) {
  const Manifest m = stage("read manifest", [&] { return read_manifest(dir); });
  if (m.scenario_hash != scenario_hash(s))
    std::fprintf(stderr, "warning: %s: scenario hash differs from the one used to simulate these pings\n",
                 (fs::path(dir) / kManifestName).string().c_str());
  std::vector<PingRecord> pings(m.entries.size());
  const Waveform w = make_waveform(s.waveform);
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const std::string path = (fs::path(dir) / m.entries[i].file).string();
    PingRecord r = stage("read pings", [&] { return read_ping(path); });
    if (r.kind == SampleKind::real) {
      try {
        r = matched_filter(r, w);
      } catch (const Error& e) {
        throw StageError("pulse compression", kNumerical, path + ": " + e.what());
      }
    }
    pings[i] = std::move(r);
  }
  return pings;
}

int cmd_beamform(const BeamformArgs& a, const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario s = stage("load scenario", [&] { return load_scenario(a.scenario); });
  stage("validate scenario", [&] {
    validate(s);
    return 0;
  });
  const std::size_t workers = env_workers(a.workers ? a.workers : default_workers());
  ImageConfig im = s.image;
  auto apply = [](const std::vector<double>& r, double& lo, double& hi, const char* name) {
    if (r.empty()) return;
    if (r.size() != 2 || !(r[1] > r[0]))
      throw StageError("grid", kUsage, std::string("--") + name + " expects two increasing values");
    lo = r[0];
    hi = r[1];
  };
  apply(a.x_range, im.x_min, im.x_max, "x-range");
  apply(a.y_range, im.y_min, im.y_max, "y-range");
  apply(a.z_range, im.z_min, im.z_max, "z-range");
  if (a.spacing != 0.0) im.spacing = a.spacing;
  const VoxelGrid grid = stage("grid", [&] { return make_grid(im); });

  const auto pings = load_pings(a.ping_dir, s);
  BackprojectOptions opt;
  opt.rays = a.straight_ray ? RayMode::straight : RayMode::refracted;
  opt.interpolation = a.nearest ? Interpolation::nearest : Interpolation::linear;
  opt.normalization = a.no_normalize ? Normalization::none : Normalization::pair_count;
  opt.workers = workers;
  const VoxelVolume vol = stage("backprojection", [&] { return backproject(pings, grid, s, opt); });
  stage("write volume", [&] {
    const fs::path parent = fs::path(a.output).parent_path();
    if (!parent.empty()) {
      std::error_code ec;
      fs::create_directories(parent, ec);
    }
    write_volume(vol, a.output);
    RunManifest run;
    run.scenario_hash = vol.scenario_hash;
    run.has_scenario = true;
    run.command = command;
    run.seed = s.rng_seed;
    run.inputs = {a.scenario, a.ping_dir};
    run.outputs = {a.output, a.output + ".txt"};
    run.wall_seconds = seconds_since(t0);
    run.write(a.output + ".run.txt");
    return 0;
  });
  std::printf("beamform: %zu x %zu x %zu volume from %zu pings written to %s\n", grid.dims[0], grid.dims[1],
              grid.dims[2], pings.size(), a.output.c_str());
  return kOk;
}

// ---------------------------------------------------------------------------
// imageproc
// ---------------------------------------------------------------------------

struct ImageprocArgs {
  std::string volume;
  std::string out_dir;
  double gain = 0.0;
  bool gain_set = false;
  bool median = false;
  std::vector<double> kernel;
  bool normalize = false;
  bool drc = false;
  double p_low = 50.0, p_high = 99.9, gamma = 0.5;
  std::string mip_axes;
  std::vector<std::string> slices;
  bool save_volume = false;
  int bits = 8;
  std::size_t workers = 0;
};

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_imageproc(const ImageprocArgs& a, const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool any_product = !a.mip_axes.empty() || !a.slices.empty() || a.save_volume;
  if (!any_product)
    throw StageError("imageproc", kUsage,
                     "no image products requested; use at least one of --mip, --slice or --save-volume");
  const std::size_t workers = env_workers(a.workers ? a.workers : default_workers());
  const std::string out = env_out_dir(a.out_dir);
  if (out.empty()) throw StageError("imageproc", kUsage, "no output directory (use --out or SUBSONAR_OUT_DIR)");
  stage("create output directory", [&] {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError(out + ": " + ec.message());
    return 0;
  });

  VoxelVolume v = stage("read volume", [&] { return read_volume(a.volume); });
  if (a.gain_set) v = stage("depth gain", [&] { return depth_gain(v, a.gain); });
  Vec3 kernel = kDefaultMedianKernel;
  if (!a.kernel.empty()) {
    if (a.kernel.size() != 3) throw StageError("median", kUsage, "--kernel expects three values (x, y, z in metres)");
    kernel = {a.kernel[0], a.kernel[1], a.kernel[2]};
  }
  if (a.normalize) {
    const VoxelVolume bg = stage("median background", [&] { return median_background(v, kernel, workers); });
    v = stage("normalize", [&] { return normalize(v, bg); });
  } else if (a.median) {
    v = stage("median background", [&] { return median_background(v, kernel, workers); });
  }
  if (a.drc) {
    DrcParams p;
    p.p_low = a.p_low;
    p.p_high = a.p_high;
    p.gamma = a.gamma;
    const DrcResult r = stage("dynamic range compression", [&] { return drc(v, p); });
    if (r.degenerate) std::fprintf(stderr, "warning: drc percentiles coincide; output is a flat 0.5\n");
    v = r.volume;
  }

  RunManifest run;
  run.scenario_hash = v.scenario_hash;
  run.has_scenario = true;
  run.command = command;
  run.inputs.push_back(a.volume);
  auto emit = [&](const ImageProduct& p, const std::string& name) {
    const std::string path = (fs::path(out) / name).string();
    stage("write image", [&] {
      write_pgm(p, path, a.bits);
      return 0;
    });
    run.outputs.push_back(path);
    run.outputs.push_back(path + ".txt");
  };
  for (const auto& ax : split_list(a.mip_axes, ',')) {
    const int axis = stage("mip", [&] { return parse_axis(ax); });
    emit(stage("mip", [&] { return mip(v, axis); }), std::string("mip_") + axis_name(axis) + ".pgm");
  }
  for (const auto& spec : a.slices) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw StageError("slice", kUsage, "--slice expects axis=coordinate, got '" + spec + "'");
    const int axis = stage("slice", [&] { return parse_axis(spec.substr(0, eq)); });
    double coord = 0.0;
    try {
      coord = std::stod(spec.substr(eq + 1));
    } catch (const std::exception&) {
      throw StageError("slice", kUsage, "--slice: bad coordinate in '" + spec + "'");
    }
    const ImageProduct p = stage("slice", [&] { return slice(v, axis, coord); });
    char name[96];
    std::snprintf(name, sizeof name, "slice_%s_%.3f.pgm", axis_name(axis), p.coordinate);
    emit(p, name);
  }
  if (a.save_volume) {
    const std::string path = (fs::path(out) / "processed.vol").string();
    stage("write volume", [&] {
      write_volume(v, path);
      return 0;
    });
    run.outputs.push_back(path);
    run.outputs.push_back(path + ".txt");
  }
  run.wall_seconds = seconds_since(t0);
  stage("write manifest", [&] {
    run.write((fs::path(out) / "run_manifest.txt").string());
    return 0;
  });
  std::printf("imageproc: %zu files written to %s\n", run.outputs.size(), out.c_str());
  return kOk;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::string suite;
  std::size_t seeds = 0;
  std::uint64_t base_seed = 1;
  std::string report;
  std::size_t workers = 0;
};

int cmd_validate(const ValidateArgs& a) {
  ValidationOptions opt;
  opt.seeds = a.seeds;
  opt.base_seed = a.base_seed;
  opt.workers = env_workers(a.workers ? a.workers : default_workers());
  const bool all = a.suite == "all";
  std::vector<std::string> names = all ? suite_names() : std::vector<std::string>{a.suite};
  bool ok = true;
  std::string text;
  for (const auto& n : names) {
    const SuiteReport r = stage("validate " + n, [&] { return run_suite(n, opt); });
    const std::string t = r.to_text();
    std::fputs(t.c_str(), stdout);
    std::fflush(stdout);
    text += t;
    ok = ok && r.passed();
  }
  if (!a.report.empty()) {
    stage("write report", [&] {
      std::ofstream os(a.report);
      if (!os) throw IoError(a.report + ": cannot open for writing");
      os << text;
      if (!os) throw IoError(a.report + ": write failed");
      return 0;
    });
  }
  return ok ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subsonar: sub-bottom imaging sonar simulation and processing"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  const std::string command = joined_command(argc, argv);

  SimulateArgs sim;
  auto* s_cmd = app.add_subcommand("simulate", "synthesise ping records for a scenario");
  s_cmd->add_option("scenario", sim.scenario, "scenario file")->required()->check(CLI::ExistingFile);
  s_cmd->add_option("-o,--out", sim.out_dir, "output directory (env SUBSONAR_OUT_DIR)");
  s_cmd->add_option("-w,--workers", sim.workers, "worker threads (env SUBSONAR_WORKERS; default all cores)");
  s_cmd->add_flag("--compressed", sim.compressed, "store pulse-compressed (analytic) records");

  BeamformArgs bf;
  auto* b_cmd = app.add_subcommand("beamform", "backproject ping records onto a voxel grid");
  b_cmd->add_option("pings", bf.ping_dir, "directory holding manifest.txt and ping files")
      ->required()
      ->check(CLI::ExistingDirectory);
  b_cmd->add_option("scenario", bf.scenario, "scenario file")->required()->check(CLI::ExistingFile);
  b_cmd->add_option("-o,--out", bf.output, "output volume file")->required();
  b_cmd->add_option("--x-range", bf.x_range, "along-track extent: min max (m)")->expected(2);
  b_cmd->add_option("--y-range", bf.y_range, "cross-track extent: min max (m)")->expected(2);
  b_cmd->add_option("--z-range", bf.z_range, "depth extent: min max (m)")->expected(2);
  b_cmd->add_option("--spacing", bf.spacing, "voxel spacing (m)");
  b_cmd->add_flag("--straight-ray", bf.straight_ray, "straight rays at water sound speed (no refraction)");
  b_cmd->add_flag("--nearest", bf.nearest, "nearest-sample interpolation");
  b_cmd->add_flag("--no-normalize", bf.no_normalize, "do not divide by the contributing pair count");
  b_cmd->add_option("-w,--workers", bf.workers, "worker threads (env SUBSONAR_WORKERS; default all cores)");

  ImageprocArgs ip;
  auto* i_cmd = app.add_subcommand("imageproc", "gain, background normalisation, compression, projections");
  i_cmd->add_option("volume", ip.volume, "input volume file")->required()->check(CLI::ExistingFile);
  i_cmd->add_option("-o,--out", ip.out_dir, "output directory (env SUBSONAR_OUT_DIR)");
  auto* gain_opt = i_cmd->add_option("--gain", ip.gain, "depth-varying gain (dB/m below the interface)");
  i_cmd->add_flag("--median", ip.median, "replace the volume by its median background estimate");
  i_cmd->add_option("--kernel", ip.kernel, "median kernel: x y z (m)")->expected(3);
  i_cmd->add_flag("--normalize", ip.normalize, "normalise by the median background (dB)");
  i_cmd->add_flag("--drc", ip.drc, "percentile clip and gamma map to [0, 1]");
  i_cmd->add_option("--p-low", ip.p_low, "lower clip percentile");
  i_cmd->add_option("--p-high", ip.p_high, "upper clip percentile");
  i_cmd->add_option("--gamma", ip.gamma, "gamma exponent");
  i_cmd->add_option("--mip", ip.mip_axes, "maximum intensity projections along axes, e.g. x,y,z");
  i_cmd->add_option("--slice", ip.slices, "planar slice, axis=coordinate (m); repeatable");
  i_cmd->add_flag("--save-volume", ip.save_volume, "also write the processed volume");
  i_cmd->add_option("--bits", ip.bits, "graymap depth")->check(CLI::IsMember({8, 16}));
  i_cmd->add_option("-w,--workers", ip.workers, "worker threads (env SUBSONAR_WORKERS; default all cores)");

  ValidateArgs va;
  auto* v_cmd = app.add_subcommand("validate", "run a consistency suite and report key=value results");
  std::vector<std::string> choices = suite_names();
  choices.push_back("all");
  v_cmd->add_option("suite", va.suite, "suite name")->required()->check(CLI::IsMember(choices));
  v_cmd->add_option("--seeds", va.seeds, "ensemble size (0: suite default)");
  v_cmd->add_option("--base-seed", va.base_seed, "base seed for the ensemble");
  v_cmd->add_option("--report", va.report, "also write the report to this file");
  v_cmd->add_option("-w,--workers", va.workers, "worker threads (env SUBSONAR_WORKERS; default all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  ip.gain_set = gain_opt->count() > 0;

  try {
    if (*s_cmd) return cmd_simulate(sim, command);
    if (*b_cmd) return cmd_beamform(bf, command);
    if (*i_cmd) return cmd_imageproc(ip, command);
    if (*v_cmd) return cmd_validate(va);
  } catch (const StageError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.stage.c_str(), e.what());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
  return kUsage;
}

#pragma once

// Ping record files: one little-endian binary file per transmit event plus a
// text manifest listing them in event order.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "subsonar/beamform.hpp"
#include "subsonar/core.hpp"
#include "subsonar/synth.hpp"

namespace subsonar {

inline constexpr char kPingMagic[8] = {'S', 'S', 'P', 'I', 'N', 'G', '0', '1'};
inline constexpr std::uint32_t kPingVersion = 1;

// Header: magic, version, ping index, tx id, pose (x y z roll pitch yaw),
// sample rate, start time, rx count, sample count, then sample kind, seed and
// location index. Samples follow receiver by receiver as float32 (reals for
// raw records, (re, im) pairs for compressed ones).
inline void write_ping(const PingRecord& r, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path + ": cannot open for writing");
  os.write(kPingMagic, sizeof kPingMagic);
  detail::put(os, kPingVersion);
  detail::put(os, static_cast<std::uint64_t>(r.ping_index));
  detail::put(os, static_cast<std::int32_t>(r.tx_id));
  for (double v : {r.pose.position.x, r.pose.position.y, r.pose.position.z, r.pose.roll, r.pose.pitch, r.pose.yaw})
    detail::put(os, v);
  detail::put(os, r.sample_rate);
  detail::put(os, r.start_time);
  detail::put(os, static_cast<std::uint64_t>(r.rx_count));
  detail::put(os, static_cast<std::uint64_t>(r.sample_count));
  detail::put(os, static_cast<std::uint32_t>(r.kind));
  detail::put(os, r.seed);
  detail::put(os, static_cast<std::uint64_t>(r.location_index));
  os.write(reinterpret_cast<const char*>(r.data.data()), static_cast<std::streamsize>(r.data.size() * sizeof(float)));
  if (!os) throw IoError(path + ": write failed");
}

inline PingRecord read_ping(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path + ": cannot open");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::string(magic, 8) != std::string(kPingMagic, 8)) throw IoError(path + ": not a ping record file");
  if (detail::get<std::uint32_t>(is, path) != kPingVersion) throw IoError(path + ": unsupported ping version");
  PingRecord r;
  r.ping_index = detail::get<std::uint64_t>(is, path);
  r.tx_id = detail::get<std::int32_t>(is, path);
  r.pose.position.x = detail::get<double>(is, path);
  r.pose.position.y = detail::get<double>(is, path);
  r.pose.position.z = detail::get<double>(is, path);
  r.pose.roll = detail::get<double>(is, path);
  r.pose.pitch = detail::get<double>(is, path);
  r.pose.yaw = detail::get<double>(is, path);
  r.sample_rate = detail::get<double>(is, path);
  r.start_time = detail::get<double>(is, path);
  r.rx_count = detail::get<std::uint64_t>(is, path);
  r.sample_count = detail::get<std::uint64_t>(is, path);
  const auto kind = detail::get<std::uint32_t>(is, path);
  if (kind > 1) throw IoError(path + ": bad sample kind");
  r.kind = static_cast<SampleKind>(kind);
  r.seed = detail::get<std::uint64_t>(is, path);
  r.location_index = detail::get<std::uint64_t>(is, path);
  if (!(r.sample_rate > 0.0) || r.rx_count * r.sample_count > (std::size_t{1} << 32))
    throw IoError(path + ": implausible header");
  r.allocate();
  is.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(r.data.size() * sizeof(float)));
  if (!is) throw IoError(path + ": truncated sample data");
  return r;
}

inline std::string ping_file_name(const PingRecord& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "ping_%06llu.bin", static_cast<unsigned long long>(r.ping_index));
  return buf;
}

inline constexpr const char* kManifestName = "manifest.txt";

struct ManifestEntry {
  std::uint64_t ping_index = 0;
  std::uint64_t location_index = 0;
  int tx_id = 0;
  std::string file;
};

struct Manifest {
  std::uint64_t scenario_hash = 0;
  std::uint64_t rng_seed = 0;
  std::vector<ManifestEntry> entries;
};

inline void write_manifest(const Manifest& m, const std::string& dir) {
  const std::string path = (std::filesystem::path(dir) / kManifestName).string();
  std::ofstream os(path);
  if (!os) throw IoError(path + ": cannot open for writing");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(m.scenario_hash));
  os << "# subsonar ping manifest\n";
  os << "scenario_hash = " << buf << "\n";
  os << "rng_seed = " << m.rng_seed << "\n";
  os << "ping_count = " << m.entries.size() << "\n";
  os << "# ping_index location_index tx_id file\n";
  for (const auto& e : m.entries) os << e.ping_index << ' ' << e.location_index << ' ' << e.tx_id << ' ' << e.file << '\n';
  if (!os) throw IoError(path + ": write failed");
}

inline Manifest read_manifest(const std::string& dir) {
  const std::string path = (std::filesystem::path(dir) / kManifestName).string();
  std::ifstream is(path);
  if (!is) throw IoError(path + ": cannot open");
  Manifest m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("scenario_hash = ", 0) == 0) {
      m.scenario_hash = std::stoull(line.substr(16), nullptr, 16);
    } else if (line.rfind("rng_seed = ", 0) == 0) {
      m.rng_seed = std::stoull(line.substr(11));
    } else if (line.rfind("ping_count = ", 0) == 0) {
      continue;
    } else {
      std::istringstream ls(line);
      ManifestEntry e;
      if (!(ls >> e.ping_index >> e.location_index >> e.tx_id >> e.file)) throw IoError(path + ": malformed line: " + line);
      m.entries.push_back(e);
    }
  }
  return m;
}

}  // namespace subsonar

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "subsonar/validation.hpp"

using namespace subsonar;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Scenario sand_scene() {
  Scenario s;
  s.sediment = SedimentProperties::medium_sand();
  return s;
}

}  // namespace

TEST(Grid, Dimensions) {
  EXPECT_EQ(make_grid({2, 15, 2}, 0.02).dims, (std::array<std::size_t, 3>{100, 750, 100}));
  EXPECT_EQ(make_grid({1, 1, 1}, 0.5).dims, (std::array<std::size_t, 3>{2, 2, 2}));
  EXPECT_THROW(make_grid({1, 0.1, 1}, 0.5), ValidationError);
  EXPECT_THROW(make_grid({1, 1, 1}, 0.0), ValidationError);
  const Scenario s;
  EXPECT_EQ(make_grid(s.image).dims, (std::array<std::size_t, 3>{750, 100, 100}));
}

TEST(Grid, IndexingRoundTrip) {
  const VoxelGrid g = make_grid({0.3, 0.5, 0.7}, 0.1, {1.0, -0.2, 0.0});
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto [i, j, k] = g.unravel(n);
    EXPECT_EQ(g.index(i, j, k), n);
  }
  EXPECT_EQ(g.nearest_index(0, 1.1), 1u);
  EXPECT_THROW((void)g.nearest_index(2, 5.0), ValidationError);
  const auto tiles = along_track_tiles(Scenario{}.image, 4.0);
  ASSERT_EQ(tiles.size(), 4u);
  EXPECT_DOUBLE_EQ(tiles.back().x_max, 15.0);
}

TEST(TravelTimes, RadialTableMatchesDirectEvaluation) {
  const Scenario s = sand_scene();
  const VoxelGrid g = make_grid({1.5, 1.2, 2.0}, 0.02, {-0.4, -0.6, -0.5});
  const Vec3 element{0.137, -0.051, -2.0};
  const auto radial = travel_time_table(g, element, s, TableCache::radial);
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = pick(rng);
    const auto [a, b, c] = g.unravel(n);
    const double direct = voxel_one_way_time(element, g.position(a, b, c), s, RayMode::refracted, 0.5 * g.spacing[2]);
    worst = std::max(worst, std::abs(radial[n] - direct));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(TravelTimes, InWaterIsEuclidean) {
  const Scenario s = sand_scene();
  const VoxelGrid g = make_grid({0.4, 0.4, 0.4}, 0.05, {-0.2, -0.2, -1.5});
  const Vec3 e{0.01, 0.02, -2.0};
  const auto t = travel_time_table(g, e, s);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto [i, j, k] = g.unravel(n);
    EXPECT_NEAR(t[n], distance(e, g.position(i, j, k)) / 1480.0, 1e-15);
  }
  EXPECT_THROW(travel_time_table(g, {0, 0, 0.5}, s), NumericalError);
}

TEST(TravelTimes, MirroredPosesGiveMirroredTables) {
  const Scenario s = sand_scene();
  const VoxelGrid g = make_grid({0.4, 1.02, 1.0}, 0.02, {0.0, -0.5, 0.0});
  const auto a = travel_time_table(g, {0.1, 0.2, -2.0}, s);
  const auto b = travel_time_table(g, {0.1, -0.2, -2.0}, s);
  const std::size_t ny = g.dims[1];
  for (std::size_t i = 0; i < g.dims[0]; ++i)
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t k = 0; k < g.dims[2]; ++k)
        EXPECT_NEAR(a[g.index(i, j, k)], b[g.index(i, ny - 1 - j, k)], 1e-12);
}

TEST(TravelTimes, StraightModeIsSlowerForBuriedVoxels) {
  const Scenario s = sand_scene();
  const VoxelGrid g = make_grid({0.1, 0.1, 0.5}, 0.05, {0.0, 0.0, 0.5});
  const auto refr = travel_time_table(g, {0, 0, -2}, s, TableCache::direct, RayMode::refracted);
  const auto str = travel_time_table(g, {0, 0, -2}, s, TableCache::direct, RayMode::straight);
  // Sand is faster than water, so the straight water ray overestimates delay.
  for (std::size_t n = 0; n < g.size(); ++n) EXPECT_GT(str[n], refr[n]);
}

TEST(Backproject, EmptyStream) {
  const Scenario s;
  const VoxelGrid g = make_grid({0.2, 0.2, 0.2}, 0.05);
  const VoxelVolume v = backproject({}, g, s);
  for (const auto& x : v.values) EXPECT_EQ(x, cplx(0.0));
  for (auto c : v.coverage) EXPECT_EQ(c, 0u);
}

TEST(Backproject, RejectsInconsistentPings) {
  Scenario s;
  s.array.layout = "single";
  const VoxelGrid g = make_grid({0.2, 0.2, 0.2}, 0.05);
  PingRecord a;
  a.kind = SampleKind::complex;
  a.sample_rate = 200e3;
  a.rx_count = 1;
  a.sample_count = 10;
  a.pose.position = {0, 0, -2};
  a.allocate();
  PingRecord b = a;
  b.sample_rate = 100e3;
  EXPECT_THROW(backproject({a, b}, g, s), NumericalError);
  PingRecord c = a;
  c.kind = SampleKind::real;
  c.allocate();
  EXPECT_THROW(backproject({c}, g, s), NumericalError);
}

TEST(Backproject, LinearInPings) {
  Scenario s = point_target_scenario(SedimentProperties::medium_sand(), {0.0, 0.0, -0.6}, 2);
  s.image.spacing = 0.04;
  const auto pings = simulate_compressed(s, 1);
  ASSERT_EQ(pings.size(), 2u);
  const VoxelGrid g = make_grid(s.image);
  BackprojectOptions o;
  o.normalization = Normalization::none;
  const VoxelVolume ab = backproject(pings, g, s, o);
  const VoxelVolume a = backproject({pings[0]}, g, s, o);
  const VoxelVolume b = backproject({pings[1]}, g, s, o);
  double peak = 0.0, err = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    peak = std::max(peak, std::abs(ab.values[n]));
    err = std::max(err, std::abs(a.values[n] + b.values[n] - ab.values[n]));
    EXPECT_EQ(ab.coverage[n], a.coverage[n] + b.coverage[n]);
  }
  EXPECT_LT(err, 1e-9 * peak);
}

TEST(Backproject, PointInWaterFocusesOnTruth) {
  const Scenario s = point_target_scenario(SedimentProperties::medium_sand(), {0.0, 0.04, -0.6}, 11);
  const VoxelVolume v = image_scenario(s, 1);
  const PeakReport p = analyse_peak(v);
  const auto err = index_error(v.grid, p.index, s.targets[0].position);
  EXPECT_LE(max_abs(err), 1);
  EXPECT_GE(p.pslr_db, 12.0);
}

TEST(Backproject, RefractionCorrectsBuriedPoint) {
  Scenario s = point_target_scenario(SedimentProperties::medium_sand(), {0.0, 0.0, 1.0}, 11);
  s.image.z_min = 0.6;
  s.image.z_max = 1.2;
  const auto pings = simulate_compressed(s, 1);
  const VoxelGrid g = make_grid(s.image);
  BackprojectOptions o;
  const PeakReport refr = analyse_peak(backproject(pings, g, s, o));
  o.rays = RayMode::straight;
  const PeakReport str = analyse_peak(backproject(pings, g, s, o));
  EXPECT_LE(max_abs(index_error(g, refr.index, s.targets[0].position)), 1);
  EXPECT_GE(max_abs(index_error(g, str.index, s.targets[0].position)), 2);
}

TEST(Backproject, WorkerCountDoesNotChangeOutput) {
  Scenario s = point_target_scenario(SedimentProperties::very_fine_silt(), {0.0, 0.0, 0.4}, 3);
  s.image.spacing = 0.04;
  const auto pings = simulate_compressed(s, 1);
  const VoxelGrid g = make_grid(s.image);
  BackprojectOptions one, four;
  four.workers = 4;
  const VoxelVolume a = backproject(pings, g, s, one), b = backproject(pings, g, s, four);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.coverage, b.coverage);
}

TEST(VolumeFile, RoundTripAndSidecar) {
  VoxelVolume v(make_grid({0.1, 0.2, 0.3}, 0.05, {1.0, -0.1, 0.2}), ValueKind::complex);
  for (std::size_t n = 0; n < v.values.size(); ++n) v.values[n] = {0.5 * n, -0.25 * n};
  v.scenario_hash = 0x1234abcdULL;
  v.ping_count = 7;
  const std::string path = temp_path("subsonar_test_volume.bin");
  write_volume(v, path);
  const VoxelVolume r = read_volume(path);
  EXPECT_EQ(r.grid, v.grid);
  EXPECT_EQ(r.values, v.values);
  EXPECT_EQ(r.scenario_hash, v.scenario_hash);
  EXPECT_EQ(r.ping_count, 7u);
  std::ifstream side(path + ".txt");
  std::stringstream ss;
  ss << side.rdbuf();
  EXPECT_NE(ss.str().find("dims = 2 4 6"), std::string::npos);
  // Truncation is reported against the file.
  std::filesystem::resize_file(path, 40);
  try {
    read_volume(path);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".txt");
}

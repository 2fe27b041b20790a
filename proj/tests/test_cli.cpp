#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = SUBSONAR_CLI_PATH;
const std::string kQuick = std::string(SUBSONAR_SCENARIO_DIR) + "/quick.ini";

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run(const std::string& args) {
  CliResult r;
  const std::string cmd = kCli + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.output += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class CliPipeline : public ::testing::Test {
 protected:
  static fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / "subsonar_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
    const CliResult a = run("simulate " + kQuick + " -o " + (root / "pings").string() + " -w 1");
    ASSERT_EQ(a.code, 0) << a.output;
  }
  static void TearDownTestSuite() { fs::remove_all(root); }
};

fs::path CliPipeline::root;

}  // namespace

TEST(CliUsage, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("simulate").code, 2);
  EXPECT_EQ(run("simulate /nonexistent/scenario.ini -o /tmp/x").code, 2);
  EXPECT_EQ(run("validate no_such_suite").code, 2);
  EXPECT_EQ(run("--version").code, 0);
}

TEST(CliUsage, InvalidScenarioIsValidationError) {
  const fs::path bad = fs::temp_directory_path() / "subsonar_bad.ini";
  {
    std::ofstream os(bad);
    os << "[geometry]\nwater_depth = -1\n";
  }
  const CliResult r = run("simulate " + bad.string() + " -o " + (fs::temp_directory_path() / "subsonar_bad_out").string());
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("error"), std::string::npos);
  fs::remove(bad);
}

TEST(CliUsage, ValidateTargetStrength) {
  const CliResult r = run("validate target_strength -w 1");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("suite=target_strength result=pass"), std::string::npos) << r.output;
}

TEST_F(CliPipeline, SimulateWritesPingsAndManifests) {
  const fs::path dir = root / "pings";
  EXPECT_TRUE(fs::exists(dir / "manifest.txt"));
  EXPECT_TRUE(fs::exists(dir / "run_manifest.txt"));
  std::size_t pings = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().rfind("ping_", 0) == 0) ++pings;
  EXPECT_EQ(pings, 5u);
  EXPECT_NE(slurp(dir / "manifest.txt").find("ping_count = 5"), std::string::npos);
  EXPECT_NE(slurp(dir / "run_manifest.txt").find("scenario_hash = "), std::string::npos);
}

TEST_F(CliPipeline, SimulateIsDeterministic) {
  const fs::path again = root / "pings_again";
  const CliResult r = run("simulate " + kQuick + " -o " + again.string() + " -w 2");
  ASSERT_EQ(r.code, 0) << r.output;
  for (const auto& e : fs::directory_iterator(root / "pings")) {
    const std::string name = e.path().filename().string();
    if (name.rfind("ping_", 0) != 0) continue;
    EXPECT_EQ(slurp(e.path()), slurp(again / name)) << name;
  }
  EXPECT_EQ(slurp(root / "pings" / "manifest.txt"), slurp(again / "manifest.txt"));
}

TEST_F(CliPipeline, BeamformThenImageproc) {
  const fs::path vol = root / "vol" / "image.vol";
  const CliResult b = run("beamform " + (root / "pings").string() + " " + kQuick + " -o " + vol.string() +
                    " --spacing 0.04 -w 1");
  ASSERT_EQ(b.code, 0) << b.output;
  ASSERT_TRUE(fs::exists(vol));
  const std::string side = slurp(vol.string() + ".txt");
  EXPECT_NE(side.find("dims = 20 15"), std::string::npos) << side;
  EXPECT_TRUE(fs::exists(vol.string() + ".run.txt"));

  const fs::path img = root / "img";
  const CliResult i = run("imageproc " + vol.string() + " -o " + img.string() +
                    " --gain 10 --normalize --kernel 0.24 0.12 0.12 --drc --mip x,y,z --slice z=0.98 -w 1");
  ASSERT_EQ(i.code, 0) << i.output;
  for (const char* n : {"mip_x.pgm", "mip_y.pgm", "mip_z.pgm", "slice_z_0.980.pgm"}) {
    EXPECT_TRUE(fs::exists(img / n)) << n;
    EXPECT_TRUE(fs::exists(img / (std::string(n) + ".txt"))) << n;
    EXPECT_EQ(slurp(img / n).rfind("P5\n", 0), 0u) << n;
  }
  EXPECT_TRUE(fs::exists(img / "run_manifest.txt"));

  EXPECT_EQ(run("imageproc " + vol.string() + " -o " + img.string()).code, 2);
  EXPECT_EQ(run("imageproc " + vol.string() + " -o " + img.string() + " --mip w").code, 3);
}

TEST_F(CliPipeline, CorruptPingIsIoError) {
  const fs::path dir = root / "corrupt";
  fs::create_directories(dir);
  for (const auto& e : fs::directory_iterator(root / "pings")) fs::copy_file(e.path(), dir / e.path().filename());
  fs::resize_file(dir / "ping_000002.bin", 50);
  const CliResult r = run("beamform " + dir.string() + " " + kQuick + " -o " + (root / "c.vol").string() +
                    " --spacing 0.04 -w 1");
  EXPECT_EQ(r.code, 4) << r.output;
  EXPECT_NE(r.output.find("ping_000002.bin"), std::string::npos) << r.output;
}

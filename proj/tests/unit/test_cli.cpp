#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "htcc/cli/commands.hpp"
#include "htcc/common/error.hpp"

using namespace htcc;
using namespace htcc::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig tiny(const fs::path& dir, std::uint64_t seed) {
  RunConfig r;
  r.out_dir = dir.string();
  r.seed = seed;
  r.frames_per_element = 10;
  r.acquisitions = 1;
  r.snr_grid = {29};
  r.epochs = 1;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("htcc_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(HTCC_TOOL) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config hash ignores locations and thread count") {
  RunConfig a, b;
  a.out_dir = "x";
  b.out_dir = "y";
  b.threads = 8;
  b.data = "/elsewhere/d.htcc";
  CHECK(a.hash() == b.hash());
  b.seed = 2;
  CHECK(a.hash() != b.hash());
  RunConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.paths = {"gpu"};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("generation is byte-identical across output directories") {
  const auto base = scratch("gen");
  std::ostringstream log;
  REQUIRE(cmd_generate(tiny(base / "a", 4), log) == 0);
  REQUIRE(cmd_generate(tiny(base / "b", 4), log) == 0);
  CHECK(slurp(base / "a" / kDatasetFile) == slurp(base / "b" / kDatasetFile));
  CHECK(slurp(base / "a" / "dataset.htcc.manifest.json") == slurp(base / "b" / "dataset.htcc.manifest.json"));
  fs::remove_all(base);
}

TEST_CASE("artifacts from a different dataset are refused") {
  const auto base = scratch("lineage");
  std::ostringstream log;
  const auto a = tiny(base / "a", 1);
  const auto b = tiny(base / "b", 2);
  REQUIRE(cmd_generate(a, log) == 0);
  REQUIRE(cmd_train(a, log) == 0);
  REQUIRE(cmd_generate(b, log) == 0);

  RunConfig mixed = b;
  mixed.model = (base / "a" / kModelFile).string();
  CHECK_THROWS_AS(cmd_quantize(mixed, log), ConfigError);

  // A report over a directory holding artifacts of two datasets fails.
  fs::copy_file(base / "b" / kDatasetFile, base / "a" / "other.htcc");
  auto m = nlohmann::json::parse(slurp(base / "b" / "dataset.htcc.manifest.json"));
  m["files"] = {{"other.htcc", m["files"]["dataset.htcc"]}};
  std::ofstream(base / "a" / "other.htcc.manifest.json") << m.dump();
  try {
    cmd_report(a, log);
    FAIL("report accepted mixed lineages");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("different datasets") != std::string::npos);
  }
  fs::remove(base / "a" / "other.htcc.manifest.json");
  CHECK(cmd_report(a, log) == 0);

  // Tampering with a recorded artifact is detected.
  std::ofstream(base / "a" / "train_history.csv", std::ios::app) << "x\n";
  CHECK_THROWS_AS(cmd_report(a, log), ConfigError);
  fs::remove_all(base);
}

TEST_CASE("tool exit codes") {
  const auto base = scratch("exit");
  CHECK(run_tool("") == 2);
  CHECK(run_tool("generate --scale huge") == 2);
  CHECK(run_tool("train --out " + (base / "missing").string()) == static_cast<int>(ErrorKind::io));
  CHECK(run_tool("--out " + base.string() + " generate --frames 10 --acquisitions 1 --snr-grid 29") == 0);
  CHECK(run_tool("--out " + base.string() + " train --epochs 0") == static_cast<int>(ErrorKind::config));
  fs::remove_all(base);
}

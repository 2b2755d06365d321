#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "locfuse/cli.hpp"
#include "locfuse/config.hpp"
#include "locfuse/errors.hpp"

using namespace locfuse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("locfuse_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr, std::string* err = nullptr) {
  std::vector<const char*> argv = {"locfuse"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return rc;
}

const char* kSmall = R"({
  "duration_s": 15.0,
  "burn_in_s": 5.0,
  "monte_carlo_runs": 2,
  "seed": 4
})";

std::string parse_message(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("empty config takes the defaults") {
    const ExperimentConfig c = parse_config_text("{}");
    CHECK(c == ExperimentConfig{});
    CHECK(c.scene.carrier_freq_hz == 26e9);
    CHECK(c.mobility.epoch_dt_s == 0.1);
    CHECK(c.scene.tx_power_dbm == 0.0);
    CHECK(c.scene.rx_sensitivity_dbm == -90.0);
  }

  TEST_CASE("unknown keys are named") {
    const std::string msg = parse_message(R"({"noise": {"sigma_toa_feet": 3}})");
    CHECK(msg.find("sigma_toa_feet") != std::string::npos);
    CHECK(parse_message(R"({"layout": {"kind": "spiral"}})").find("spiral") != std::string::npos);
    CHECK(parse_message(R"({"anchor_prior_sigma": -1})").find("anchor_prior_sigma") != std::string::npos);
  }

  TEST_CASE("syntax errors carry the line") {
    const std::string msg = parse_message("{\n  \"seed\": 3,\n  oops\n}");
    CHECK(msg.find("line 3") != std::string::npos);
  }

  TEST_CASE("config round trip") {
    ExperimentConfig c = parse_config_text(kSmall);
    c.measurement_set = MeasurementSet::toa_aoa;
    c.layout = LayoutKind::collinear;
    c.signal.snr_db = 12.5;
    c.scene.obstacles.push_back(Box{Point3(10, 5, 0), Point3(12, 8, 4)});
    const ExperimentConfig back = config_from_json(config_to_json(c));
    CHECK(back == c);
    CHECK(parse_config_text(config_to_json(c).dump()) == c);
  }

  TEST_CASE("calibrate") {
    std::string out;
    CHECK(cli({"calibrate", "--p", "0.95", "--bound", "0.2"}, &out) == 0);
    CHECK(out == "0.10204\n");
  }

  TEST_CASE("simulate is reproducible and replayable") {
    TempDir dir("simulate");
    write_file(dir.path / "cfg.json", kSmall);
    const std::string cfg = (dir.path / "cfg.json").string();
    REQUIRE(cli({"simulate", "--config", cfg, "--out-dir", (dir.path / "a").string()}) == 0);
    REQUIRE(cli({"simulate", "--config", cfg, "--out-dir", (dir.path / "b").string()}) == 0);
    for (const char* f : {"trace.csv", "cdf.csv", "summary.json", "manifest.json"}) {
      CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
      CHECK(!slurp(dir.path / "a" / f).empty());
    }
    const std::string manifest = (dir.path / "a" / "manifest.json").string();
    REQUIRE(cli({"simulate", "--config", manifest, "--out-dir", (dir.path / "c").string()}) == 0);
    for (const char* f : {"trace.csv", "cdf.csv", "summary.json", "manifest.json"}) {
      CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "c" / f));
    }
  }

  TEST_CASE("overrides land in the manifest") {
    TempDir dir("override");
    write_file(dir.path / "cfg.json", kSmall);
    REQUIRE(cli({"simulate", "--config", (dir.path / "cfg.json").string(), "--seed", "17", "--runs", "1",
                 "--measurement-set", "toa", "--out-dir", dir.path.string()}) == 0);
    const ExperimentConfig c = parse_config(dir.path / "manifest.json");
    CHECK(c.seed == 17);
    CHECK(c.monte_carlo_runs == 1);
    CHECK(c.measurement_set == MeasurementSet::toa);
  }

  TEST_CASE("sweep writes one row per cell") {
    TempDir dir("sweep");
    write_file(dir.path / "cfg.json",
               R"({"duration_s": 12.0, "burn_in_s": 5.0, "sweep": {"anchors": [3, 4], "targets": [1, 2], "runs": 1}})");
    REQUIRE(cli({"sweep", "--config", (dir.path / "cfg.json").string(), "--out-dir", dir.path.string()}) == 0);
    std::istringstream csv(slurp(dir.path / "sweep.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 5);
  }

  TEST_CASE("failures exit nonzero and leave no partial output") {
    TempDir dir("failure");
    write_file(dir.path / "cfg.json", kSmall);
    fs::create_directories(dir.path / "out" / "summary.json");
    std::string err;
    CHECK(cli({"simulate", "--config", (dir.path / "cfg.json").string(), "--out-dir", (dir.path / "out").string()},
              nullptr, &err) == 1);
    CHECK(err.find("\"error\"") != std::string::npos);
    CHECK_FALSE(fs::exists(dir.path / "out" / "trace.csv"));
    CHECK_FALSE(fs::exists(dir.path / "out" / "cdf.csv"));

    write_file(dir.path / "bad.json", R"({"noise": {"sigma_toa_feet": 3}})");
    CHECK(cli({"simulate", "--config", (dir.path / "bad.json").string(), "--out-dir", dir.path.string()}, nullptr,
              &err) == 1);
    CHECK(err.find("sigma_toa_feet") != std::string::npos);
    CHECK(cli({"simulate"}, nullptr, &err) == 2);
    CHECK(err.find("usage_error") != std::string::npos);
    CHECK(cli({"simulate", "--config", (dir.path / "cfg.json").string(), "--mode", "psychic"}, nullptr, &err) == 2);
  }
}

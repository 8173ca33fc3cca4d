#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "checks.hpp"
#include "doctest.h"
#include "dpmreg/cli.hpp"
#include "dpmreg/io.hpp"

using namespace dpmreg;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("dpmreg_cli_" + std::to_string(::getpid()));
  Scratch() { fs::create_directories(dir); }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"fit"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  Scratch s;
  const Run small = cli({"simulate", "--p", "3", "--J", "4", "--out-dir", s / "x"});
  CHECK(small.code == kExitUsage);
  CHECK(small.err.find("p must be at least") != std::string::npos);
  CHECK(cli({"fit", "--data", s / "none.csv", "--out", s / "a.dpm", "--alpha-scale", "2", "--alpha-rate", "3"}).code ==
        kExitUsage);
}

TEST_CASE("simulate, fit, predict and report") {
  Scratch s;
  REQUIRE(cli({"simulate", "--n", "30", "--p", "5", "--J", "2", "--seed", "7", "--out-dir", s / "sim"}).code == kExitOk);
  CHECK(read_csv(s / "sim/train.csv").values.rows() == 30);
  CHECK(read_csv(s / "sim/test.csv").values.rows() == 100);

  REQUIRE(cli({"fit", "--data", s / "sim/train.csv", "--out", s / "m.dpm", "--iterations", "40", "--burn-in", "10"})
              .code == kExitOk);
  const Archive ar = read_archive(s / "m.dpm");
  CHECK(ar.draws.size() == 30);
  CHECK(ar.norm_state.has_value());

  REQUIRE(cli({"predict", "--archive", s / "m.dpm", "--data", s / "sim/test.csv", "--out", s / "p.csv"}).code == kExitOk);
  const CsvTable pred = read_csv(s / "p.csv");
  CHECK(pred.header == std::vector<std::string>{"row", "prediction"});
  CHECK(pred.values.rows() == 100);

  REQUIRE(cli({"report", "--archive", s / "m.dpm", "--out-dir", s / "rep", "--truth", s / "sim/truth.json"}).code ==
          kExitOk);
  CHECK(fs::exists(s / "rep/summary.csv"));

  SUBCASE("schema mismatch names the missing columns") {
    std::ofstream(s / "bad.csv") << "x1,x2,zz\n1,2,3\n";
    const Run r = cli({"predict", "--archive", s / "m.dpm", "--data", s / "bad.csv", "--out", s / "q.csv"});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("x3") != std::string::npos);
  }
  SUBCASE("missing archive") {
    CHECK(cli({"predict", "--archive", s / "none.dpm", "--data", s / "sim/test.csv", "--out", s / "q.csv"}).code ==
          kExitData);
  }
  SUBCASE("non-numeric cell") {
    std::ofstream(s / "text.csv") << "x1,y\n1,2\nfoo,3\n";
    CHECK(cli({"fit", "--data", s / "text.csv", "--out", s / "t.dpm"}).code == kExitData);
  }
  SUBCASE("constant column") {
    std::ofstream(s / "flat.csv") << "x1,y\n1,2\n1,3\n1,4\n";
    CHECK(cli({"fit", "--data", s / "flat.csv", "--out", s / "t.dpm"}).code == kExitData);
  }
  SUBCASE("config file") {
    std::ofstream(s / "fit.toml") << "[fit]\niterations = 20\nburn-in = 5\n";
    REQUIRE(cli({"--config", s / "fit.toml", "fit", "--data", s / "sim/train.csv", "--out", s / "c.dpm"}).code ==
            kExitOk);
    CHECK(read_archive(s / "c.dpm").draws.size() == 15);
  }
}

TEST_CASE("every command reruns byte for byte") {
  for (const auto& r : checks::cli_determinism_checks()) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.pass);
  }
}

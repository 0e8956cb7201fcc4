#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("WATTPLAN_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const std::string kDeskFlags =
    " --seed 777 --split.train_fraction 0.375"
    " --gng.device.max_nodes 12 --gng.device.start_nodes 4 --gng.device.epochs 6"
    " --gng.device.insertion_interval 50"
    " --gng.domain.max_nodes 52 --gng.domain.start_nodes 8 --gng.domain.epochs 3"
    " --gng.domain.insertion_interval 20";

}  // namespace

TEST_CASE("cli pipeline: synth -> cluster -> train -> simulate -> report") {
  TempDir dir("wattplan_cli_pipeline");
  const std::string trace = (dir.path / "trace.csv").string();
  const std::string bundle = (dir.path / "bundle").string();
  const std::string report = (dir.path / "report").string();

  REQUIRE(run("synth --out " + trace + " --truth-out " + trace + ".truth.csv --seed 777 --synth.length 16000") == 0);
  REQUIRE(fs::exists(trace));
  REQUIRE(line_count(trace) == 16000 * 4 + 1);  // four devices + header

  REQUIRE(run("cluster --trace " + trace + " --bundle " + bundle + kDeskFlags) == 0);
  REQUIRE(fs::exists(fs::path(bundle) / "manifest.json"));
  REQUIRE(fs::exists(fs::path(bundle) / "domain.gng.json"));

  REQUIRE(run("train --trace " + trace + " --bundle " + bundle) == 0);
  REQUIRE(run("simulate --trace " + trace + " --bundle " + bundle + " --report " + report) == 0);
  REQUIRE(fs::exists(report + ".csv"));
  REQUIRE(fs::exists(report + ".json"));
  // 16000 * (1 - 0.375) = 10000 test readings -> 10 slots of 1000.
  CHECK(line_count(report + ".csv") == 11);

  // report re-emits identical files from the saved metrics.
  const std::string again = (dir.path / "again").string();
  REQUIRE(run("report --metrics " + report + ".json --out " + again) == 0);
  CHECK(slurp(again + ".csv") == slurp(report + ".csv"));
  CHECK(slurp(again + ".json") == slurp(report + ".json"));

  // The report embeds the consumed config: key choices must echo back.
  const std::string json = slurp(report + ".json");
  CHECK(json.find("\"config\"") != std::string::npos);
  CHECK(json.find("\"seed\": 777") != std::string::npos);
  CHECK(json.find("\"train_fraction\": 0.375") != std::string::npos);
}

TEST_CASE("cli slot size flag changes the report granularity") {
  TempDir dir("wattplan_cli_slots");
  const std::string trace = (dir.path / "trace.csv").string();
  const std::string bundle = (dir.path / "bundle").string();
  const std::string report = (dir.path / "report").string();
  REQUIRE(run("synth --out " + trace + " --seed 101 --synth.length 16000") == 0);
  REQUIRE(run("cluster --trace " + trace + " --bundle " + bundle + kDeskFlags) == 0);
  REQUIRE(run("train --trace " + trace + " --bundle " + bundle) == 0);
  REQUIRE(run("simulate --trace " + trace + " --bundle " + bundle + " --report " + report +
              " --sim.slot_size 500") == 0);
  CHECK(line_count(report + ".csv") == 21);  // 10000 / 500 rows + header
}

TEST_CASE("cli cluster rerun with the same seed is byte-identical") {
  TempDir dir("wattplan_cli_idempotent");
  const std::string trace = (dir.path / "trace.csv").string();
  const std::string b1 = (dir.path / "b1").string();
  const std::string b2 = (dir.path / "b2").string();
  REQUIRE(run("synth --out " + trace + " --seed 55 --synth.length 8000") == 0);
  REQUIRE(run("cluster --trace " + trace + " --bundle " + b1 + kDeskFlags) == 0);
  REQUIRE(run("cluster --trace " + trace + " --bundle " + b2 + kDeskFlags) == 0);
  for (const auto& entry : fs::directory_iterator(b1)) {
    const auto name = entry.path().filename();
    INFO(name);
    // The manifest embeds the bundle path it was written to; mask it out.
    std::string left = slurp(entry.path());
    std::string right = slurp(fs::path(b2) / name);
    const auto strip = [](std::string s, const std::string& needle) {
      for (std::size_t at = s.find(needle); at != std::string::npos; at = s.find(needle, at))
        s.erase(at, needle.size());
      return s;
    };
    left = strip(left, "/b1");
    right = strip(right, "/b2");
    CHECK(left == right);
  }
}

TEST_CASE("cli flip_fraction override 0 persists actuations equal to actions") {
  TempDir dir("wattplan_cli_flip0");
  const std::string trace = (dir.path / "trace.csv").string();
  const std::string bundle = (dir.path / "bundle").string();
  REQUIRE(run("synth --out " + trace + " --seed 5 --synth.length 12000") == 0);
  REQUIRE(run("cluster --trace " + trace + " --bundle " + bundle + kDeskFlags) == 0);
  REQUIRE(run("train --trace " + trace + " --bundle " + bundle + " --behavior.flip_fraction 0") == 0);

  std::ifstream in(fs::path(bundle) / "manifest.json");
  nlohmann::json manifest;
  in >> manifest;
  // With no flips, every joint count cell has actuation == action.
  for (const auto& cell : manifest.at("counts").at("cells")) {
    REQUIRE(cell[2].get<int>() == cell[3].get<int>());
  }
}

TEST_CASE("cli missing input exits with the data error code") {
  TempDir dir("wattplan_cli_missing");
  CHECK(run("cluster --trace /nonexistent/trace.csv --bundle " + (dir.path / "b").string()) == 2);
  CHECK(run("simulate --trace /nonexistent/trace.csv --bundle " + (dir.path / "b").string() +
            " --report " + (dir.path / "r").string()) == 2);
  CHECK(run("report --metrics /nonexistent/metrics.json --out " + (dir.path / "r").string()) == 2);
}

TEST_CASE("cli corrupted bundle exits with the data error code") {
  TempDir dir("wattplan_cli_corrupt");
  const std::string trace = (dir.path / "trace.csv").string();
  const std::string bundle = (dir.path / "bundle").string();
  REQUIRE(run("synth --out " + trace + " --seed 31 --synth.length 8000") == 0);
  REQUIRE(run("cluster --trace " + trace + " --bundle " + bundle + kDeskFlags) == 0);
  {
    std::ofstream out(fs::path(bundle) / "domain.gng.json", std::ios::trunc);
    out << "garbage";
  }
  CHECK(run("train --trace " + trace + " --bundle " + bundle) == 2);
}

TEST_CASE("cli rejects bad flag values with the config error code") {
  TempDir dir("wattplan_cli_config");
  const std::string trace = (dir.path / "trace.csv").string();
  REQUIRE(run("synth --out " + trace + " --seed 1 --synth.length 4000") == 0);
  CHECK(run("cluster --trace " + trace + " --bundle " + (dir.path / "b").string() +
            " --split.train_fraction 1.5") == 1);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bsdelab/run.hpp"
#include "bsdelab/version.hpp"

using namespace bsdelab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("bsdelab_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("key = value config files parse") {
  fs::path dir = temp_dir("kv");
  fs::path file = dir / "exp.cfg";
  {
    std::ofstream out(file);
    out << "# comment line\n"
        << "command = solve\n"
        << "driver = remark33\n"
        << "terminal = 0.5\n"
        << "T = 2\n"
        << "N = 128\n"
        << "m = 4, 8, 16\n"
        << "scheme = implicit\n"
        << "selector = min\n"
        << "seed = 99\n"
        << "perturbations = w + 1; w + 0.5\n"
        << "out = " << (dir / "results").string() << "\n";
  }
  ExperimentConfig cfg = load_config_file(file.string());
  CHECK(cfg.command == "solve");
  CHECK(cfg.driver == "remark33");
  CHECK(cfg.horizon == 2.0);
  CHECK(cfg.steps == 128);
  REQUIRE(cfg.m_schedule.size() == 3);
  CHECK(cfg.m_schedule[2] == 16.0);
  CHECK(cfg.scheme == "implicit");
  CHECK(cfg.selector == "min");
  CHECK(cfg.sampling.seed == 99);
  REQUIRE(cfg.perturbations.size() == 2);
  CHECK(cfg.perturbations[1] == "w + 0.5");
}

TEST_CASE("JSON config files parse to the same structure") {
  fs::path dir = temp_dir("json");
  fs::path file = dir / "exp.json";
  {
    std::ofstream out(file);
    out << R"json({
      "command": "dependence",
      "driver": "linear(1,0)",
      "terminal": "w",
      "T": 1.0,
      "N": 16,
      "m": [2, 4, 8],
      "perturbations": ["w + 1", "w + 0.5"],
      "sampling": {"seed": 7, "sample_count": 100, "max_enum_n": 18}
    })json";
  }
  ExperimentConfig cfg = load_config_file(file.string());
  CHECK(cfg.command == "dependence");
  CHECK(cfg.sampling.seed == 7);
  CHECK(cfg.sampling.sample_count == 100);
  CHECK(cfg.sampling.max_enum_n == 18);
  REQUIRE(cfg.perturbations.size() == 2);
  CHECK(validate(cfg).empty());

  // canonical echo re-validates clean and reparses to an equivalent config
  ExperimentConfig echo = config_from_json_text(config_to_json(cfg));
  CHECK(validate(echo).empty());
  CHECK(config_to_json(echo) == config_to_json(cfg));
}

TEST_CASE("unknown keys and malformed values are config errors") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(apply_config_value(cfg, "bogus", "1"), ConfigError);
  CHECK_THROWS_AS(apply_config_value(cfg, "T", "fast"), ConfigError);
  CHECK_THROWS_AS(load_config_file("/nonexistent/x.cfg"), ConfigError);
}

TEST_CASE("validate flags the documented failure modes") {
  ExperimentConfig cfg;
  cfg.command = "solve";
  cfg.driver = "remark33";
  cfg.terminal = "0";
  cfg.horizon = 1.0;
  cfg.steps = 256;
  cfg.m_schedule = {4.0, 8.0, 16.0, 32.0};
  CHECK(validate(cfg).empty());

  SUBCASE("N = 0") {
    cfg.steps = 0;
    auto diags = validate(cfg);
    REQUIRE_FALSE(diags.empty());
    bool mentions_n = false;
    for (const auto& d : diags) mentions_n |= d.rfind("N:", 0) == 0;
    CHECK(mentions_n);
  }
  SUBCASE("m*dt too large") {
    cfg.steps = 4;
    cfg.m_schedule = {4.0};
    auto diags = validate(cfg);
    REQUIRE_FALSE(diags.empty());
    bool mentions = false;
    for (const auto& d : diags) mentions |= d.find("> 0.5") != std::string::npos;
    CHECK(mentions);
  }
  SUBCASE("unknown command") {
    cfg.command = "frobnicate";
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("bad driver source") {
    cfg.driver = "3*powabs(y";
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("bad terminal") {
    cfg.terminal = "y + 1";
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("dependence without perturbations") {
    cfg.command = "dependence";
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("Lipschitz step condition for direct solves") {
    cfg.driver = "linear(3,0)";
    cfg.terminal = "w";
    cfg.m_schedule.clear();
    cfg.steps = 4;  // K dt = 3/4
    auto diags = validate(cfg);
    REQUIRE_FALSE(diags.empty());
    CHECK(diags[0].find("K*dt") != std::string::npos);
    cfg.scheme = "implicit";  // K dt < 1 is fine
    CHECK(validate(cfg).empty());
  }
  SUBCASE("defaulted m schedule must be admissible") {
    cfg.m_schedule.clear();
    cfg.steps = 4;  // A+1 = 4 needs m dt <= 1/2
    auto diags = validate(cfg);
    REQUIRE_FALSE(diags.empty());
    CHECK(diags[0].find("admissible") != std::string::npos);
  }
}

TEST_CASE("run: martingale solve summary") {
  fs::path dir = temp_dir("run_solve");
  ExperimentConfig cfg;
  cfg.command = "solve";
  cfg.driver = "0";
  cfg.terminal = "w";
  cfg.steps = 8;
  cfg.out_dir = (dir / "out").string();
  RunRecord rec = run(cfg);

  REQUIRE(rec.outputs.size() == 2);
  for (const auto& f : rec.outputs) {
    CHECK(fs::exists(f.path));
    CHECK(fs::file_size(f.path) == f.bytes);
    CHECK(f.bytes > 0);
  }
  auto summary = nlohmann::json::parse(slurp(dir / "out" / "solve_summary.json"));
  CHECK(summary["y0"] == 0.0);
  CHECK(summary["N"] == 8);
  CHECK(summary["m"].is_null());

  // run record echoes a config that re-validates clean
  auto record = nlohmann::json::parse(slurp(rec.record_path));
  ExperimentConfig echo = config_from_json_text(record["config"].dump());
  CHECK(validate(echo).empty());
  CHECK(record["version"].get<std::string>() == std::string(kVersion));
}

TEST_CASE("run: envelope grid contains the 4/m^2 point") {
  fs::path dir = temp_dir("run_env");
  ExperimentConfig cfg;
  cfg.command = "envelope";
  cfg.driver = "remark33";
  cfg.m_schedule = {4.0};
  cfg.grid_y_min = -1.0;
  cfg.grid_y_max = 1.0;
  cfg.grid_y_step = 0.01;
  cfg.out_dir = (dir / "out").string();
  run(cfg);

  std::ifstream csv(dir / "out" / "envelope.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "kind,m,t,y,z,value");
  bool found = false;
  while (std::getline(csv, line)) {
    if (line.rfind("upper,4,0,0,", 0) == 0) {
      double v = std::stod(line.substr(line.rfind(',') + 1));
      CHECK(v == doctest::Approx(0.25).epsilon(0.05));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("run: counterexample curve ends near T^6") {
  fs::path dir = temp_dir("run_cx");
  ExperimentConfig cfg;
  cfg.command = "counterexample";
  cfg.selector = "min";
  for (long long n = 1; n <= 64; n *= 2) cfg.n_list.push_back(n);
  cfg.out_dir = (dir / "out").string();
  run(cfg);

  std::ifstream csv(dir / "out" / "counterexample.csv");
  std::string line, last;
  std::getline(csv, line);
  CHECK(line == "n,terminal,distance,oracle_distance");
  while (std::getline(csv, line)) {
    if (!line.empty()) last = line;
  }
  // n,terminal,distance,oracle: distance is the third column
  std::stringstream ss(last);
  std::string cell;
  std::getline(ss, cell, ',');
  CHECK(cell == "64");
  std::getline(ss, cell, ',');
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("run: validation failures raise ConfigError with the field named") {
  ExperimentConfig cfg;
  cfg.command = "solve";
  cfg.driver = "remark33";
  cfg.steps = 0;
  try {
    run(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("N:") != std::string::npos);
  }
}

TEST_CASE("reproducibility: identical config and seed give byte-identical outputs") {
  for (const char* which : {"dependence", "counterexample"}) {
    fs::path dir = temp_dir(std::string("repro_") + which);
    ExperimentConfig cfg;
    cfg.command = which;
    if (cfg.command == "dependence") {
      cfg.driver = "linear(1,0)";
      cfg.terminal = "w";
      cfg.steps = 16;
      cfg.m_schedule = {2.0, 4.0};
      cfg.perturbations = {"w + 1", "w + 0.5", "w + 0.25"};
      cfg.sampling.seed = 2024;
    } else {
      cfg.selector = "max";
      cfg.n_list = {1, 2, 4, 8};
    }
    cfg.out_dir = (dir / "a").string();
    RunRecord first = run(cfg);
    cfg.out_dir = (dir / "b").string();
    RunRecord second = run(cfg);
    REQUIRE(first.outputs.size() == second.outputs.size());
    for (std::size_t i = 0; i < first.outputs.size(); ++i) {
      CAPTURE(first.outputs[i].path);
      CHECK(slurp(first.outputs[i].path) == slurp(second.outputs[i].path));
    }
  }
}

TEST_CASE("run: solve falls back to the monotone scheme for non-Lipschitz drivers") {
  fs::path dir = temp_dir("run_solve_env");
  ExperimentConfig cfg;
  cfg.command = "solve";
  cfg.driver = "remark33";
  cfg.terminal = "0";
  cfg.horizon = 1.0;
  cfg.steps = 256;
  cfg.m_schedule = {4.0, 8.0, 16.0, 32.0};
  cfg.selector = "max";
  cfg.out_dir = (dir / "out").string();
  run(cfg);

  auto summary = nlohmann::json::parse(slurp(dir / "out" / "solve_summary.json"));
  CHECK(summary["m"] == 32.0);
  double y0 = summary["y0"].get<double>();
  CHECK(y0 >= 1.0);   // the maximal solution approaches (T-t)^3 from above
  CHECK(y0 <= 1.3);

  // one CSV row per time step plus the header
  std::ifstream csv(dir / "out" / "solve.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 258);
}

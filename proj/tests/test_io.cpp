#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lgc/io.hpp"
#include "support.hpp"

using namespace lgc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "lgc_test_io";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path path = scratch_dir() / name;
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI with stdout sent to `out` and returns its exit code.
int cli(const std::string& args, const fs::path& out = scratch_dir() / "stdout.txt") {
  const std::string cmd = std::string(LGC_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + (scratch_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("model JSON", "[io]") {
  SECTION("round trip is exact") {
    const VarModel m = testing::random_stable_model(3, 4, 12);
    const VarModel back = model_from_json(json::parse(model_to_json(m).dump()));
    REQUIRE(back.order() == 4);
    for (int i = 1; i <= 4; ++i) CHECK(back.coeff(i) == m.coeff(i));
    CHECK(back.noise_cov() == m.noise_cov());
  }
  SECTION("dim and order are optional but checked") {
    json j = model_to_json(builtin_sim_model());
    j.erase("dim");
    j.erase("order");
    CHECK(model_from_json(j).order() == 11);
    j["order"] = 10;
    CHECK_THROWS_AS(model_from_json(j), InputError);
    j = model_to_json(builtin_sim_model());
    j["dim"] = 2;
    CHECK_THROWS_AS(model_from_json(j), InputError);
  }
  SECTION("malformed models") {
    CHECK_THROWS_AS(model_from_json(json::parse(R"({"coeffs": [[[0.5]]]})")), InputError);
    CHECK_THROWS_AS(model_from_json(json::parse(R"({"coeffs": [[[0.5, 1]]], "noise_cov": [[1]]})")),
                    InputError);
    CHECK_THROWS_AS(model_from_json(json::parse(R"({"coeffs": [[["a"]]], "noise_cov": [[1]]})")),
                    InputError);
    CHECK_THROWS_AS(load_model((scratch_dir() / "nope.json").string()), InputError);
    CHECK_THROWS_AS(load_model(write_file("bad.json", "{ not json").string()), InputError);
  }
}

TEST_CASE("fit and result JSON", "[io]") {
  const DesignProblem prob = testing::random_problem(80, 6, 3);
  const LassoFit fit = fit_lasso(prob, 0.01);
  const json j = fit_to_json(fit, prob);
  for (const char* key : {"lambda", "coeffs", "loss", "kkt_violation", "converged"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["coeffs"].size() == 6);
  CHECK(j["lambda"].get<double>() == 0.01);
  CHECK(j["coeffs"][2].get<double>() == fit.coeffs(2));

  GcResult r;
  r.lgc = std::numeric_limits<double>::infinity();
  CHECK(gc_to_json(r)["lgc"].is_null());
}

TEST_CASE("sweep config JSON", "[io]") {
  SweepConfig c;
  c.values = {100, 200};
  c.trials = 4;
  c.cross_validate = false;
  c.lambda = 0.02;
  const SweepConfig back = sweep_config_from_json(sweep_config_to_json(c));
  CHECK(sweep_config_to_json(back) == sweep_config_to_json(c));
  CHECK_THROWS_AS(sweep_config_from_json(json::parse(R"({"trails": 3})")), InputError);
  CHECK_THROWS_AS(sweep_config_from_json(json::parse(R"({"trials": "many"})")), InputError);
  CHECK_THROWS_AS(sweep_config_from_json(json::parse(R"({"lambda_mode": "auto"})")), InputError);
  CHECK_THROWS_AS(sweep_config_from_json(json::parse(R"({"values": [3, 2]})")), InputError);
}

TEST_CASE("bound constants JSON", "[io]") {
  const BoundConstants k = bound_constants_from_json(json::parse(R"({"c": 2.5, "A_override": 1e-3})"));
  CHECK(k.c == 2.5);
  CHECK(k.A_override == 1e-3);
  CHECK(k.d0 == BoundConstants{}.d0);
  CHECK_THROWS_AS(bound_constants_from_json(json::parse(R"({"c": "two"})")), InputError);
}

TEST_CASE("command-line tool", "[io][cli]") {
  const fs::path dir = scratch_dir();

  SECTION("defaults are printable") {
    REQUIRE(cli("--show-config", dir / "config.json") == 0);
    const json cfg = json::parse(slurp(dir / "config.json"));
    CHECK(cfg.contains("sweep"));
    CHECK(cfg["sweep"]["trials"] == 30);
  }
  SECTION("simulate, fit and gc") {
    REQUIRE(cli("simulate -n 400 --seed 3", dir / "sim.csv") == 0);
    IngestOptions raw;
    raw.center = false;
    const IngestedData d = ingest_csv((dir / "sim.csv").string(), raw);
    CHECK(d.data.rows() == 411);
    CHECK(d.data == simulate(builtin_sim_model(), 400, kDefaultBurnIn, 3).data);

    REQUIRE(cli("fit --data " + (dir / "sim.csv").string() + " --order 5 --lambda 0.01",
                dir / "fit.json") == 0);
    const json fit = json::parse(slurp(dir / "fit.json"));
    CHECK(fit["coeffs"].size() == 15);
    CHECK(fit["lambda"].get<double>() == 0.01);

    REQUIRE(cli("gc --data " + (dir / "sim.csv").string() + " --columns ch0 ch1 --order 12 --cv",
                dir / "gc.csv") == 0);
    const std::string rows = slurp(dir / "gc.csv");
    CHECK(rows.rfind(kPairCsvHeader, 0) == 0);
  }
  SECTION("theory") {
    REQUIRE(cli("theory -n 2000 -o " + (dir / "theory.json").string()) == 0);
    const json t = json::parse(slurp(dir / "theory.json"));
    CHECK(t.contains("inputs"));
  }
  SECTION("sweep") {
    const fs::path cfg = write_file(
        "sweep.json",
        R"({"sweep_variable": "n", "values": [150, 300], "p": 5, "trials": 2, "lambda_mode": "fixed", "lambda": 0.01})");
    REQUIRE(cli("sweep --config " + cfg.string() + " --out-dir " + dir.string()) == 0);
    for (const fs::path& entry : fs::directory_iterator(dir)) {
      if (entry.extension() == ".svg") CHECK(slurp(entry).find("<svg") != std::string::npos);
    }
  }
  SECTION("bin-spikes") {
    const fs::path ev = write_file("events.csv", "unit,time\n0,0.01\n0,0.05\n1,0.03\n");
    REQUIRE(cli("bin-spikes --events " + ev.string() + " --bin-width 0.04 --t-end 0.08",
                dir / "psth.csv") == 0);
    CHECK(slurp(dir / "psth.csv").find("0.5") != std::string::npos);
  }
  SECTION("input errors exit with 2") {
    CHECK(cli("simulate --model " + (dir / "missing.json").string()) == 2);
    CHECK(cli("fit --data " + write_file("ragged.csv", "a,b\n1,2\n3\n").string()) == 2);
    CHECK(cli("sweep --config " + write_file("typo.json", R"({"trails": 2})").string()) == 2);
    CHECK(cli("simulate --no-such-flag") == 2);
    CHECK(cli("simulate -n -5") == 2);
  }
  SECTION("numerical failures exit with 3") {
    // A constant target leaves the penalty grid without a scale.
    std::string csv = "x,y\n";
    for (int i = 0; i < 60; ++i) csv += std::to_string(i % 7) + ",0\n";
    const fs::path flat = write_file("flat.csv", csv);
    CHECK(cli("fit --data " + flat.string() + " --order 2 --cv") == 3);
  }
}

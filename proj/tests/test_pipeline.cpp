#include <doctest.h>

#include "nalin/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nalin;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nalin_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

RunOutcome run(Command c, const std::string& json, const fs::path& dir, bool override_budget = false) {
  RunOptions o;
  o.out_dir = dir.string();
  o.override_budget = override_budget;
  return run_command(c, parse_config(json), o);
}

// Reduced sample counts keep a linearize run to a few seconds.
const char* kFastVerify = R"("conjugacy": {"n_last": 2, "samples_per_n": 5}, "foliation": {"enabled": false},
  "verify": {"t1": 1.0, "trajectories": 3, "inverse_samples": 20, "holder_pairs": 200, "expansion_directions": 2})";

std::string fast(const std::string& system) { return "{" + system + ", " + kFastVerify + "}"; }

}  // namespace

TEST_CASE("config parsing is strict") {
  CHECK_NOTHROW(parse_config(R"({"system": {"name": "jordan"}})"));
  const char* bad[] = {
      R"({"system": {"name": "jordan"}, "sead": 1})",
      R"({"system": {"name": "jordan"}, "lp": {"tau": 0.02, "kappa": 1}})",
      R"({"system": {"name": "jordan", "table": "x.csv"}})",
      R"({"system": {}})",
      R"({"system": {"name": "jordan"}, "seed": 1.5})",
      R"({"system": {"name": "jordan"}, "horizon": [10, -10]})",
      R"({"system": {"name": "jordan"}, "lp": {"tau": 0.3}})",
      R"({"system": {"name": "jordan"}, "verify": {"holder_pairs": 50}})",
      R"([1, 2])",
      R"({"system": )",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    try {
      parse_config(text);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::config);
    }
  }
}

TEST_CASE("seed override reaches every sampler") {
  RunConfig c = parse_config(R"({"system": {"name": "jordan"}, "seed": 5})");
  CHECK(c.verify.seed == 5);
  set_seed(c, 9);
  CHECK(c.seed == 9);
  CHECK(c.verify.seed == 9);
  CHECK(c.audit.seed == 20);
  CHECK(c.adapted.seed == 12);
}

TEST_CASE("exit code mapping") {
  CHECK(exit_code_for(ErrorCode::config) == 64);
  CHECK(exit_code_for(ErrorCode::io) == 64);
  CHECK(exit_code_for(ErrorCode::non_hyperbolic) == 2);
  CHECK(exit_code_for(ErrorCode::budget_violation) == 2);
  CHECK(exit_code_for(ErrorCode::numerical_failure) == 3);
  CHECK(exit_code_for(ErrorCode::escape) == 3);
  CHECK(parse_command("linearize") == Command::linearize);
  CHECK_FALSE(parse_command("linearise"));
}

TEST_CASE("table systems read transition matrices") {
  const fs::path dir = scratch_dir("table");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "a.csv");
    out << "# constant diagonal\nt,a11,a12,a21,a22\n-50,-1,0,0,2\n50,-1,0,0,2\n";
  }
  std::ofstream(dir / "run.json") << R"({"system": {"table": "a.csv"}, "horizon": [-50, 50], "window": [-20, 20]})";
  const RunConfig c = load_config((dir / "run.json").string());
  const SystemSetup s = build_system(c);
  CHECK(s.flow->dimension() == 2);
  const SpectrumEstimate sp = compute_spectrum(s, c);
  CHECK(sp.hyperbolic);
  CHECK(sp.stable_directions() == 1);

  std::ofstream(dir / "bad.csv") << "0,1,2\n";
  CHECK_THROWS_AS(read_table((dir / "bad.csv").string()), Error);
}

TEST_CASE("thick spectrum fails the spectral bound with exit 2") {
  const fs::path dir = scratch_dir("thick");
  const RunOutcome o = run(Command::conditions, R"({"system": {"name": "thick_spectrum_fail"}})", dir);
  CHECK(o.exit_code == exit_failed);
  const auto j = read_json(dir / "conditions.json");
  CHECK_FALSE(j["spectral_bound"]["pass"].get<bool>());
  CHECK_FALSE(j["pass"].get<bool>());
}

TEST_CASE("alpha above its upper bound is a config error") {
  const fs::path dir = scratch_dir("alpha");
  const RunOutcome o = run(Command::conditions, R"({"system": {"name": "autonomous_saddle"}, "alpha": 2.5})", dir);
  CHECK(o.exit_code == exit_config);
}

TEST_CASE("conditions for the catalog") {
  SUBCASE("autonomous saddle satisfies the budget") {
    const fs::path dir = scratch_dir("cond_saddle");
    const RunOutcome o = run(Command::conditions, R"({"system": {"name": "autonomous_saddle"}})", dir);
    CHECK(o.exit_code == exit_ok);
    const auto j = read_json(dir / "conditions.json");
    CHECK(j["alpha"]["max"].get<double>() == doctest::Approx(2.0));
    CHECK(j["budget"]["satisfied"].get<bool>());
  }
  SUBCASE("nonuniform scalar entry: rare dichotomy violations, budget banner") {
    const fs::path dir = scratch_dir("cond_nonuniform");
    const RunOutcome o = run(Command::conditions, R"({"system": {"name": "scalar_nonuniform"}})", dir);
    CHECK(o.exit_code == exit_failed);
    REQUIRE_FALSE(o.messages.empty());
    CHECK(o.messages.back().rfind("OUTSIDE GUARANTEED REGIME", 0) == 0);
    const auto j = read_json(dir / "conditions.json");
    CHECK(j["dichotomy"]["violation_rate"].get<double>() <= 0.01);
    CHECK(j["dichotomy"]["eps"].get<double>() > 0.0);
  }
}

TEST_CASE("linearize with f = 0 reproduces the identity") {
  const fs::path dir = scratch_dir("identity");
  const RunOutcome o =
      run(Command::linearize, fast(R"("system": {"name": "scalar_quadratic", "parameters": {"c": 0}})"), dir);
  CHECK(o.exit_code == exit_ok);
  const RunConfig c = parse_config(fast(R"("system": {"name": "scalar_quadratic", "parameters": {"c": 0}})"));
  for (const auto& row : read_dump((dir / "conjugacy.csv").string())) {
    CHECK((row.hx - row.x).norm() <= 10 * c.integrator.tol * row.x.norm());
  }
  const auto v = read_json(dir / "verification.json");
  CHECK(v["all_pass"].get<bool>());
  for (const auto& item : v["items"]) {
    if (item["item"] == "A1" || item["item"] == "A2") continue;
    CHECK(item["measured"].get<double>() <= 10 * c.integrator.tol);
  }
}

TEST_CASE("scalar quadratic: banner, override, series coefficient and dump re-check") {
  const std::string cfg = fast(R"("system": {"name": "scalar_quadratic"})");
  const fs::path dir = scratch_dir("quadratic");
  const RunOutcome o = run(Command::linearize, cfg, dir);
  CHECK(o.exit_code == exit_failed);
  const auto v = read_json(dir / "verification.json");
  CHECK(v["all_pass"].get<bool>());
  CHECK(v["regime"] == "outside guaranteed regime");
  const auto cj = read_json(dir / "conjugacy.json");
  CHECK(cj["series_coefficient"]["measured"].get<double>() == doctest::Approx(4.0).epsilon(0.05));
  CHECK(cj["max_residual"].get<double>() <= 1e-6);

  const RunOutcome overridden = run(Command::linearize, cfg, scratch_dir("quadratic_override"), true);
  CHECK(overridden.exit_code == exit_ok);

  const RunOutcome re = run(Command::verify, cfg, dir);
  CHECK(re.exit_code == exit_ok);
  CHECK(read_json(dir / "recheck.json")["pass"].get<bool>());

  // A tampered h value must be caught.
  std::string dump = slurp(dir / "conjugacy.csv");
  std::istringstream lines(dump);
  std::string header, first, rest, line;
  std::getline(lines, header);
  std::getline(lines, first);
  while (std::getline(lines, line)) rest += line + "\n";
  std::vector<std::string> cells;
  std::stringstream ss(first);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  REQUIRE(cells.size() == 4);
  cells[2] = std::to_string(std::stod(cells[2]) * 1.01 + 1e-3);
  std::ofstream(dir / "conjugacy.csv", std::ios::trunc)
      << header << "\n" << cells[0] << "," << cells[1] << "," << cells[2] << "," << cells[3] << "\n" << rest;
  const RunOutcome tampered = run(Command::verify, cfg, dir);
  CHECK(tampered.exit_code == exit_failed);

  std::ofstream(dir / "conjugacy.csv", std::ios::trunc) << "n,x1\n0,0.1\n";
  CHECK(run(Command::verify, cfg, dir).exit_code == exit_config);
}

TEST_CASE("reports are byte-identical across runs") {
  const std::string cfg = R"({"system": {"name": "jordan_saddle"}, "seed": 7})";
  const fs::path a = scratch_dir("det_a");
  const fs::path b = scratch_dir("det_b");
  const RunOutcome oa = run(Command::conditions, cfg, a);
  const RunOutcome ob = run(Command::conditions, cfg, b);
  CHECK(oa.exit_code == ob.exit_code);
  REQUIRE(oa.files.size() == ob.files.size());
  for (const auto& f : oa.files) {
    const fs::path name = fs::path(f).filename();
    CAPTURE(name);
    CHECK(slurp(a / name) == slurp(b / name));
  }
}

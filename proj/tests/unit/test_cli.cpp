#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "runner.hpp"

using namespace mfgcli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mfgcli_test_" + name);
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

std::string error_of(const std::string& text) {
  try {
    auto cfg = resolve(parse_config(text, "t.ini"));
    validate(cfg);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int run_solver(const std::string& args) {
  int rc = std::system((std::string(MFGSOLVE_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kSmooth = R"(mode = solve
[problem]
dim = 1
n = 40
alpha = 1.5
gamma = 2
potential = cosine-shift
amplitude = 0.5
shift1 = 0.25
coupling = 0.5:2
)";

}  // namespace

TEST_CASE("cli: parse a full config") {
  auto cfg = parse_config(R"(mode = transform
out = results
[problem]
dim = 2
n = 16
alpha = 0.8
gamma = 2
Q = 3, -1
potential = sine-cosine-product
amplitude = 1
shift1 = 0.25
shift2 = 0.25
coupling = 1:3, 0.5:2
[solver]
max_newton_per_stage = 50
[transform]
betas = 0.1, 0.01
[output]
emit = csv, json
)");
  CHECK(cfg.mode == Mode::Transform);
  CHECK(cfg.out == "results");
  CHECK(*cfg.problem.n == 16);
  CHECK(cfg.problem.Q->first == 3.0);
  CHECK(cfg.problem.Q->second == -1.0);
  REQUIRE(cfg.problem.coupling.size() == 2);
  CHECK(cfg.problem.coupling[1].c == 0.5);
  CHECK(cfg.problem.coupling[1].theta == 2.0);
  CHECK(*cfg.solver.max_newton_per_stage == 50);
  CHECK(cfg.transform.betas.size() == 2);
  CHECK(cfg.emit == std::set<std::string>{"csv", "json"});
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("cli: config errors name the field and line") {
  std::string missing = error_of("mode = solve\n[problem]\ndim = 1\nn = 20\nalpha = 1.5\ncoupling = 0.5:2\n");
  CHECK(missing.find("problem.gamma") != std::string::npos);
  CHECK(missing.find("missing") != std::string::npos);

  std::string bad = error_of("mode = solve\n[problem]\ndim = 1\nn = 20\nalpha = abc\ngamma = 2\ncoupling = 0.5:2\n");
  CHECK(bad.find("t.ini:5") != std::string::npos);
  CHECK(bad.find("problem.alpha") != std::string::npos);

  CHECK(error_of("mode = solve\n[problem]\ncolour = red\n").find("problem.colour") != std::string::npos);
  CHECK(error_of("mode = dance\n").find("dance") != std::string::npos);
  CHECK(error_of(std::string(kSmooth) + "drift = 1, 2\n").find("problem.drift") != std::string::npos);
  CHECK(error_of("mode = reproduce\npreset = nope\n").find("nope") != std::string::npos);

  std::string range = kSmooth;
  range.replace(range.find("alpha = 1.5"), 11, "alpha = 2.5");
  CHECK(error_of(range).find("problem.alpha") != std::string::npos);
  std::string conv = kSmooth;
  conv.replace(0, 12, "mode = convergence");
  CHECK(error_of(conv + "[convergence]\nn_list = 40, 20\n").find("n_list") != std::string::npos);
}

TEST_CASE("cli: preset registry") {
  auto names = preset_names();
  for (auto want : {"fig1", "borderline", "table1", "psweep", "alphasweep", "table2", "fig2d_p13", "fig2d_gamma25",
                    "transform", "secondorder"}) {
    CHECK(std::find(names.begin(), names.end(), want) != names.end());
  }
  for (const auto& n : names) {
    auto cfg = resolve(preset(n));
    CHECK_NOTHROW(validate(cfg));
  }
  auto t1 = preset("table1");
  CHECK(t1.n_list == std::vector<int>{100, 200, 400});
  CHECK(t1.problem.amplitude == 10.0);
  auto overridden = parse_config("preset = fig1\nmode = oracle\n[problem]\nn = 50\n");
  CHECK(overridden.mode == Mode::Oracle);
  CHECK(*overridden.problem.n == 50);
  CHECK(overridden.problem.amplitude == 0.5);
}

TEST_CASE("cli: convergence study on the smooth preset") {
  auto cfg = resolve(preset("fig1"));
  cfg.n_list = {50, 100};
  auto rep = convergence_study(cfg, false);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& r : rep.rows) {
    CHECK(r.converged);
    CHECK(r.max_abs_error <= 1e-6);
  }
  std::vector<ConvergenceRow> rows{{10, 1e-1, 0, 0, true}, {20, 5e-2, 0, 0, true}, {40, 2.5e-2, 0, 0, true}};
  CHECK(fitted_order(rows) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cli: oracle mode writes the result bundle") {
  auto dir = scratch_dir("oracle");
  auto cfg = resolve(parse_config("preset = fig1\nmode = oracle\n"));
  cfg.out = dir.string();
  std::ostringstream log;
  CHECK(run(cfg, log) == kExitConverged);
  CHECK(fs::exists(dir / "m.csv"));
  CHECK(fs::exists(dir / "u.csv"));
  CHECK(fs::exists(dir / "m.dat"));
  CHECK(fs::exists(dir / "m.plt"));
  auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j["Hbar"].get<double>() == doctest::Approx(-1.0).epsilon(1e-10));
  fs::remove_all(dir);
}

TEST_CASE("cli: reruns are byte-identical") {
  auto a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
  for (const auto& d : {a, b}) {
    auto cfg = parse_config(kSmooth);
    cfg.out = d.string();
    std::ostringstream log;
    CHECK(run(resolve(cfg), log) == kExitConverged);
  }
  for (auto f : {"m.csv", "u.csv"}) CHECK(slurp(a / f) == slurp(b / f));
  auto j = nlohmann::json::parse(slurp(a / "summary.json"));
  CHECK(j["mass_error"].get<double>() <= 1e-10);
  CHECK(j["umean_error"].get<double>() <= 1e-10);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("cli: executable exit codes") {
  auto dir = scratch_dir("exe");
  std::ofstream(dir / "ok.ini") << kSmooth;
  std::ofstream(dir / "nogamma.ini") << "mode = solve\n[problem]\ndim = 1\nn = 20\nalpha = 1.5\ncoupling = 0.5:2\n";
  std::string nc = kSmooth;
  nc.replace(nc.find("amplitude = 0.5"), 15, "amplitude = 10\ndrift = 1");
  std::ofstream(dir / "capped.ini") << nc << "[solver]\nmethod = projected-gradient\nmax_iters = 3\n";
  std::string out = " --out " + (dir / "o").string();
  CHECK(run_solver("--config " + (dir / "ok.ini").string() + out) == 0);
  CHECK(run_solver("--config " + (dir / "nogamma.ini").string() + out) == 1);
  CHECK(run_solver("--config " + (dir / "missing.ini").string() + out) == 1);
  CHECK(run_solver("--preset nope" + out) == 1);
  CHECK(run_solver("--emit xml --preset fig1" + out) == 1);
  CHECK(run_solver("--config " + (dir / "capped.ini").string() + out) == 2);
  CHECK(run_solver("--preset fig1 --n 30 --emit json" + out) == 0);
  CHECK(fs::exists(dir / "o" / "summary.json"));
  CHECK_FALSE(fs::exists(dir / "o" / "convergence.csv"));
  CHECK(run_solver("--list-presets") == 0);
  fs::remove_all(dir);
}

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfg/mfg.h"

namespace {

mfg_problem* cosine_problem(int n, double amplitude, double alpha = 1.5) {
  double c = 0.5, theta = 2.0;
  mfg_problem* p = nullptr;
  REQUIRE(mfg_problem_create(1, n, alpha, 2.0, nullptr, "cosine-shift", amplitude, 0.25, 0.0, &c, &theta, 1, &p) ==
          MFG_OK);
  return p;
}

std::vector<double> field(const mfg_result* r, const char* name) {
  std::vector<double> v(mfg_result_size(r));
  REQUIRE(mfg_result_field(r, name, v.data(), v.size()) == MFG_OK);
  return v;
}

}  // namespace

TEST_CASE("capi: problem creation errors") {
  double c = 0.5, theta = 2.0;
  mfg_problem* p = nullptr;
  CHECK(mfg_problem_create(1, 3, 1.5, 2.0, nullptr, "cosine-shift", 1, 0, 0, &c, &theta, 1, &p) ==
        MFG_ERR_INVALID_ARGUMENT);
  CHECK(p == nullptr);
  CHECK(std::string(mfg_last_error()).size() > 0);
  CHECK(mfg_problem_create(1, 10, 1.5, 2.0, nullptr, "bogus", 1, 0, 0, &c, &theta, 1, &p) ==
        MFG_ERR_INVALID_ARGUMENT);
  CHECK(std::string(mfg_last_error()).find("bogus") != std::string::npos);
  CHECK(mfg_problem_create(1, 10, 1.5, 2.0, nullptr, "cosine-shift", 1, 0, 0, &c, &theta, 1, nullptr) ==
        MFG_ERR_INVALID_ARGUMENT);
  std::vector<double> V(100, 0.0);
  CHECK(mfg_problem_create_sampled(2, 10, 1.5, 2.0, nullptr, V.data(), &c, &theta, 1, &p) == MFG_OK);
  CHECK(mfg_problem_size(p) == 100);
  mfg_problem_destroy(p);
  mfg_problem_destroy(nullptr);
  CHECK(std::string(mfg_version()).size() > 0);
}

TEST_CASE("capi: minimize and oracle agree on the smooth problem") {
  mfg_problem* p = cosine_problem(200, 0.5);
  mfg_solve_options o;
  mfg_solve_options_init(&o);
  CHECK(o.max_iters == 50000);
  mfg_result* r = nullptr;
  REQUIRE(mfg_minimize(p, &o, MFG_INIT_UNIFORM, 0, &r) == MFG_OK);
  CHECK(mfg_result_converged(r) == 1);
  CHECK(mfg_result_hbar(r) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(std::string(mfg_result_field_names(r)) == "u,m");

  mfg_result* o0 = nullptr;
  REQUIRE(mfg_oracle_p0(p, MFG_REFERENCE_SAME_GRID, 0, &o0) == MFG_OK);
  auto m1 = field(r, "m"), m2 = field(o0, "m");
  double worst = 0.0;
  for (std::size_t i = 0; i < m1.size(); ++i) worst = std::max(worst, std::abs(m1[i] - m2[i]));
  CHECK(worst <= 1e-6);

  auto j = nlohmann::json::parse(mfg_result_summary_json(r));
  CHECK(j["kind"] == "solve");
  CHECK(j["converged"] == true);
  CHECK(j["mass_error"].get<double>() <= 1e-10);
  CHECK(j["umean_error"].get<double>() <= 1e-10);
  CHECK(j["problem"]["n"] == 200);

  std::vector<double> small(3);
  CHECK(mfg_result_field(r, "m", small.data(), small.size()) == MFG_ERR_INVALID_ARGUMENT);
  CHECK(mfg_result_field(r, "psi", small.data(), small.size()) == MFG_ERR_INVALID_ARGUMENT);

  auto path = std::filesystem::temp_directory_path() / "mfg_capi_m.csv";
  CHECK(mfg_result_write_csv(r, "m", path.string().c_str()) == MFG_OK);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 200);
  std::filesystem::remove(path);
  CHECK(mfg_result_write_csv(r, "m", "/nonexistent/dir/m.csv") == MFG_ERR_IO);

  mfg_result_destroy(o0);
  mfg_result_destroy(r);
  mfg_problem_destroy(p);
}

TEST_CASE("capi: error codes from the solvers") {
  mfg_problem* p = cosine_problem(50, 0.5);
  mfg_result* r = nullptr;
  CHECK(mfg_critical(p, &r) == MFG_ERR_INVALID_ARGUMENT);
  CHECK(r == nullptr);
  double Q[2] = {1, 0};
  CHECK(mfg_transform(p, Q, nullptr, &r) == MFG_ERR_INVALID_ARGUMENT);
  mfg_solve_options o;
  mfg_solve_options_init(&o);
  o.armijo_c = 2.0;
  CHECK(mfg_minimize(p, &o, MFG_INIT_UNIFORM, 0, &r) == MFG_ERR_INVALID_ARGUMENT);
  double mn = 0;
  int exists = -1;
  CHECK(mfg_classical_check(p, &mn, &exists) == MFG_OK);
  CHECK(exists == 1);
  // the minimum of V sits between nodes at N = 50
  CHECK(mn == doctest::Approx(1.0 - 0.5 * std::cos(0.02 * std::numbers::pi)).epsilon(1e-12));
  mfg_problem_destroy(p);
}

TEST_CASE("capi: critical congestion") {
  double c = 0.5, theta = 2.0, P[2] = {1.0, 1.0};
  mfg_problem* p = nullptr;
  REQUIRE(mfg_problem_create(2, 12, 1.0, 2.0, P, "sine-cosine-product", 1.0, 0.25, 0.25, &c, &theta, 1, &p) ==
          MFG_OK);
  mfg_result* r = nullptr;
  REQUIRE(mfg_critical(p, &r) == MFG_OK);
  auto j = nlohmann::json::parse(mfg_result_summary_json(r));
  CHECK(j["max_residual"].get<double>() <= 1e-10);
  CHECK(j["mass_error"].get<double>() <= 1e-10);
  mfg_result_destroy(r);
  mfg_problem_destroy(p);
}

TEST_CASE("capi: transform and second order") {
  double c = 1.0, theta = 3.0;
  mfg_problem* p = nullptr;
  REQUIRE(mfg_problem_create(2, 16, 0.8, 2.0, nullptr, "sine-cosine-product", 1.0, 0.25, 0.25, &c, &theta, 1, &p) ==
          MFG_OK);
  mfg_transform_options to;
  mfg_transform_options_init(&to);
  double Q[2] = {3.0, -1.0};
  mfg_result* r = nullptr;
  REQUIRE(mfg_transform(p, Q, &to, &r) == MFG_OK);
  CHECK(mfg_result_converged(r) == 1);
  CHECK(std::string(mfg_result_field_names(r)) == "u,m,psi");
  auto j = nlohmann::json::parse(mfg_result_summary_json(r));
  CHECK(j["P_recovered"][0].get<double>() == doctest::Approx(1.0).epsilon(0.02));
  CHECK(j["residuals"]["hjb_max"].get<double>() <= 1e-8);
  mfg_result_destroy(r);
  mfg_problem_destroy(p);

  REQUIRE(mfg_problem_create(2, 20, 1.5, 2.0, nullptr, "exp-sin-cos", 1.0, 0.25, -0.5, &c, &theta, 1, &p) == MFG_OK);
  mfg_second_order_options so;
  mfg_second_order_options_init(&so);
  REQUIRE(mfg_second_order(p, &so, &r) == MFG_OK);
  CHECK(mfg_result_converged(r) == 1);
  CHECK(mfg_result_hbar(r) == doctest::Approx(-3.0).epsilon(0.05));
  auto psi = field(r, "psi");
  CHECK(psi.size() == 400);
  auto s = nlohmann::json::parse(mfg_result_summary_json(r));
  CHECK(std::abs(s["mass"].get<double>() - 1.0) <= 1e-8);
  mfg_result_destroy(r);
  mfg_problem_destroy(p);
}

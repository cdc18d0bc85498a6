// One line per acceptance criterion; exits non-zero if any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "mfg/oracle.hpp"
#include "mfg/second_order.hpp"
#include "mfg/transform.hpp"
#include "runner.hpp"

using namespace mfg;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ProblemSpec spec_from(const mfgcli::ExperimentConfig& cfg) {
  const auto& p = cfg.problem;
  TorusGrid g(*p.dim, *p.n);
  std::vector<double> drift = p.drift.empty() ? std::vector<double>(*p.dim, 0.0) : p.drift;
  std::vector<PowerTerm> terms;
  for (const auto& t : p.coupling) terms.push_back({t.c, t.theta});
  return ProblemSpec(g, *p.alpha, *p.gamma, drift, PotentialFamily::from_tag(p.potential, p.amplitude, p.shift1, p.shift2),
                     CouplingG(terms));
}

ProblemSpec preset_spec(const std::string& name, int n) {
  auto cfg = mfgcli::resolve(mfgcli::preset(name));
  cfg.problem.n = n;
  return spec_from(cfg);
}

// m = 1 + V for the P = 0, G = m^2/2 problems with mean-zero V
double classical_error(const SolveResult& r, const ProblemSpec& spec) {
  double worst = 0.0;
  for (std::size_t i = 0; i < r.m.size(); ++i) worst = std::max(worst, std::abs(r.m[i] - (spec.V[i] + 1.0)));
  return worst;
}

Outcome criterion1() {
  auto spec = preset_spec("fig1", 200);
  auto t0 = std::chrono::steady_clock::now();
  auto r = minimize(DiscreteObjective(spec), InitSpec::uniform(), {});
  double dt = seconds_since(t0);
  double em = classical_error(r, spec), eu = r.u.max_abs();
  bool ok = r.converged && em <= 1e-6 && eu <= 1e-6 && std::abs(r.Hbar + 1.0) <= 1e-4 && dt <= 60.0;
  return {ok, fmt("max|m-(V+1)| = %.3e, max|u| = %.3e, Hbar = %.10f, %.2f s", em, eu, r.Hbar, dt)};
}

Outcome criterion2() {
  auto spec = preset_spec("borderline", 200);
  auto r = minimize(DiscreteObjective(spec), InitSpec::uniform(), {});
  double em = classical_error(r, spec);
  double m34 = r.m[spec.grid.index(150)];
  bool ok = r.converged && em <= 1e-4 && m34 <= 1e-3;
  return {ok, fmt("max|m-(V+1)| = %.3e, m(3/4) = %.3e", em, m34)};
}

Outcome table_criterion(const std::string& name, const std::vector<double>& target, double budget, bool need_order) {
  auto cfg = mfgcli::resolve(mfgcli::preset(name));
  auto t0 = std::chrono::steady_clock::now();
  auto rep = mfgcli::convergence_study(cfg, false);
  double dt = seconds_since(t0);
  bool ok = rep.rows.size() == target.size() && dt <= budget;
  std::string detail = "errors";
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    double e = rep.rows[k].max_abs_error;
    double ratio = e / target[k];
    ok = ok && rep.rows[k].converged && ratio >= 1.0 / 3.0 && ratio <= 3.0;
    if (k > 0) ok = ok && e < rep.rows[k - 1].max_abs_error;
    detail += fmt(" N=%d %.3e (x%.3g of target)", rep.rows[k].n, e, ratio);
  }
  if (need_order) {
    ok = ok && std::abs(rep.order - 1.0) <= 0.3;
    detail += fmt(", order %.3f", rep.order);
  }
  detail += fmt(", %.1f s", dt);
  return {ok, detail};
}

Outcome criterion5() {
  auto spec = preset_spec("table1", 100);
  DiscreteObjective obj(spec);
  auto a = minimize(obj, InitSpec::uniform(), {});
  auto b = minimize(obj, InitSpec::random(7), {});
  double d = max_abs_diff(a.m, b.m);
  return {a.converged && b.converged && d <= 1e-5, fmt("max|m1-m2| = %.3e", d)};
}

Outcome criterion6() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ud(-0.5, 0.5), md(0.5, 2.0), vd(-1.0, 1.0);
  double worst = 0.0;
  int samples = 0;
  for (auto [alpha, gamma] : {std::pair{1.5, 2.0}, {2.0, 2.5}, {2.0, 2.0}}) {
    for (int trial = 0; trial < 20; ++trial) {
      int dim = trial % 2 + 1;
      TorusGrid g(dim, dim == 1 ? 32 : 10);
      GridFunction V(g), u(g), m(g), du(g), dm(g);
      for (std::size_t i = 0; i < g.size(); ++i) {
        V[i] = vd(rng);
        u[i] = ud(rng);
        m[i] = md(rng);
        du[i] = ud(rng);
        dm[i] = ud(rng);
      }
      u += -u.mean();
      m *= 1.0 / integrate(m);
      du += -du.mean();
      dm += -dm.mean();
      std::vector<double> P(dim);
      for (auto& p : P) p = vd(rng);
      DiscreteObjective obj(ProblemSpec(g, alpha, gamma, P, V, CouplingG({{0.5, 2.0}, {1.0, 3.0}})));
      auto grad = grad_Jh({u, m}, obj);
      double analytic = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) analytic += grad.du[i] * du[i] + grad.dm[i] * dm[i];
      const double eps = 1e-6;
      double fp = assemble_Jh({u + eps * du, m + eps * dm}, obj);
      double fm = assemble_Jh({u - eps * du, m - eps * dm}, obj);
      double fd = (fp - fm) / (2 * eps);
      worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-12));
      ++samples;
    }
  }
  return {worst <= 1e-6, fmt("%d points, worst relative error %.3e", samples, worst)};
}

Outcome criterion7() {
  double worst_res = 0.0, worst_mass = 0.0;
  int solves = 0;
  struct Case {
    int dim;
    double gamma;
    std::vector<double> P;
    const char* potential;
    double amplitude;
    std::vector<PowerTerm> coupling;
  };
  std::vector<Case> cases{
      {1, 2.0, {1.0}, "cosine-shift", 0.5, {{0.5, 2.0}}},
      {1, 2.0, {2.0}, "cosine-shift", 10.0, {{0.5, 2.0}}},
      {1, 3.0, {-0.7}, "gaussian-bump", 1.0, {{1.0, 3.0}}},
      {2, 2.0, {1.0, 1.0}, "sine-cosine-product", 10.0, {{0.5, 2.0}}},
      {2, 1.5, {0.2, -3.0}, "exp-sin-cos", 2.0, {{0.5, 2.0}, {1.0, 3.0}}},
  };
  for (const auto& c : cases) {
    TorusGrid g(c.dim, c.dim == 1 ? 200 : 40);
    ProblemSpec spec(g, 1.0, c.gamma, c.P, PotentialFamily::from_tag(c.potential, c.amplitude, 0.25, 0.25),
                     CouplingG(c.coupling));
    auto r = solve_critical(spec);
    double pg = std::pow(spec.drift_norm(), c.gamma) / c.gamma;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double m = r.solution.m[i];
      double F = pg / m - spec.coupling.g(m) - (r.solution.Hbar - spec.V[i]);
      worst_res = std::max(worst_res, std::abs(F));
    }
    worst_mass = std::max(worst_mass, std::abs(integrate(r.solution.m) - 1.0));
    ++solves;
  }
  return {worst_res <= 1e-10 && worst_mass <= 1e-10,
          fmt("%d solves, max residual %.3e, max mass error %.3e", solves, worst_res, worst_mass)};
}

Outcome criterion8() {
  auto cfg = mfgcli::resolve(mfgcli::preset("transform"));
  Vec2 Q{cfg.problem.Q->first, cfg.problem.Q->second};
  auto run = [&](int n) {
    cfg.problem.n = n;
    return pipeline_alpha_lt_1(DualSpec(spec_from(cfg), Q));
  };
  auto coarse = run(25);
  auto fine = run(50);
  bool stages = fine.dual_converged && fine.converged;
  for (const auto& b : fine.betas) stages = stages && b.converged;
  double drift = NAN;
  for (std::size_t k = 0; k + 1 < fine.betas.size(); ++k)
    if (fine.betas[k].beta == 1e-2 && fine.betas[k + 1].beta == 5e-3)
      drift = std::abs(fine.betas[k].Hbar - fine.betas[k + 1].Hbar);
  bool ok = stages && fine.residuals.hjb_max <= 1e-8 &&
            fine.residuals.dual_divergence_l1 <= coarse.residuals.dual_divergence_l1 && drift <= 1e-3;
  return {ok, fmt("stages converged %d, HJB residual %.3e, divergence L1 %.3e (N=25) -> %.3e (N=50), "
                  "beta drift %.3e, P = (%.4f, %.4f)",
                  stages ? 1 : 0, fine.residuals.hjb_max, coarse.residuals.dual_divergence_l1,
                  fine.residuals.dual_divergence_l1, drift, fine.P_recovered[0], fine.P_recovered[1])};
}

Outcome criterion9() {
  auto spec = preset_spec("secondorder", 50);
  SecondOrderSpec s(spec);
  auto r = solve_second_order(s);
  double beta = s.beta();
  double mass = 0.0;
  for (double v : r.psi.values()) mass += std::pow(v, beta);
  mass *= spec.grid.cell_volume();
  auto res = el_residual(r.psi, s, r.solution.Hbar);
  double worst = 0.0;
  for (std::size_t i = 0; i < res.size(); ++i)
    if (r.psi[i] >= 1e-6) worst = std::max(worst, std::abs(res[i]));
  bool ok = r.solution.converged && std::abs(r.solution.Hbar + 3.001) <= 0.1 && std::abs(mass - 1.0) <= 1e-8 &&
            worst <= 1e-4;
  return {ok, fmt("Hbar = %.6f, mass error %.3e, EL residual %.3e", r.solution.Hbar, mass - 1.0, worst)};
}

Outcome criterion10() {
  const int n = 200;
  TorusGrid g(1, n);
  CouplingG c({{1.0, 2.0}});
  SecondOrderSpec flat(ProblemSpec(g, 1.5, 2.0, {0.0}, GridFunction(g), c));
  const double beta = flat.beta();
  GridFunction psi(g);
  for (std::size_t i = 0; i < g.size(); ++i) psi[i] = 1.0 + 0.5 * std::cos(2 * kPi * g.position(i, 0));
  // scale so that the unit-mass constraint holds for psi*
  double mass = 0.0;
  for (double v : psi.values()) mass += std::pow(v, beta) * g.h();
  const double kappa = std::pow(mass, -1.0 / beta);
  psi *= kappa;
  // V making psi* stationary at Hbar = 0: the residual at V = 0 moved into the potential
  GridFunction r0 = el_residual(psi, flat, 0.0);
  GridFunction V(g);
  for (std::size_t i = 0; i < g.size(); ++i) V[i] = -r0[i] / std::pow(psi[i], beta / 2.0);
  auto r = solve_second_order(SecondOrderSpec(ProblemSpec(g, 1.5, 2.0, {0.0}, V, c)));
  double err = max_abs_diff(r.psi, psi);
  return {r.solution.converged && err <= 1e-4,
          fmt("max|psi - psi*| = %.3e (psi* scaled by %.6f), Hbar = %.3e", err, kappa, r.solution.Hbar)};
}

Outcome criterion11() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pd(-4.0, 4.0), md(1e-4, 10.0), td(1e-3, 1e3), ad(1.01, 3.0);
  int convex_fail = 0, zero_fail = 0, homog_fail = 0;
  const int samples = 10000;
  for (int i = 0; i < samples; ++i) {
    double gamma = ad(rng) + 0.5;
    double alpha = std::min(ad(rng), gamma);
    std::array<double, 2> P{pd(rng), pd(rng)}, p1{pd(rng), pd(rng)}, p2{pd(rng), pd(rng)};
    double m1 = md(rng), m2 = md(rng);
    std::array<double, 2> pm{0.5 * (p1[0] + p2[0]), 0.5 * (p1[1] + p2[1])};
    double mid = barf(pm, 0.5 * (m1 + m2), P, alpha, gamma);
    double avg = 0.5 * barf(p1, m1, P, alpha, gamma) + 0.5 * barf(p2, m2, P, alpha, gamma);
    if (!(mid <= avg + 1e-12 * std::max(1.0, avg))) ++convex_fail;

    std::array<double, 2> minusP{-P[0], -P[1]};
    double m = i % 10 == 0 ? 0.0 : md(rng);
    if (barf(minusP, m, P, alpha, gamma) != 0.0) ++zero_fail;

    double t = td(rng);
    std::array<double, 2> tp{t * p1[0], t * p1[1]};
    double base = barf_recession(p1, m1, gamma);
    double scaled = barf_recession(tp, t * m1, gamma);
    if (!(std::abs(scaled - t * base) <= 1e-14 * std::max(1.0, t * base))) ++homog_fail;
  }
  return {convex_fail == 0 && zero_fail == 0 && homog_fail == 0,
          fmt("%d samples: convexity failures %d, f(-P, m) != 0: %d, homogeneity failures %d", samples,
              convex_fail, zero_fail, homog_fail)};
}

}  // namespace

int main() {
  std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1},
      {2, criterion2},
      {3, [] { return table_criterion("table1", {0.03083580, 0.01517990, 0.00768403}, 600.0, true); }},
      {4, [] { return table_criterion("table2", {0.03982920, 0.00691211}, 1200.0, false); }},
      {5, criterion5},
      {6, criterion6},
      {7, criterion7},
      {8, criterion8},
      {9, criterion9},
      {10, criterion10},
      {11, criterion11},
  };
  int failed = 0;
  for (auto& [id, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mfg/error.hpp"
#include "mfg/oracle.hpp"
#include "mfg/variational.hpp"

using namespace mfg;

namespace {

DiscreteObjective make_obj(int dim, int n, double alpha, double gamma, std::vector<double> P,
                           GridFunction V, CouplingG c = CouplingG({{0.5, 2.0}})) {
  TorusGrid g(dim, n);
  return DiscreteObjective(ProblemSpec(g, alpha, gamma, std::move(P), std::move(V), std::move(c)));
}

FeasiblePoint random_point(const TorusGrid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ud(-0.3, 0.3), md(0.5, 2.0);
  GridFunction u(g), m(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    u[i] = ud(rng);
    m[i] = md(rng);
  }
  u += -u.mean();
  double mass = integrate(m);
  m *= 1.0 / mass;
  return {u, m};
}

GridFunction random_potential(const TorusGrid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  GridFunction V(g);
  for (std::size_t i = 0; i < g.size(); ++i) V[i] = d(rng);
  return V;
}

double directional_fd(const FeasiblePoint& z, const FeasiblePoint& d, const DiscreteObjective& obj,
                      double eps) {
  FeasiblePoint p{z.u + eps * d.u, z.m + eps * d.m};
  FeasiblePoint q{z.u - (eps * d.u), z.m - (eps * d.m)};
  return (assemble_Jh(p, obj) - assemble_Jh(q, obj)) / (2 * eps);
}

}  // namespace

TEST_CASE("variational: objective at constants") {
  TorusGrid g(2, 8);
  auto obj0 = make_obj(2, 8, 1.5, 2.0, {0.0, 0.0}, GridFunction(g));
  FeasiblePoint uniform{GridFunction(g), GridFunction(g, 1.0)};
  CHECK(assemble_Jh(uniform, obj0) == doctest::Approx(0.5).epsilon(1e-14));
  auto obj1 = make_obj(2, 8, 1.5, 2.0, {1.0, 0.0}, GridFunction(g));
  CHECK(assemble_Jh(uniform, obj1) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK_THROWS_AS(assemble_Jh({GridFunction(TorusGrid(2, 6)), GridFunction(TorusGrid(2, 6), 1.0)}, obj1),
                  InvalidArgument);
  CHECK_THROWS_AS(make_obj(1, 8, 1.0, 2.0, {0.0}, GridFunction(TorusGrid(1, 8))), InvalidArgument);
}

TEST_CASE("variational: Riemann consistency of the objective") {
  // smooth u, m >= 0.1 against a fine-grid sum of the continuum integrand
  constexpr double pi = std::numbers::pi;
  auto u_fn = [&](double x) { return 0.1 * std::sin(2 * pi * x); };
  auto du_fn = [&](double x) { return 0.2 * pi * std::cos(2 * pi * x); };
  auto m_fn = [&](double x) { return 1.0 + 0.5 * std::cos(2 * pi * x); };
  auto V_fn = [&](double x) { return 0.3 * std::sin(2 * pi * x); };
  const double P = 0.4, alpha = 1.5, gamma = 2.0;
  double exact = 0.0;
  {
    const int nf = 1 << 16;
    for (int i = 0; i < nf; ++i) {
      double x = (i + 0.0) / nf, m = m_fn(x);
      exact += (std::pow(std::abs(P + du_fn(x)), gamma) / (gamma * (alpha - 1) * std::pow(m, alpha - 1)) -
                V_fn(x) * m + 0.5 * m * m) /
               nf;
    }
  }
  std::vector<double> errs;
  for (int n : {16, 32, 64}) {
    TorusGrid g(1, n);
    GridFunction u(g), m(g), V(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double x = g.position(i, 0);
      u[i] = u_fn(x);
      m[i] = m_fn(x);
      V[i] = V_fn(x);
    }
    auto obj = make_obj(1, n, alpha, gamma, {P}, V);
    errs.push_back(std::abs(assemble_Jh({u, m}, obj) - exact));
  }
  for (std::size_t k = 0; k + 1 < errs.size(); ++k) CHECK(std::log2(errs[k] / errs[k + 1]) >= 2.0);
}

TEST_CASE("variational: gradient at the uniform point") {
  TorusGrid g(1, 12);
  auto V = random_potential(g, 3);
  auto obj = make_obj(1, 12, 1.5, 2.0, {0.0}, V);
  auto grad = grad_Jh({GridFunction(g), GridFunction(g, 1.0)}, obj);
  CHECK(grad.du.max_abs() == 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(grad.dm[i] == doctest::Approx(g.cell_volume() * (1.0 - V[i])).epsilon(1e-14));
}

TEST_CASE("variational: gradient matches finite differences") {
  std::mt19937_64 rng(99);
  for (auto [alpha, gamma] : {std::pair{1.5, 2.0}, {2.0, 2.5}, {2.0, 2.0}}) {
    for (int dim : {1, 2}) {
      TorusGrid g(dim, dim == 1 ? 20 : 8);
      std::vector<double> P(dim, 0.7);
      auto obj = make_obj(dim, g.n(), alpha, gamma, P, random_potential(g, 7), CouplingG({{0.5, 2.0}, {1.0, 3.0}}));
      for (int trial = 0; trial < 5; ++trial) {
        auto z = random_point(g, rng);
        auto d = random_point(g, rng);
        d.m += -d.m.mean();
        auto grad = grad_Jh(z, obj);
        double analytic = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) analytic += grad.du[i] * d.u[i] + grad.dm[i] * d.m[i];
        double fd = directional_fd(z, d, obj, 1e-6);
        CHECK(std::abs(analytic - fd) <= 1e-6 * std::max(1e-3, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("variational: gradient commutes with translation") {
  TorusGrid g(2, 9);
  std::mt19937_64 rng(4);
  GridFunction V = random_potential(g, 8);
  auto z = random_point(g, rng);
  auto idx = [&](std::size_t i) { return g.shift(g.shift(i, 0, 2), 1, 5); };
  GridFunction Vs(g), us(g), ms(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vs[i] = V[idx(i)];
    us[i] = z.u[idx(i)];
    ms[i] = z.m[idx(i)];
  }
  auto a = grad_Jh(z, make_obj(2, 9, 1.5, 2.0, {0.3, -0.2}, V));
  auto b = grad_Jh({us, ms}, make_obj(2, 9, 1.5, 2.0, {0.3, -0.2}, Vs));
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(b.du[i] == a.du[idx(i)]);
    CHECK(b.dm[i] == a.dm[idx(i)]);
  }
}

TEST_CASE("variational: convexity on the feasible set") {
  TorusGrid g(2, 8);
  std::mt19937_64 rng(12);
  auto obj = make_obj(2, 8, 1.5, 2.0, {1.0, 0.5}, random_potential(g, 2));
  std::uniform_real_distribution<double> ld(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    auto z1 = random_point(g, rng), z2 = random_point(g, rng);
    double lam = ld(rng);
    FeasiblePoint mix{lam * z1.u + (1 - lam) * z2.u, lam * z1.m + (1 - lam) * z2.m};
    CHECK(assemble_Jh(mix, obj) <= lam * assemble_Jh(z1, obj) + (1 - lam) * assemble_Jh(z2, obj) + 1e-10);
  }
}

TEST_CASE("variational: shifting V by a constant") {
  TorusGrid g(1, 16);
  std::mt19937_64 rng(1);
  auto z = random_point(g, rng);
  auto V = random_potential(g, 5);
  auto obj = make_obj(1, 16, 1.5, 2.0, {0.4}, V);
  auto shifted = make_obj(1, 16, 1.5, 2.0, {0.4}, V + GridFunction(g, 0.75));
  CHECK(assemble_Jh(z, shifted) - assemble_Jh(z, obj) == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(max_abs_diff(grad_Jh(z, shifted).du, grad_Jh(z, obj).du) == 0.0);
  auto h0 = estimate_Hbar(z, obj), h1 = estimate_Hbar(z, shifted);
  CHECK(h1.mean - h0.mean == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(h1.stddev == doctest::Approx(h0.stddev).epsilon(1e-10));
}

TEST_CASE("variational: zero drift prefers constant u") {
  TorusGrid g(2, 8);
  std::mt19937_64 rng(77);
  auto obj = make_obj(2, 8, 1.5, 2.0, {0.0, 0.0}, random_potential(g, 9));
  for (int i = 0; i < 20; ++i) {
    auto z = random_point(g, rng);
    CHECK(assemble_Jh({GridFunction(g), z.m}, obj) <= assemble_Jh(z, obj));
  }
}

TEST_CASE("variational: projection") {
  TorusGrid g(1, 10);
  auto p = project_feasible(GridFunction(g, 5.0), GridFunction(g, 2.0));
  CHECK(p.u.max_abs() == 0.0);
  for (double v : p.m.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 2.0);
  TorusGrid g2(2, 7);
  for (int t = 0; t < 50; ++t) {
    GridFunction u(g2), m(g2), u2(g2), m2(g2);
    for (std::size_t i = 0; i < g2.size(); ++i) {
      u[i] = nd(rng);
      m[i] = nd(rng);
      u2[i] = nd(rng);
      m2[i] = nd(rng);
    }
    auto a = project_feasible(u, m);
    CHECK(mass_error(a.m) <= 1e-12);
    CHECK(mean_error(a.u) <= 1e-12);
    CHECK(a.m.min() >= 0.0);
    auto again = project_feasible(a.u, a.m);
    CHECK(max_abs_diff(again.u, a.u) <= 1e-15);
    CHECK(max_abs_diff(again.m, a.m) <= 1e-15);

    auto b = project_feasible(u2, m2);
    double din = 0.0, dout = 0.0;
    for (std::size_t i = 0; i < g2.size(); ++i) {
      din += std::pow(u[i] - u2[i], 2) + std::pow(m[i] - m2[i], 2);
      dout += std::pow(a.u[i] - b.u[i], 2) + std::pow(a.m[i] - b.m[i], 2);
    }
    CHECK(dout <= din * (1 + 1e-12));

    // first-order optimality of the simplex projection: no feasible direction decreases distance
    auto s = project_simplex(m);
    double tau_lo = -1e300, tau_hi = 1e300;
    for (std::size_t i = 0; i < g2.size(); ++i) {
      if (s[i] > 0) {
        tau_lo = std::max(tau_lo, m[i] - s[i]);
        tau_hi = std::min(tau_hi, m[i] - s[i]);
      }
    }
    CHECK(tau_hi - tau_lo <= 1e-12);
    for (std::size_t i = 0; i < g2.size(); ++i)
      if (s[i] == 0.0) CHECK(m[i] <= tau_hi + 1e-12);
  }
}

TEST_CASE("variational: Hbar estimator") {
  TorusGrid g(1, 200);
  auto spec = ProblemSpec(g, 1.5, 2.0, {0.0}, PotentialFamily::from_tag("cosine-shift", 0.5, 0.25, 0),
                          CouplingG({{0.5, 2.0}}));
  DiscreteObjective obj(spec);
  auto oracle = solve_P0(spec);
  auto est = estimate_Hbar({oracle.u, oracle.m}, obj);
  CHECK(est.mean == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(est.stddev <= 1e-6);

  TorusGrid g2(2, 6);
  auto obj2 = make_obj(2, 6, 1.5, 2.0, {1.0, 0.0}, GridFunction(g2));
  auto c = estimate_Hbar({GridFunction(g2), GridFunction(g2, 1.0)}, obj2);
  CHECK(c.mean == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(c.stddev <= 1e-15);
  CHECK(c.support == g2.size());

  CHECK_THROWS_AS(estimate_Hbar({GridFunction(g2), GridFunction(g2, 1.0)}, obj2, 2.0), DegenerateSolution);
}

TEST_CASE("variational: a priori diagnostics") {
  TorusGrid g(2, 6);
  FeasiblePoint uniform{GridFunction(g), GridFunction(g, 1.0)};
  auto zero = apriori_diagnostics(uniform, make_obj(2, 6, 1.5, 2.0, {0.0, 0.0}, GridFunction(g)));
  CHECK(zero.congestion_energy_weighted == 0.0);
  CHECK(zero.coupling_balance == 0.0);
  CHECK(zero.second_order_proxy == 0.0);

  auto drift = apriori_diagnostics(uniform, make_obj(2, 6, 2.0, 2.0, {1.0, 0.0}, GridFunction(g)));
  CHECK(drift.congestion_energy_weighted == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(drift.coupling_balance == 0.0);

  std::mt19937_64 rng(6);
  auto z = random_point(g, rng);
  auto d = apriori_diagnostics(z, make_obj(2, 6, 1.5, 2.0, {0.3, 0.1}, GridFunction(g)));
  CHECK(d.congestion_energy_weighted >= 0.0);
  CHECK(d.second_order_proxy >= 0.0);

  for (double A : {0.5, 1.0, 10.0}) {
    TorusGrid g1(1, 100);
    ProblemSpec spec(g1, 1.5, 2.0, {0.0}, PotentialFamily::from_tag("cosine-shift", A, 0.25, 0),
                     CouplingG({{0.5, 2.0}}));
    auto r = solve_P0(spec);
    auto diag = apriori_diagnostics({r.u, r.m}, DiscreteObjective(spec));
    CHECK(std::isfinite(diag.congestion_energy_weighted));
    CHECK(std::isfinite(diag.coupling_balance));
    CHECK(std::isfinite(diag.second_order_proxy));
  }

  auto rec = diagnostics_record(uniform, make_obj(2, 6, 1.5, 2.0, {1.0, 0.0}, GridFunction(g)));
  for (auto key : {"Jh", "Hbar_mean", "Hbar_std", "mass_error", "umean_error", "apriori"})
    CHECK(rec.contains(key));
}

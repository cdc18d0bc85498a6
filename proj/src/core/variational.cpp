#include "mfg/variational.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "mfg/error.hpp"

namespace mfg {

namespace {

void require_grid(const FeasiblePoint& pt, const DiscreteObjective& obj) {
  const TorusGrid& g = obj.spec.grid;
  if (!(pt.u.grid() == g) || !(pt.m.grid() == g))
    throw InvalidArgument("point and objective live on different grids");
}

double squared_norm(const GridVectorField& q, std::size_t idx) {
  double s = 0.0;
  for (const auto& c : q.components) s += c[idx] * c[idx];
  return s;
}

// q = P + D u
GridVectorField drifted_gradient(const GridFunction& u, std::span<const double> drift) {
  GridVectorField q = gradient_central(u);
  for (int k = 0; k < u.grid().dim(); ++k) q[k] += drift[k];
  return q;
}

}  // namespace

DiscreteObjective::DiscreteObjective(ProblemSpec s, double floor) : spec(std::move(s)), m_floor(floor) {
  if (!(m_floor > 0.0)) throw InvalidArgument("m_floor must be positive");
  if (!(spec.alpha > 1.0)) throw InvalidArgument("the discrete functional needs alpha > 1");
}

nlohmann::json to_json(const AprioriDiagnostics& d) {
  return {{"congestion_energy_weighted", d.congestion_energy_weighted},
          {"coupling_balance", d.coupling_balance},
          {"second_order_proxy", d.second_order_proxy}};
}

double assemble_Jh(const FeasiblePoint& pt, const DiscreteObjective& obj) {
  require_grid(pt, obj);
  const ProblemSpec& s = obj.spec;
  const GridVectorField q = drifted_gradient(pt.u, s.drift);
  const double scale = 1.0 / (s.gamma * (s.alpha - 1.0));
  double sum = 0.0;
  for (std::size_t idx = 0; idx < s.grid.size(); ++idx) {
    const double m = pt.m[idx];
    const double mf = std::max(m, obj.m_floor);
    const double kinetic = scale * std::pow(squared_norm(q, idx), 0.5 * s.gamma) / std::pow(mf, s.alpha - 1.0);
    sum += kinetic - s.V[idx] * m + s.coupling.G(m);
  }
  return sum * s.grid.cell_volume();
}

ObjectiveGradient grad_Jh(const FeasiblePoint& pt, const DiscreteObjective& obj) {
  require_grid(pt, obj);
  const ProblemSpec& s = obj.spec;
  const TorusGrid& g = s.grid;
  const double w = g.cell_volume();
  const GridVectorField q = drifted_gradient(pt.u, s.drift);
  GridVectorField a(g);
  GridFunction dm(g);
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const double mf = std::max(pt.m[idx], obj.m_floor);
    const double r2 = squared_norm(q, idx);
    const double r = std::sqrt(r2);
    // d/dq |q|^gamma / (gamma (alpha - 1) m^(alpha - 1)) = |q|^(gamma - 2) q / ((alpha - 1) m^(alpha - 1))
    const double coef = r > 0.0 ? std::pow(r, s.gamma - 2.0) / ((s.alpha - 1.0) * std::pow(mf, s.alpha - 1.0)) : 0.0;
    for (int k = 0; k < g.dim(); ++k) a[k][idx] = coef * q[k][idx];
    dm[idx] = w * (-std::pow(r, s.gamma) / (s.gamma * std::pow(mf, s.alpha)) - s.V[idx] + s.coupling.g(pt.m[idx]));
  }
  // The central stencil is antisymmetric, so D^T a = -D a.
  GridFunction du = divergence_central(a);
  du *= -w;
  return {std::move(du), std::move(dm)};
}

GridFunction project_simplex(const GridFunction& m) {
  // already feasible up to roundoff in the mass: the projection is the point itself
  if (m.min() >= 0.0 && std::abs(integrate(m) - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return m;
  const double total = 1.0 / m.grid().cell_volume();
  std::vector<double> sorted(m.data());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double running = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    running += sorted[k];
    const double t = (running - total) / static_cast<double>(k + 1);
    if (sorted[k] - t > 0.0) theta = t;
  }
  GridFunction out(m.grid());
  for (std::size_t idx = 0; idx < m.size(); ++idx) out[idx] = std::max(m[idx] - theta, 0.0);
  return out;
}

FeasiblePoint project_feasible(const GridFunction& u, const GridFunction& m) {
  if (!(u.grid() == m.grid())) throw InvalidArgument("u and m live on different grids");
  GridFunction uc = u;
  uc += -u.mean();
  return {std::move(uc), project_simplex(m)};
}

HbarEstimate estimate_Hbar(const FeasiblePoint& pt, const DiscreteObjective& obj, double mass_cutoff) {
  require_grid(pt, obj);
  const ProblemSpec& s = obj.spec;
  const GridVectorField q = drifted_gradient(pt.u, s.drift);
  std::vector<double> vals;
  for (std::size_t idx = 0; idx < s.grid.size(); ++idx) {
    const double m = pt.m[idx];
    if (!(m > mass_cutoff)) continue;
    vals.push_back(std::pow(squared_norm(q, idx), 0.5 * s.gamma) / (s.gamma * std::pow(m, s.alpha)) +
                   s.V[idx] - s.coupling.g(m));
  }
  if (vals.empty())
    throw DegenerateSolution("no node has m above the cutoff " + std::to_string(mass_cutoff));
  const double n = static_cast<double>(vals.size());
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n), vals.size()};
}

AprioriDiagnostics apriori_diagnostics(const FeasiblePoint& pt, const DiscreteObjective& obj) {
  require_grid(pt, obj);
  const ProblemSpec& s = obj.spec;
  const TorusGrid& g = s.grid;
  const double abar = s.alpha / (s.gamma - 1.0);
  const GridVectorField q = drifted_gradient(pt.u, s.drift);
  const GridVectorField dm = gradient_central(pt.m);
  AprioriDiagnostics d;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const double m = pt.m[idx];
    const double mf = std::max(m, obj.m_floor);
    const double r = std::sqrt(squared_norm(q, idx));
    const double mp = std::max(m, 0.0);
    d.congestion_energy_weighted +=
        std::pow(r / std::pow(mf, abar), s.gamma) * (std::pow(mp, abar) + std::pow(mp, abar + 1.0));
    d.coupling_balance += (m - 1.0) * s.coupling.g(mp);
    d.second_order_proxy += s.coupling.g_prime(mf) * squared_norm(dm, idx);
  }
  const double w = g.cell_volume();
  d.congestion_energy_weighted *= w;
  d.coupling_balance *= w;
  d.second_order_proxy *= w;
  return d;
}

double mass_error(const GridFunction& m) { return std::abs(integrate(m) - 1.0); }
double mean_error(const GridFunction& u) { return std::abs(integrate(u)); }

nlohmann::json diagnostics_record(const FeasiblePoint& pt, const DiscreteObjective& obj,
                                  double mass_cutoff) {
  const HbarEstimate hb = estimate_Hbar(pt, obj, mass_cutoff);
  return {{"Jh", assemble_Jh(pt, obj)},
          {"Hbar_mean", hb.mean},
          {"Hbar_std", hb.stddev},
          {"mass_error", mass_error(pt.m)},
          {"umean_error", mean_error(pt.u)},
          {"apriori", to_json(apriori_diagnostics(pt, obj))}};
}

}  // namespace mfg

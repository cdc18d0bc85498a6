#include "mfg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "mfg/error.hpp"

namespace mfg {

namespace {

constexpr std::uintmax_t kMaxRootIters = 400;

bool is_zero_drift(const ProblemSpec& spec) {
  return std::all_of(spec.drift.begin(), spec.drift.end(), [](double p) { return p == 0.0; });
}

// Root of a strictly decreasing f on [lo, hi] with f(lo) >= 0 >= f(hi);
// returns whichever final bracket end has the smaller residual.
double decreasing_root(const std::function<double(double)>& f, double lo, double hi) {
  const double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (!(flo > 0.0 && fhi < 0.0)) throw NumericError("root is not bracketed");
  std::uintmax_t iters = kMaxRootIters;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                        boost::math::tools::eps_tolerance<double>(53), iters);
  return std::abs(f(a)) <= std::abs(f(b)) ? a : b;
}

// Hbar with mean(conj(V_i - Hbar)) = target, the mean running over `v`.
double mass_root(const CouplingG& coupling, const std::vector<double>& v, double target) {
  const auto [vmin, vmax] = std::minmax_element(v.begin(), v.end());
  auto excess = [&](double hbar) {
    double s = 0.0;
    for (double x : v) s += coupling.conjugate_deriv(x - hbar);
    return s / static_cast<double>(v.size()) - target;
  };
  // mass is 0 at Hbar = max V and at least `target` once V - Hbar >= g(target)
  double lo = *vmin - coupling.g(target);
  double hi = *vmax;
  double step = 1.0;
  while (excess(lo) < 0.0) {
    lo -= step;
    step *= 2.0;
    if (!std::isfinite(lo)) throw NumericError("Hbar bracket expansion failed");
  }
  return decreasing_root(excess, lo, hi);
}

SolveResult make_result(GridFunction u, GridFunction m, double hbar) {
  SolveResult r(std::move(u), std::move(m));
  r.Hbar = hbar;
  r.converged = true;
  return r;
}

}  // namespace

SolveResult solve_P0(const ProblemSpec& spec, const OracleOptions& opts) {
  if (!is_zero_drift(spec)) throw InvalidArgument("the explicit oracle needs P = 0");
  const TorusGrid& grid = spec.grid;
  double hbar;
  if (opts.reference == OracleReference::SameGrid) {
    hbar = mass_root(spec.coupling, spec.V.data(), 1.0);
  } else {
    if (!spec.potential || !spec.potential->analytic())
      throw InvalidArgument("the continuum oracle needs an analytic catalog potential");
    const int fine = opts.fine_n > 0 ? opts.fine_n : (grid.dim() == 1 ? (1 << 20) : 2048);
    const GridFunction vf = spec.potential->sample(TorusGrid(grid.dim(), fine));
    hbar = mass_root(spec.coupling, vf.data(), 1.0);
  }
  GridFunction m(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) m[i] = spec.coupling.conjugate_deriv(spec.V[i] - hbar);
  SolveResult r = make_result(GridFunction(grid, 0.0), std::move(m), hbar);
  // gradient term vanishes, so the stationarity spread is exactly zero on the support
  r.Hbar_std = 0.0;
  r.objective = std::numeric_limits<double>::quiet_NaN();
  if (spec.alpha > 1.0) {
    const DiscreteObjective obj(spec);
    const FeasiblePoint pt{r.u, r.m};
    r.objective = assemble_Jh(pt, obj);
    r.diagnostics = apriori_diagnostics(pt, obj);
    r.gradmap = gradient_mapping_norm(pt, obj);
  }
  return r;
}

CriticalResult solve_critical(const ProblemSpec& spec) {
  if (spec.alpha != 1.0) throw InvalidArgument("the critical solve needs alpha = 1");
  const double pnorm = spec.drift_norm();
  if (!(pnorm > 0.0)) throw InvalidArgument("the critical solve needs P != 0");
  const double kin = std::pow(pnorm, spec.gamma) / spec.gamma;
  const TorusGrid& grid = spec.grid;
  const CouplingG& cg = spec.coupling;

  // F(m) = kin / m - g(m) - (Hbar - V): +inf at 0+, -inf at +inf, decreasing.
  auto node_root = [&](double rhs) {
    auto f = [&](double m) { return kin / m - cg.g(m) - rhs; };
    double lo = 1.0, hi = 1.0;
    while (f(lo) < 0.0) lo *= 0.5;
    while (f(hi) > 0.0) hi *= 2.0;
    if (lo == hi) {
      if (f(lo) == 0.0) return lo;
      lo *= 0.5;
    }
    return decreasing_root(f, lo, hi);
  };
  auto masses = [&](double hbar) {
    GridFunction m(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) m[i] = node_root(hbar - spec.V[i]);
    return m;
  };
  auto excess = [&](double hbar) { return integrate(masses(hbar)) - 1.0; };

  // Mass decreases in Hbar; m = 1 at every node needs Hbar = kin - g(1) + V.
  double lo = kin - cg.g(1.0) + spec.V.min();
  double hi = kin - cg.g(1.0) + spec.V.max();
  double step = 1.0;
  while (excess(lo) < 0.0) { lo -= step; step *= 2.0; }
  step = 1.0;
  while (excess(hi) > 0.0) { hi += step; step *= 2.0; }
  const double hbar = lo == hi ? lo : decreasing_root(excess, lo, hi);

  GridFunction m = masses(hbar);
  double res = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    res = std::max(res, std::abs(kin / m[i] - cg.g(m[i]) - (hbar - spec.V[i])));
  const double merr = std::abs(integrate(m) - 1.0);
  SolveResult r = make_result(GridFunction(grid, 0.0), std::move(m), hbar);
  r.Hbar_std = 0.0;
  r.objective = std::numeric_limits<double>::quiet_NaN();
  return {std::move(r), res, merr};
}

ClassicalCheck classical_existence_check(const ProblemSpec& spec) {
  if (!is_zero_drift(spec)) throw InvalidArgument("the classical check needs P = 0");
  if (spec.gamma != 2.0) throw InvalidArgument("the classical check needs gamma = 2");
  const auto& t = spec.coupling.terms();
  if (t.size() != 1 || t[0].exponent != 2.0 || t[0].coefficient != 0.5)
    throw InvalidArgument("the classical check needs G(m) = m^2/2");
  GridFunction m = spec.V;
  m += 1.0 - spec.V.mean();
  const double mn = m.min();
  // sampled potentials touching zero exactly land within roundoff of it
  constexpr double kZeroTol = 1e-12;
  return {std::move(m), mn, mn > kZeroTol};
}

}  // namespace mfg

#include "mfg/transform.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseLU>

#include "mfg/error.hpp"
#include "stencil_matrix.hpp"

namespace mfg {

using detail::SpMat;
using detail::Vec;

TransformedExponents transform_exponents(double alpha, double gamma) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("the transform needs 0 < alpha < 1");
  if (!(gamma > 1.0)) throw InvalidArgument("the transform needs gamma > 1");
  const double gp = gamma / (gamma - 1.0);
  const double at = alpha - (alpha - 1.0) * gp;
  if (!(at > 1.0 && at < gp)) throw NumericError("transformed exponents left the range 1 < alpha~ < gamma'");
  return {gp, at};
}

DualSpec::DualSpec(ProblemSpec b, Vec2 q) : base(std::move(b)), Q(q) {
  if (base.grid.dim() != 2) throw InvalidArgument("the transform is two-dimensional");
  transform_exponents(base.alpha, base.gamma);
}

TransformedExponents DualSpec::exponents() const { return transform_exponents(base.alpha, base.gamma); }

ProblemSpec DualSpec::dual_problem() const {
  const TransformedExponents e = exponents();
  const double scale = base.gamma / e.gamma_prime;
  GridFunction v = base.V;
  v *= scale;
  return ProblemSpec(base.grid, e.alpha_tilde, e.gamma_prime, {Q[0], Q[1]}, std::move(v), base.coupling.scaled(scale));
}

SolveResult solve_dual(const DualSpec& dual, const SolveOptions& opts, const InitSpec& init) {
  const DiscreteObjective obj(dual.dual_problem());
  return minimize(obj, init, opts);
}

GridVectorField dual_flux(const GridFunction& psi, const GridFunction& m, const DualSpec& dual, double m_floor) {
  const TransformedExponents e = dual.exponents();
  const TorusGrid& g = dual.base.grid;
  if (!(psi.grid() == g) || !(m.grid() == g)) throw InvalidArgument("fields live on a different grid");
  GridVectorField f = gradient_central(psi);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q0 = dual.Q[0] + f[0][i], q1 = dual.Q[1] + f[1][i];
    const double r = std::hypot(q0, q1);
    const double w = std::pow(std::max(m[i], m_floor), 1.0 - e.alpha_tilde) *
                     (r > 0.0 ? std::pow(r, e.gamma_prime - 2.0) : 0.0);
    f[0][i] = w * q0;
    f[1][i] = w * q1;
  }
  return f;
}

Vec2 recover_P(const GridFunction& psi, const GridFunction& m, const DualSpec& dual, double m_floor) {
  const GridVectorField f = dual_flux(psi, m, dual, m_floor);
  const Vec2 w{integrate(f[0]), integrate(f[1])};
  return {-w[1], w[0]};
}

GridFunction hjb_residual(const GridFunction& u, const GridFunction& m, const Vec2& P, const ProblemSpec& spec,
                          double beta, double mass_cutoff) {
  const GridFunction up = upwind_grad_power(u, P, spec.gamma);
  GridFunction r(u.grid());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double mc = std::max(m[i], mass_cutoff);
    r[i] = beta * u[i] + up[i] / (spec.gamma * std::pow(mc, spec.alpha)) + spec.V[i] - spec.coupling.g(std::max(m[i], 0.0));
  }
  return r;
}

HjbSolution solve_hjb_discounted(const GridFunction& m, const Vec2& P, const ProblemSpec& spec, double beta,
                                 const HjbOptions& opts, const GridFunction* guess) {
  if (!(beta > 0.0)) throw InvalidArgument("the discount must be positive");
  const TorusGrid& grid = spec.grid;
  if (grid.dim() != 2) throw InvalidArgument("the discounted solve is two-dimensional");
  if (!(m.grid() == grid)) throw InvalidArgument("m lives on a different grid");
  const double gam = spec.gamma;
  const double h = grid.h();
  const auto n = static_cast<Eigen::Index>(grid.size());

  std::vector<double> inv_coef(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    inv_coef[i] = 1.0 / (gam * std::pow(std::max(m[i], opts.mass_cutoff), spec.alpha));

  GridFunction u(grid);
  if (guess) {
    u = *guess;
  } else {
    // pointwise solution with zero gradient
    const double kin = std::pow(std::abs(P[0]), gam) + std::pow(std::abs(P[1]), gam);
    for (std::size_t i = 0; i < grid.size(); ++i)
      u[i] = -(kin * inv_coef[i] + spec.V[i] - spec.coupling.g(std::max(m[i], 0.0))) / beta;
  }
  auto residual = [&](const GridFunction& x) { return hjb_residual(x, m, P, spec, beta, opts.mass_cutoff); };
  GridFunction r = residual(u);
  double rn = r.max_abs();
  int it = 0;
  Eigen::SparseLU<SpMat> lu;
  std::vector<Eigen::Triplet<double>> trips;
  while (rn > opts.tol && it < opts.max_iters) {
    ++it;
    // Jacobian of the upwind term: one-sided branches active where positive.
    trips.clear();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      double diag = beta;
      for (int k = 0; k < 2; ++k) {
        const std::size_t ip = grid.shift(i, k, 1), im = grid.shift(i, k, -1);
        const double fwd = -P[k] - (u[ip] - u[i]) / h;
        const double bwd = P[k] + (u[i] - u[im]) / h;
        if (fwd > 0.0) {
          const double d = gam * std::pow(fwd, gam - 1.0) / h * inv_coef[i];
          diag += d;
          trips.emplace_back(ii, static_cast<Eigen::Index>(ip), -d);
        }
        if (bwd > 0.0) {
          const double d = gam * std::pow(bwd, gam - 1.0) / h * inv_coef[i];
          diag += d;
          trips.emplace_back(ii, static_cast<Eigen::Index>(im), -d);
        }
      }
      trips.emplace_back(ii, ii, diag);
    }
    SpMat J(n, n);
    J.setFromTriplets(trips.begin(), trips.end());
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw NumericError("discounted HJB Jacobian factorization failed");
    const Vec step = lu.solve(-detail::to_vec(r));
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-12) {
      GridFunction trial = u;
      for (std::size_t i = 0; i < grid.size(); ++i) trial[i] += t * step[static_cast<Eigen::Index>(i)];
      GridFunction rt = residual(trial);
      const double rtn = rt.max_abs();
      if (rtn <= (1.0 - 1e-4 * t) * rn) {
        u = std::move(trial);
        r = std::move(rt);
        rn = rtn;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return {std::move(u), rn, it, rn <= opts.tol};
}

namespace {

TransformResiduals residuals_of(const TransformResult& res, const DualSpec& dual, const ProblemSpec& spec,
                                const GridFunction& u_beta, double beta, const HjbOptions& hjb, double m_floor) {
  TransformResiduals out{};
  const GridVectorField f = dual_flux(res.psi, res.m, dual, m_floor);
  const GridFunction div_c = divergence_compact(f);
  const GridFunction div_s = divergence_central(f);
  double l1c = 0.0, l1s = 0.0;
  for (std::size_t i = 0; i < div_c.size(); ++i) {
    l1c += std::abs(div_c[i]);
    l1s += std::abs(div_s[i]);
  }
  const double w = spec.grid.cell_volume();
  out.dual_divergence_l1 = l1c * w;
  out.dual_divergence_l1_stencil = l1s * w;
  out.curl_proxy = div_c.max_abs();
  out.hjb_max = hjb_residual(u_beta, res.m, res.P_recovered, spec, beta, hjb.mass_cutoff).max_abs();
  const GridVectorField du = gradient_central(res.u);
  double mis = 0.0;
  for (std::size_t i = 0; i < du[0].size(); ++i) {
    if (!(res.m[i] > hjb.mass_cutoff)) continue;
    // F^perp = (-F_2, F_1)
    mis = std::max(mis, std::hypot(res.P_recovered[0] + du[0][i] + f[1][i], res.P_recovered[1] + du[1][i] - f[0][i]));
  }
  out.flux_mismatch = mis;
  return out;
}

// Secant (Broyden) update of Q until the recovered P hits the target.
Vec2 match_target(const DualSpec& dual, const PipelineOptions& opts, SolveResult& dual_res, Vec2& P) {
  const Vec2 target = *opts.target_P;
  DualSpec cur = dual;
  // At constant fields P = Q^perp, i.e. P = J Q with J the quarter turn.
  double B[2][2] = {{0.0, -1.0}, {1.0, 0.0}};
  Vec2 mis{P[0] - target[0], P[1] - target[1]};
  for (int it = 0; it < opts.target_max_iters && std::hypot(mis[0], mis[1]) > opts.target_tol; ++it) {
    const double det = B[0][0] * B[1][1] - B[0][1] * B[1][0];
    if (det == 0.0) throw NumericError("secant update for Q became singular");
    const Vec2 dq{-(B[1][1] * mis[0] - B[0][1] * mis[1]) / det, -(-B[1][0] * mis[0] + B[0][0] * mis[1]) / det};
    cur.Q = {cur.Q[0] + dq[0], cur.Q[1] + dq[1]};
    dual_res = solve_dual(cur, opts.solve);
    const Vec2 Pn = recover_P(dual_res.u, dual_res.m, cur, DiscreteObjective(cur.dual_problem()).m_floor);
    const Vec2 misn{Pn[0] - target[0], Pn[1] - target[1]};
    const Vec2 dy{misn[0] - mis[0], misn[1] - mis[1]};
    const double dq2 = dq[0] * dq[0] + dq[1] * dq[1];
    const Vec2 bdq{B[0][0] * dq[0] + B[0][1] * dq[1], B[1][0] * dq[0] + B[1][1] * dq[1]};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) B[a][b] += (dy[a] - bdq[a]) * dq[b] / dq2;
    P = Pn;
    mis = misn;
  }
  if (std::hypot(mis[0], mis[1]) > opts.target_tol) throw NumericError("secant search for Q did not reach the target P");
  return cur.Q;
}

}  // namespace

TransformResult pipeline_alpha_lt_1(const DualSpec& dual_in, const PipelineOptions& opts) {
  if (opts.beta_schedule.empty()) throw InvalidArgument("empty discount schedule");
  for (double b : opts.beta_schedule)
    if (!(b > 0.0)) throw InvalidArgument("discounts must be positive");
  DualSpec dual = dual_in;
  const TransformedExponents e = dual.exponents();
  const double m_floor = 1e-8;

  SolveResult dres = solve_dual(dual, opts.solve);
  Vec2 P = recover_P(dres.u, dres.m, dual, m_floor);
  if (opts.target_P) dual.Q = match_target(dual, opts, dres, P);

  const ProblemSpec& spec = dual.base;
  TransformResult res{dres.u, dres.m, dual.Q, P, GridFunction(spec.grid), 0.0, 0.0, 0.0,
                      dres.converged, false, {}, {}, dres};
  res.Hbar_dual = dres.Hbar * e.gamma_prime / spec.gamma;

  bool all_ok = dres.converged;
  std::optional<GridFunction> prev;
  double prev_beta = 0.0;
  for (double beta : opts.beta_schedule) {
    std::optional<GridFunction> guess;
    if (prev) {
      // u^beta ~ -Hbar / beta + O(1): keep the oscillation, rescale the mean
      GridFunction g = *prev;
      const double mean = g.mean();
      g += -mean + mean * prev_beta / beta;
      guess = std::move(g);
    }
    HjbSolution s = solve_hjb_discounted(res.m, P, spec, beta, opts.hjb, guess ? &*guess : nullptr);
    GridFunction bu = s.u;
    bu *= beta;
    res.betas.push_back({beta, -beta * s.u.mean(), s.u.max(), bu.max() - bu.min(), s.residual, s.iters, s.converged});
    all_ok = all_ok && s.converged;
    prev = std::move(s.u);
    prev_beta = beta;
  }
  const GridFunction& ub = *prev;
  res.Hbar = res.betas.back().Hbar;
  res.Hbar_max_u = res.betas.back().Hbar_max_u;
  res.u = ub;
  res.u += -ub.max();
  res.converged = all_ok;
  res.residuals = residuals_of(res, dual, spec, ub, prev_beta, opts.hjb, m_floor);
  return res;
}

}  // namespace mfg

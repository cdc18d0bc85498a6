#include "mfg/second_order.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <boost/math/tools/toms748_solve.hpp>

#include "mfg/error.hpp"
#include "stencil_matrix.hpp"

namespace mfg {

using detail::Vec;

namespace {

constexpr int kStagnationIters = 10;

struct Exponents {
  double gamma;
  double gp;     // gamma'
  double beta;   // m = psi^beta
  double pexp;   // beta / gamma, exponent in the potential term's derivative
  double cgrad;  // beta^(gamma' - 1)
};

Exponents exponents_of(const SecondOrderSpec& s) {
  const double g = s.base.gamma;
  const double gp = s.gamma_prime();
  const double b = s.beta();
  return {g, gp, b, b / g, std::pow(b, gp - 1.0)};
}

void require_nonnegative(const GridFunction& psi) {
  for (double v : psi.values())
    if (v < 0.0 || !std::isfinite(v)) throw InvalidArgument("psi must be finite and nonnegative");
}

// phi(z) = hatG(z) - gamma / (beta + gamma) (V - Hbar) z^((beta + gamma) / gamma), per node
double pointwise(double z, double vh, const CouplingG& c, double alpha, const Exponents& e) {
  return hatG(z, c, alpha, e.gamma) - vh * std::pow(z, 1.0 + e.pexp) / (1.0 + e.pexp);
}

double pointwise_d2(double z, double vh, const CouplingG& c, const Exponents& e) {
  const double zb = std::pow(z, e.beta);
  return c.g_prime(zb) * e.beta * std::pow(z, e.beta - 1.0 + e.pexp) +
         (c.g(zb) - vh) * e.pexp * std::pow(z, e.pexp - 1.0);
}

double mass_of(const GridFunction& psi, double beta) {
  double s = 0.0;
  for (double v : psi.values()) s += std::pow(v, beta);
  return s * psi.grid().cell_volume();
}

}  // namespace

SecondOrderSpec::SecondOrderSpec(ProblemSpec b, std::optional<std::pair<double, double>> bracket)
    : base(std::move(b)), Hbar_bracket(bracket) {
  if (base.drift_norm() != 0.0) throw InvalidArgument("the second-order reduction needs P = 0");
  if (!(base.alpha > 0.0)) throw InvalidArgument("the second-order reduction needs alpha > 0");
  if (Hbar_bracket && !(Hbar_bracket->first < Hbar_bracket->second))
    throw InvalidArgument("Hbar bracket must satisfy lo < hi");
}

double SecondOrderSpec::gamma_prime() const { return base.gamma / (base.gamma - 1.0); }
double SecondOrderSpec::beta() const { return gamma_prime() / (base.alpha * base.gamma + 1.0); }

double hatG(double z, const CouplingG& coupling, double alpha, double gamma) {
  if (z < 0.0) throw InvalidArgument("hatG is defined on z >= 0");
  const double gp = gamma / (gamma - 1.0);
  const double beta = gp / (alpha * gamma + 1.0);
  double s = 0.0;
  for (const auto& t : coupling.terms()) {
    // c theta r^(beta (theta - 1)) r^(beta / gamma) integrates to c theta z^(k + 1) / (k + 1)
    const double k = beta * (t.exponent - 1.0) + beta / gamma;
    s += t.coefficient * t.exponent * std::pow(z, k + 1.0) / (k + 1.0);
  }
  return s;
}

double assemble_Jhat(const GridFunction& psi, const SecondOrderSpec& spec, double Hbar) {
  require_nonnegative(psi);
  const ProblemSpec& b = spec.base;
  if (!(psi.grid() == b.grid)) throw InvalidArgument("psi lives on a different grid");
  const Exponents e = exponents_of(spec);
  const GridVectorField q = gradient_central(psi);
  double s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    double r2 = 0.0;
    for (const auto& c : q.components) r2 += c[i] * c[i];
    s += e.cgrad * std::pow(r2, 0.5 * e.gp) / e.gp + pointwise(psi[i], b.V[i] - Hbar, b.coupling, b.alpha, e);
  }
  return s * b.grid.cell_volume();
}

GridFunction el_residual(const GridFunction& psi, const SecondOrderSpec& spec, double Hbar) {
  require_nonnegative(psi);
  const ProblemSpec& b = spec.base;
  if (!(psi.grid() == b.grid)) throw InvalidArgument("psi lives on a different grid");
  const Exponents e = exponents_of(spec);
  GridVectorField q = gradient_central(psi);
  if (e.gp != 2.0) {
    for (std::size_t i = 0; i < psi.size(); ++i) {
      double r2 = 0.0;
      for (const auto& c : q.components) r2 += c[i] * c[i];
      const double w = r2 > 0.0 ? std::pow(r2, 0.5 * (e.gp - 2.0)) : 0.0;
      for (auto& c : q.components) c[i] *= w;
    }
  }
  GridFunction out = divergence_central(q);
  out *= e.cgrad;
  for (std::size_t i = 0; i < psi.size(); ++i)
    out[i] -= (b.coupling.g(std::pow(psi[i], e.beta)) + Hbar - b.V[i]) * std::pow(psi[i], e.pexp);
  return out;
}

GridFunction grad_Jhat(const GridFunction& psi, const SecondOrderSpec& spec, double Hbar) {
  GridFunction g = el_residual(psi, spec, Hbar);
  g *= -1.0;
  return g;
}

InnerResult minimize_Jhat(const SecondOrderSpec& spec, double Hbar, const GridFunction& start,
                          const SecondOrderOptions& opts) {
  const ProblemSpec& b = spec.base;
  const TorusGrid& grid = b.grid;
  const Exponents e = exponents_of(spec);
  const int d = grid.dim();
  const auto n = static_cast<Eigen::Index>(grid.size());
  const double w = grid.cell_volume();
  std::vector<detail::SpMat> D;
  for (int k = 0; k < d; ++k) D.push_back(detail::central_diff_matrix(grid, k));
  detail::StencilNormalSolver solver(grid);

  GridFunction psi = start;
  require_nonnegative(psi);
  double f = assemble_Jhat(psi, spec, Hbar);
  int it = 0;
  bool converged = false;
  double best_pg = kInfinity;
  int stagnant = 0;
  for (; it < opts.inner_max_iters; ++it) {
    const GridFunction grad = grad_Jhat(psi, spec, Hbar);
    double pg = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) pg = std::max(pg, std::abs(psi[i] - std::max(psi[i] - grad[i], 0.0)));
    if (pg <= opts.inner_tol) {
      converged = true;
      break;
    }
    if (pg < 0.5 * best_pg) {
      best_pg = pg;
      stagnant = 0;
    } else {
      ++stagnant;
    }
    // Bound-active nodes stay at zero.
    std::vector<bool> active(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) active[i] = psi[i] <= 0.0 && grad[i] >= 0.0;

    const Vec x = detail::to_vec(psi);
    std::vector<Vec> q;
    for (int k = 0; k < d; ++k) q.push_back(D[k] * x);
    Vec r = Vec::Zero(n);
    for (const auto& c : q) r.array() += c.array().square();
    r = r.cwiseSqrt().cwiseMax(1e-10);
    std::vector<Vec> wkl(d * d);
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) {
        Vec v = e.cgrad * (e.gp - 2.0) * r.array().pow(e.gp - 4.0) * q[k].array() * q[l].array();
        if (k == l) v.array() += e.cgrad * r.array().pow(e.gp - 2.0);
        wkl[k * d + l] = std::move(v);
      }
    Vec diag(n), rhs(n);
    double scale = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      const double z = std::max(psi[iu], 1e-12);
      diag[i] = pointwise_d2(z, b.V[iu] - Hbar, b.coupling, e);
      scale = std::max(scale, std::abs(diag[i]));
      rhs[i] = active[iu] ? 0.0 : -grad[iu];
    }
    const double big = 1e12 * scale;
    auto with_active = [&](Vec dg) {
      for (Eigen::Index i = 0; i < n; ++i)
        if (active[static_cast<std::size_t>(i)]) dg[i] = big;
      return dg;
    };
    // Exact Hessian first; where it is not positive definite, replace
    // negative curvature on the diagonal.
    if (!solver.factorize(wkl, with_active(diag))) {
      Vec mod = diag.cwiseAbs().cwiseMax(1e-8 * scale);
      if (!solver.factorize(wkl, with_active(mod))) throw NumericError("modified Newton system is singular");
    }
    Vec step = solver.solve(rhs);
    double slope = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) slope += grad[static_cast<std::size_t>(i)] * step[i];
    if (!(slope < 0.0)) {
      step = rhs;
      slope = -rhs.squaredNorm();
    }
    // With gamma' < 2 the gradient is only Holder near D psi = 0, so the
    // projected gradient has a roundoff floor well above inner_tol. Stop once
    // it has not improved for a while and the model decrease is below
    // what Jhat can resolve.
    if (stagnant >= kStagnationIters && -w * slope <= 1e-13 * (1.0 + std::abs(f))) {
      converged = true;
      break;
    }
    double t = 1.0;
    bool accepted = false;
    double smax = 0.0;
    while (t > 1e-14) {
      GridFunction trial = psi;
      double dot = 0.0;
      smax = 0.0;
      for (std::size_t i = 0; i < trial.size(); ++i) {
        trial[i] = std::max(psi[i] + t * step[static_cast<Eigen::Index>(i)], 0.0);
        dot += grad[i] * (trial[i] - psi[i]);
        smax = std::max(smax, std::abs(trial[i] - psi[i]));
      }
      const double ft = assemble_Jhat(trial, spec, Hbar);
      const bool armijo = ft <= f + 1e-4 * w * dot;
      // decreases below roundoff of Jhat cannot be certified
      const bool tiny = -w * dot < 1e-13 * (1.0 + std::abs(f)) && ft <= f + 1e-13 * (1.0 + std::abs(f));
      if (armijo || tiny) {
        psi = std::move(trial);
        f = ft;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || smax <= 1e-14 * std::max(1.0, psi.max())) {
      converged = accepted || pg <= 1e3 * opts.inner_tol;
      if (accepted) ++it;
      break;
    }
  }
  return {std::move(psi), it, converged};
}

GridFunction hjb_residual_second_order(const GridFunction& u, const GridFunction& m, const ProblemSpec& base,
                                       double Hbar) {
  if (base.gamma != 2.0) throw InvalidArgument("the value-function residual needs gamma = 2");
  if (!(u.grid() == base.grid) || !(m.grid() == base.grid)) throw InvalidArgument("fields live on a different grid");
  const GridVectorField du = gradient_central(u);
  GridFunction out = divergence_central(du);
  out *= -1.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(m[i] > 0.0)) {
      out[i] = 0.0;
      continue;
    }
    double r2 = 0.0;
    for (const auto& c : du.components) r2 += c[i] * c[i];
    out[i] += r2 / (2.0 * std::pow(m[i], base.alpha)) - base.coupling.g(m[i]) - Hbar + base.V[i];
  }
  return out;
}

SecondOrderResult solve_second_order(const SecondOrderSpec& spec, const SecondOrderOptions& opts) {
  const ProblemSpec& b = spec.base;
  const TorusGrid& grid = b.grid;
  const double beta = spec.beta();
  std::vector<OuterSample> samples;
  GridFunction warm(grid, 1.0);
  int total_iters = 0;
  bool inner_ok = true;

  auto evaluate = [&](double hbar) {
    InnerResult r = minimize_Jhat(spec, hbar, warm, opts);
    total_iters += r.iters;
    inner_ok = r.converged;
    const double mass = mass_of(r.psi, beta);
    samples.push_back({hbar, mass});
    // keep a positive warm start so the next solve is not stuck at zero
    if (r.psi.max() > 0.0) warm = r.psi;
    return mass - 1.0;
  };

  double lo, hi;
  if (spec.Hbar_bracket) {
    lo = spec.Hbar_bracket->first;
    hi = spec.Hbar_bracket->second;
  } else {
    const double h0 = b.V.mean() - b.coupling.g(1.0);
    lo = h0 - 1.0;
    hi = h0 + 1.0;
  }
  double flo = evaluate(lo);
  double step = 1.0;
  for (int k = 0; flo < 0.0; ++k) {
    if (k > 60) throw NumericError("could not bracket Hbar from below");
    hi = lo;
    lo -= step;
    step *= 2.0;
    flo = evaluate(lo);
  }
  double fhi = evaluate(hi);
  step = 1.0;
  for (int k = 0; fhi > 0.0; ++k) {
    if (k > 60) throw NumericError("could not bracket Hbar from above");
    lo = hi;
    flo = fhi;
    hi += step;
    step *= 2.0;
    fhi = evaluate(hi);
  }

  double hbar;
  if (flo == 0.0) {
    hbar = lo;
  } else if (fhi == 0.0) {
    hbar = hi;
  } else {
    std::uintmax_t iters = static_cast<std::uintmax_t>(opts.outer_max_iters);
    auto tol = [&](double a, double c) {
      return std::abs(c - a) <= 4e-16 * std::max(1.0, std::abs(a)) ||
             (!samples.empty() && std::abs(samples.back().mass - 1.0) <= opts.mass_tol);
    };
    const auto [a, c] = boost::math::tools::toms748_solve(evaluate, lo, hi, flo, fhi, tol, iters);
    // the latest sample is the one that met the mass tolerance, if any did
    const OuterSample& last = samples.back();
    if (std::abs(last.mass - 1.0) <= opts.mass_tol) hbar = last.Hbar;
    else hbar = 0.5 * (a + c);
  }
  // Final solve at the root, warm-started at the closest sample.
  InnerResult fin = minimize_Jhat(spec, hbar, warm, opts);
  total_iters += fin.iters;
  const double mass = mass_of(fin.psi, beta);
  samples.push_back({hbar, mass});

  // The outer solve assumes mass decreasing in Hbar; check it on every sample.
  std::vector<OuterSample> sorted = samples;
  std::sort(sorted.begin(), sorted.end(), [](const OuterSample& x, const OuterSample& y) { return x.Hbar < y.Hbar; });
  for (std::size_t k = 1; k < sorted.size(); ++k)
    if (sorted[k].Hbar > sorted[k - 1].Hbar && sorted[k].mass > sorted[k - 1].mass + 1e-12)
      throw NumericError("mass is not decreasing in Hbar near " + std::to_string(sorted[k].Hbar));

  GridFunction m(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) m[i] = std::pow(fin.psi[i], beta);
  GridFunction u(grid);
  const bool quad = b.gamma == 2.0;
  if (quad) {
    for (std::size_t i = 0; i < grid.size(); ++i) u[i] = -std::pow(m[i], b.alpha) / b.alpha;
    u += -u.mean();
  }
  SolveResult sol(std::move(u), std::move(m));
  sol.Hbar = hbar;
  sol.objective = assemble_Jhat(fin.psi, spec, hbar);
  sol.iters = total_iters;
  sol.converged = fin.converged && inner_ok && std::abs(mass - 1.0) <= std::max(opts.mass_tol, 1e-10);
  GridFunction res = el_residual(fin.psi, spec, hbar);
  sol.gradmap = res.max_abs();
  return {std::move(sol), std::move(fin.psi), std::move(res), mass, quad, std::move(samples)};
}

}  // namespace mfg

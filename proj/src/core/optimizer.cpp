#include "mfg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mfg/error.hpp"
#include "stencil_matrix.hpp"

namespace mfg {

using detail::SpMat;
using detail::Vec;

void SolveOptions::validate() const {
  if (max_iters <= 0) throw InvalidArgument("max_iters must be positive");
  if (!(tol_gradmap > 0.0) || !(tol_obj > 0.0)) throw InvalidArgument("tolerances must be positive");
  if (!(step0 > 0.0)) throw InvalidArgument("step0 must be positive");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw InvalidArgument("armijo_c must lie in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw InvalidArgument("backtrack must lie in (0, 1)");
  if (!(mass_cutoff > 0.0)) throw InvalidArgument("mass_cutoff must be positive");
  if (!(mu_initial > 0.0) || !(mu_final > 0.0) || mu_final > mu_initial)
    throw InvalidArgument("barrier schedule needs 0 < mu_final <= mu_initial");
  if (!(mu_factor > 0.0 && mu_factor < 1.0)) throw InvalidArgument("mu_factor must lie in (0, 1)");
  if (!(newton_tol > 0.0) || max_newton_per_stage <= 0) throw InvalidArgument("invalid Newton settings");
}

std::string to_string(SolveMethod m) {
  return m == SolveMethod::BarrierNewton ? "barrier-newton" : "projected-gradient";
}

SolveMethod solve_method_from_string(const std::string& s) {
  if (s == "barrier-newton") return SolveMethod::BarrierNewton;
  if (s == "projected-gradient") return SolveMethod::ProjectedGradient;
  throw InvalidArgument("unknown solver method '" + s + "'");
}

FeasiblePoint initial_point(const TorusGrid& grid, const InitSpec& init) {
  switch (init.kind) {
    case InitKind::Uniform:
      return {GridFunction(grid, 0.0), GridFunction(grid, 1.0)};
    case InitKind::Random: {
      std::mt19937_64 rng(init.seed);
      std::uniform_real_distribution<double> um(0.5, 1.5);
      std::normal_distribution<double> nu(0.0, 1.0);
      GridFunction u(grid), m(grid);
      for (std::size_t i = 0; i < grid.size(); ++i) m[i] = um(rng);
      for (std::size_t i = 0; i < grid.size(); ++i) u[i] = 0.1 * nu(rng);
      m *= 1.0 / integrate(m);
      return {remove_stencil_kernel(u), std::move(m)};
    }
    case InitKind::Given:
      if (!init.point) throw InvalidArgument("given init without a point");
      if (!(init.point->u.grid() == grid) || !(init.point->m.grid() == grid))
        throw InvalidArgument("initial point lives on a different grid");
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (!std::isfinite(init.point->u[i]) || !std::isfinite(init.point->m[i]))
          throw InvalidInit("initial point has non-finite values");
      return project_feasible(init.point->u, init.point->m);
  }
  throw InvalidArgument("unknown init kind");
}

double gradient_mapping_norm(const FeasiblePoint& pt, const DiscreteObjective& obj) {
  const ObjectiveGradient gr = grad_Jh(pt, obj);
  const double w = obj.spec.grid.cell_volume();
  GridFunction gu = gr.du;
  gu *= 1.0 / w;
  gu += -gu.mean();
  GridFunction trial = pt.m;
  for (std::size_t i = 0; i < trial.size(); ++i) trial[i] -= gr.dm[i] / w;
  const GridFunction pm = project_simplex(trial);
  return std::max(gu.max_abs(), max_abs_diff(pt.m, pm));
}

void finalize_result(SolveResult& r, const DiscreteObjective& obj, double mass_cutoff) {
  const FeasiblePoint pt{r.u, r.m};
  const HbarEstimate hb = estimate_Hbar(pt, obj, mass_cutoff);
  r.Hbar = hb.mean;
  r.Hbar_std = hb.stddev;
  r.objective = assemble_Jh(pt, obj);
  r.gradmap = gradient_mapping_norm(pt, obj);
  r.diagnostics = apriori_diagnostics(pt, obj);
  if (!std::isfinite(r.objective)) throw NumericError("objective is not finite at the returned point");
}

namespace {

// Newton steps below this relative size are roundoff.
constexpr double kStepTol = 1e-13;
constexpr double kQuadraticRegime = 1e-10;

class BarrierNewton {
 public:
  BarrierNewton(const DiscreteObjective& obj, const SolveOptions& opts)
      : obj_(obj), spec_(obj.spec), opts_(opts), n_(static_cast<Eigen::Index>(spec_.grid.size())),
        w_(spec_.grid.cell_volume()), V_(detail::to_vec(spec_.V)), solver_(spec_.grid) {
    for (int k = 0; k < spec_.grid.dim(); ++k) D_.push_back(detail::central_diff_matrix(spec_.grid, k));
  }

  SolveResult run(FeasiblePoint start) {
    Vec u = detail::to_vec(start.u);
    Vec m = detail::to_vec(start.m);
    u.array() -= u.mean();
    m = m.cwiseMax(1e-3);
    m /= m.mean();

    SolveResult res(start.u, start.m);
    double mu = opts_.mu_initial;
    bool last_stage_ok = false;
    int total = 0;
    while (true) {
      last_stage_ok = false;
      for (int it = 0; it < opts_.max_newton_per_stage && total < opts_.max_iters; ++it) {
        Vec du, dm;
        const double dec = direction(u, m, mu, du, dm);
        ++total;
        if (!std::isfinite(dec)) throw NumericError("Newton direction is not finite");
        const double step_size = std::max(du.cwiseAbs().maxCoeff() / std::max(1.0, u.cwiseAbs().maxCoeff()),
                                          dm.cwiseAbs().maxCoeff() / std::max(1.0, m.cwiseAbs().maxCoeff()));
        if (w_ * dec < opts_.newton_tol || step_size <= kStepTol) {
          last_stage_ok = true;
          break;
        }
        double t = 1.0;
        for (Eigen::Index i = 0; i < n_; ++i)
          if (dm[i] < 0.0) t = std::min(t, -0.99 * m[i] / dm[i]);
        const double f0 = phi(u, m, mu);
        while (t > 1e-16) {
          const double f1 = phi(u + t * du, m + t * dm, mu);
          if (f1 <= f0 - opts_.armijo_c * t * w_ * dec) break;
          // Predicted decrease below the objective's roundoff: Armijo cannot
          // tell, so accept any step that does not visibly increase phi.
          if (w_ * dec < kQuadraticRegime && f1 <= f0 + 1e-13 * (1.0 + std::abs(f0))) break;
          t *= opts_.backtrack;
        }
        if (!(t > 1e-16)) {
          // no representable decrease left: stationary to roundoff
          last_stage_ok = w_ * dec < 1e-12;
          break;
        }
        u += t * du;
        m += t * dm;
        u.array() -= u.mean();
        if (opts_.record_trace) {
          res.u = detail::to_grid(spec_.grid, u);
          res.m = detail::to_grid(spec_.grid, m);
          const FeasiblePoint pt{res.u, res.m};
          res.trace.push_back({total, assemble_Jh(pt, obj_), gradient_mapping_norm(pt, obj_), t});
        }
      }
      if (mu <= opts_.mu_final || total >= opts_.max_iters) break;
      mu = std::max(mu * opts_.mu_factor, opts_.mu_final);
    }
    m /= m.mean();
    res.u = remove_stencil_kernel(detail::to_grid(spec_.grid, u));
    res.m = detail::to_grid(spec_.grid, m);
    res.iters = total;
    res.converged = last_stage_ok && mu <= opts_.mu_final;
    return res;
  }

 private:
  std::vector<Vec> drifted(const Vec& u) const {
    std::vector<Vec> q;
    for (std::size_t k = 0; k < D_.size(); ++k) q.push_back((D_[k] * u).array() + spec_.drift[k]);
    return q;
  }

  static Vec norm_of(const std::vector<Vec>& q) {
    Vec r2 = Vec::Zero(q[0].size());
    for (const auto& c : q) r2.array() += c.array().square();
    return r2.cwiseSqrt();
  }

  // Barrier objective on the unfloored integrand; +inf outside m > 0.
  double phi(const Vec& u, const Vec& m, double mu) const {
    if ((m.array() <= 0.0).any()) return kInfinity;
    const double a = spec_.alpha, g = spec_.gamma;
    const Vec r = norm_of(drifted(u));
    const double c = 1.0 / (g * (a - 1.0));
    double s = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i)
      s += c * std::pow(r[i], g) * std::pow(m[i], 1.0 - a) - V_[i] * m[i] + spec_.coupling.G(m[i]) -
           mu * std::log(m[i]);
    return w_ * s;
  }

  // Newton step on the barrier problem restricted to sum(dm) = 0. Returns
  // the decrement -grad . step (without the h^d weight).
  //
  // The Hessian is [[A, B], [B^T, C]] with C diagonal. The m-block is
  // eliminated and the Schur complement S = A - B C^-1 B^T, which has the
  // pattern of sum_kl D_k^T D_l, is factorized.
  double direction(const Vec& u, const Vec& m, double mu, Vec& du, Vec& dm) {
    const double a = spec_.alpha, g = spec_.gamma;
    const double c = 1.0 / (g * (a - 1.0));
    const int d = spec_.grid.dim();
    const std::vector<Vec> q = drifted(u);
    const Vec r = norm_of(q);
    const Vec re = r.cwiseMax(1e-10);
    const Vec m1a = m.array().pow(1.0 - a);
    const Vec ma = m.array().pow(-a);

    Vec gu = Vec::Zero(n_);
    const Vec coef = (r.array() > 0.0).select(c * g * r.array().pow(g - 2.0) * m1a.array(), 0.0);
    for (int k = 0; k < d; ++k) gu += D_[k].transpose() * (coef.array() * q[k].array()).matrix();
    Vec gm(n_), hmm(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      gm[i] = -(a - 1.0) * c * std::pow(r[i], g) * ma[i] - V_[i] + spec_.coupling.g(m[i]) - mu / m[i];
      hmm[i] = c * a * (a - 1.0) * std::pow(r[i], g) * ma[i] / m[i] + spec_.coupling.g_prime(m[i]) +
               mu / (m[i] * m[i]);
    }

    // Per-node weights: A = sum_kl D_k^T diag(akl) D_l, B = sum_k D_k^T diag(bk).
    const Vec b1 = c * g * re.array().pow(g - 2.0) * m1a.array();
    const Vec b2 = c * g * (g - 2.0) * re.array().pow(g - 4.0) * m1a.array();
    std::vector<Vec> bk(d);
    for (int k = 0; k < d; ++k) bk[k] = c * g * (1.0 - a) * re.array().pow(g - 2.0) * q[k].array() * ma.array();
    std::vector<Vec> skl(d * d);
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) {
        Vec w = b2.array() * q[k].array() * q[l].array();
        if (k == l) w += b1;
        skl[k * d + l] = w.array() - bk[k].array() * bk[l].array() / hmm.array();
      }
    // Nodewise shift relative to the node's own diagonal: near-vacuum nodes
    // carry weights ~ 1/m, and a global shift scaled by them would swamp
    // the rest of the grid.
    const Vec reg = 1e-10 * solver_.stencil_diagonal(skl).cwiseMax(1.0);
    if (!solver_.factorize(skl, reg)) throw NumericError("Newton system factorization failed");

    // Solves H [xu; xm] = [ru; rm].
    auto solve = [&](const Vec& ru, const Vec& rm, Vec& xu, Vec& xm) {
      const Vec t = rm.cwiseQuotient(hmm);
      Vec rhs = ru;
      for (int k = 0; k < d; ++k) rhs -= D_[k].transpose() * bk[k].cwiseProduct(t);
      xu = solver_.solve(rhs);
      Vec bt = Vec::Zero(n_);
      for (int k = 0; k < d; ++k) bt += bk[k].cwiseProduct(D_[k] * xu);
      xm = (rm - bt).cwiseQuotient(hmm);
    };
    Vec xu, xm, yu, ym;
    solve(-gu, -gm, xu, xm);
    solve(Vec::Zero(n_), Vec::Ones(n_), yu, ym);
    const double nu = xm.sum() / ym.sum();
    du = xu - nu * yu;
    dm = xm - nu * ym;
    dm.array() -= dm.mean();
    // The m-gradient carries the mass multiplier as a large constant; drop
    // it before the dot product since dm sums to zero.
    const Vec gmc = gm.array() - gm.mean();
    return -(gu.dot(du) + gmc.dot(dm));
  }


  const DiscreteObjective& obj_;
  const ProblemSpec& spec_;
  const SolveOptions& opts_;
  Eigen::Index n_;
  double w_;
  Vec V_;
  std::vector<SpMat> D_;
  detail::StencilNormalSolver solver_;
};

class ProjectedGradient {
 public:
  ProjectedGradient(const DiscreteObjective& obj, const SolveOptions& opts) : obj_(obj), opts_(opts) {}

  SolveResult run(FeasiblePoint z) {
    const double w = obj_.spec.grid.cell_volume();
    SolveResult res(z.u, z.m);
    double f = assemble_Jh(z, obj_);
    std::vector<double> history{f};
    double t_last = opts_.step0;
    for (int it = 1; it <= opts_.max_iters; ++it) {
      const ObjectiveGradient gr = grad_Jh(z, obj_);
      double t = std::min(opts_.step0, 2.0 * t_last);
      FeasiblePoint trial = z;
      double f_trial = f;
      double gm = 0.0;
      while (true) {
        GridFunction u = z.u, m = z.m;
        for (std::size_t i = 0; i < u.size(); ++i) {
          u[i] -= t * gr.du[i] / w;
          m[i] -= t * gr.dm[i] / w;
        }
        trial = project_feasible(u, m);
        double slope = 0.0;  // grad . (z+ - z), h^d already inside grad
        double dist = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
          const double a = trial.u[i] - z.u[i], b = trial.m[i] - z.m[i];
          slope += gr.du[i] * a + gr.dm[i] * b;
          dist = std::max({dist, std::abs(a), std::abs(b)});
        }
        gm = dist / t;
        f_trial = assemble_Jh(trial, obj_);
        if (f_trial <= f + opts_.armijo_c * slope) break;
        t *= opts_.backtrack;
        if (t < 1e-300) throw NumericError("projected-gradient line search collapsed");
      }
      z = std::move(trial);
      f = f_trial;
      t_last = t;
      history.push_back(f);
      if (opts_.record_trace) res.trace.push_back({it, f, gm, t});
      res.iters = it;
      if (gm <= opts_.tol_gradmap) {
        res.converged = true;
        break;
      }
      if (history.size() > 50) {
        const double old = history[history.size() - 51];
        if (old - f <= opts_.tol_obj * std::max(1.0, std::abs(old))) {
          res.converged = true;
          break;
        }
      }
    }
    res.u = remove_stencil_kernel(z.u);
    res.m = z.m;
    return res;
  }

 private:
  const DiscreteObjective& obj_;
  const SolveOptions& opts_;
};

}  // namespace

SolveResult minimize(const DiscreteObjective& obj, const InitSpec& init, const SolveOptions& opts) {
  opts.validate();
  FeasiblePoint start = initial_point(obj.spec.grid, init);
  const double f0 = assemble_Jh(start, obj);
  if (!std::isfinite(f0)) throw InvalidInit("objective is not finite at the initial point");
  SolveResult res = opts.method == SolveMethod::BarrierNewton ? BarrierNewton(obj, opts).run(std::move(start))
                                                              : ProjectedGradient(obj, opts).run(std::move(start));
  finalize_result(res, obj, opts.mass_cutoff);
  return res;
}

}  // namespace mfg

#pragma once

#include <array>
#include <vector>

#include "mfg/optimizer.hpp"

namespace mfg {

struct TransformedExponents {
  double gamma_prime;
  double alpha_tilde;
};

/// gamma' = gamma / (gamma - 1), alpha~ = alpha - (alpha - 1) gamma'.
/// Needs 0 < alpha < 1 and gamma > 1, which puts alpha~ in (1, gamma').
TransformedExponents transform_exponents(double alpha, double gamma);

using Vec2 = std::array<double, 2>;

/// Problem with 0 < alpha < 1 in 2D, together with the constant Q of the
/// divergence-free flux.
struct DualSpec {
  ProblemSpec base;
  Vec2 Q;

  DualSpec(ProblemSpec base, Vec2 Q);
  TransformedExponents exponents() const;
  /// Variational problem in (psi, m): exponents (alpha~, gamma'), drift Q,
  /// potential and coupling scaled by gamma / gamma'.
  ProblemSpec dual_problem() const;
};

/// Minimizes the dual functional; result.u holds psi.
SolveResult solve_dual(const DualSpec& dual, const SolveOptions& opts, const InitSpec& init = {});

/// F = m^(1 - alpha~) |Q + D psi|^(gamma' - 2) (Q + D psi), m floored at m_floor.
GridVectorField dual_flux(const GridFunction& psi, const GridFunction& m, const DualSpec& dual,
                          double m_floor = 1e-8);

/// P from the quadrature W = h^2 sum F: P = W^perp = (-W_2, W_1).
Vec2 recover_P(const GridFunction& psi, const GridFunction& m, const DualSpec& dual,
               double m_floor = 1e-8);

struct HjbOptions {
  double tol = 1e-10;        // max-norm residual
  int max_iters = 200;       // Newton iterations
  double mass_cutoff = 1e-4; // floor for m inside m^alpha
};

struct HjbSolution {
  GridFunction u;
  double residual;
  int iters;
  bool converged;
};

/// Residual beta u + upwind_grad_power(u, P, gamma) / (gamma m^alpha) + V - g(m)
/// with m floored at the cutoff.
GridFunction hjb_residual(const GridFunction& u, const GridFunction& m, const Vec2& P,
                          const ProblemSpec& spec, double beta, double mass_cutoff = 1e-4);

/// Solves the discounted monotone scheme by semismooth Newton with a
/// residual line search, starting from `guess` when given.
HjbSolution solve_hjb_discounted(const GridFunction& m, const Vec2& P, const ProblemSpec& spec, double beta,
                                 const HjbOptions& opts = {}, const GridFunction* guess = nullptr);

struct BetaRecord {
  double beta;
  double Hbar;             // -beta * mean(u)
  double Hbar_max_u;  // max u
  double oscillation;      // max(beta u) - min(beta u)
  double residual;
  int iters;
  bool converged;
};

struct TransformResiduals {
  double dual_divergence_l1;        // compact-stencil divergence of F, discrete L1
  double dual_divergence_l1_stencil; // same with the solver's five-point stencil
  double hjb_max;
  double curl_proxy;                // max |div F|, the discrete curl of F^perp
  double flux_mismatch;             // max |P + D u - F^perp| on nodes with m above the cutoff
};

struct TransformResult {
  GridFunction psi;
  GridFunction m;
  Vec2 Q;
  Vec2 P_recovered;
  GridFunction u;
  double Hbar;
  double Hbar_max_u;
  double Hbar_dual;  // gamma'/gamma times the dual stationarity mean
  bool dual_converged;
  bool converged;
  std::vector<BetaRecord> betas;
  TransformResiduals residuals;
  SolveResult dual;
};

struct PipelineOptions {
  SolveOptions solve;
  HjbOptions hjb;
  std::vector<double> beta_schedule{1e-1, 1e-2, 5e-3, 1e-3};
  /// When set, Q is adjusted by a secant iteration until P matches it.
  std::optional<Vec2> target_P;
  double target_tol = 1e-3;
  int target_max_iters = 20;
};

TransformResult pipeline_alpha_lt_1(const DualSpec& dual, const PipelineOptions& opts = {});

}  // namespace mfg

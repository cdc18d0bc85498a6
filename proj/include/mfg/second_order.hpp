#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "mfg/optimizer.hpp"

namespace mfg {

/// Second-order congestion problem with P = 0, reduced to a scalar
/// minimization in psi >= 0 with m = psi^beta, where
///   gamma' = gamma / (gamma - 1),  beta = gamma' / (alpha gamma + 1).
/// For gamma = 2 this is beta = 2 / (2 alpha + 1).
struct SecondOrderSpec {
  ProblemSpec base;
  std::optional<std::pair<double, double>> Hbar_bracket;

  explicit SecondOrderSpec(ProblemSpec base, std::optional<std::pair<double, double>> bracket = std::nullopt);

  double gamma_prime() const;
  double beta() const;
};

/// hatG(z) = int_0^z g(r^beta) r^(beta / gamma) dr, in closed form for power
/// couplings. With gamma = 2 the exponents are 2 / (2 alpha + 1) and 1 / (2 alpha + 1).
double hatG(double z, const CouplingG& coupling, double alpha, double gamma = 2.0);

/// Jhat = h^d sum [ beta^(gamma' - 1) |D psi|^gamma' / gamma' + hatG(psi)
///                  - gamma / (beta + gamma) (V - Hbar) psi^((beta + gamma) / gamma) ].
double assemble_Jhat(const GridFunction& psi, const SecondOrderSpec& spec, double Hbar);

/// Gradient of assemble_Jhat divided by h^d.
GridFunction grad_Jhat(const GridFunction& psi, const SecondOrderSpec& spec, double Hbar);

/// beta^(gamma' - 1) sum_k D_k(|D psi|^(gamma' - 2) D_k psi) - (g(psi^beta) + Hbar - V) psi^(beta / gamma),
/// the Euler-Lagrange residual; equals -grad_Jhat.
GridFunction el_residual(const GridFunction& psi, const SecondOrderSpec& spec, double Hbar);

struct SecondOrderOptions {
  double inner_tol = 1e-11;   // max |projected gradient|
  int inner_max_iters = 500;
  double mass_tol = 1e-12;
  int outer_max_iters = 200;
};

struct OuterSample {
  double Hbar;
  double mass;
};

struct SecondOrderResult {
  SolveResult solution;  // u, m = psi^beta, Hbar
  GridFunction psi;
  GridFunction residual;  // el_residual at the returned psi
  double mass;
  bool u_reconstructed;   // u = -m^alpha / alpha + c needs gamma = 2
  std::vector<OuterSample> outer;
};

/// Inner problem at fixed Hbar: projected Newton on psi >= 0.
struct InnerResult {
  GridFunction psi;
  int iters;
  bool converged;
};
InnerResult minimize_Jhat(const SecondOrderSpec& spec, double Hbar, const GridFunction& start,
                          const SecondOrderOptions& opts = {});

/// Residual of the value-function equation for gamma = 2, P = 0:
///   -sum_k D_k D_k u + |D u|^2 / (2 m^alpha) - g(m) - Hbar + V,
/// evaluated at nodes with m > 0 (zero elsewhere).
GridFunction hjb_residual_second_order(const GridFunction& u, const GridFunction& m, const ProblemSpec& base,
                                       double Hbar);

SecondOrderResult solve_second_order(const SecondOrderSpec& spec, const SecondOrderOptions& opts = {});

}  // namespace mfg

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfg/variational.hpp"

namespace mfg {

enum class SolveMethod {
  /// Log-barrier Newton on the simplex with a decreasing barrier weight.
  BarrierNewton,
  /// Projected gradient with Armijo backtracking.
  ProjectedGradient,
};

struct SolveOptions {
  SolveMethod method = SolveMethod::BarrierNewton;
  int max_iters = 50000;
  double tol_gradmap = 1e-9;
  double tol_obj = 1e-13;
  double step0 = 1.0;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  std::uint64_t seed = 0;
  double mass_cutoff = 1e-4;
  // barrier schedule
  double mu_initial = 1e-1;
  double mu_final = 1e-12;
  double mu_factor = 0.1;
  /// Stage ends once h^d times the Newton decrement drops below this.
  double newton_tol = 1e-20;
  int max_newton_per_stage = 100;
  bool record_trace = false;

  void validate() const;
};

struct TraceRow {
  int iter;
  double objective;
  double gradmap;
  double step;
};

struct SolveResult {
  SolveResult(GridFunction u_, GridFunction m_) : u(std::move(u_)), m(std::move(m_)) {}

  GridFunction u;
  GridFunction m;
  double Hbar = 0.0;
  double Hbar_std = 0.0;
  double objective = 0.0;
  double gradmap = 0.0;
  int iters = 0;
  bool converged = false;
  AprioriDiagnostics diagnostics;
  std::vector<TraceRow> trace;
};

enum class InitKind { Uniform, Random, Given };

struct InitSpec {
  InitKind kind = InitKind::Uniform;
  std::uint64_t seed = 0;
  std::optional<FeasiblePoint> point;

  static InitSpec uniform() { return {}; }
  static InitSpec random(std::uint64_t seed) { return {InitKind::Random, seed, std::nullopt}; }
  static InitSpec given(FeasiblePoint pt) { return {InitKind::Given, 0, std::move(pt)}; }
};

/// Starting point for `init`: uniform is (0, 1); random draws m ~ U(0.5, 1.5)
/// and u ~ 0.1 N(0, 1) with a seeded generator, then projects onto A_h.
FeasiblePoint initial_point(const TorusGrid& grid, const InitSpec& init);

/// Norm (max over nodes) of (z - proj(z - grad)) with the gradient taken in
/// the grid L2 inner product; zero exactly at a constrained minimizer.
double gradient_mapping_norm(const FeasiblePoint& pt, const DiscreteObjective& obj);

/// Minimizes J_h over A_h. The returned u is mean-zero with the stencil
/// kernel removed.
SolveResult minimize(const DiscreteObjective& obj, const InitSpec& init, const SolveOptions& opts);

/// Fills Hbar, objective, gradmap and diagnostics for a given point.
void finalize_result(SolveResult& r, const DiscreteObjective& obj, double mass_cutoff);

std::string to_string(SolveMethod m);
SolveMethod solve_method_from_string(const std::string& s);

}  // namespace mfg

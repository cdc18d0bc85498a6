#pragma once

#include "mfg/model.hpp"
#include "mfg/optimizer.hpp"

namespace mfg {

enum class OracleReference {
  /// Unit mass enforced by the grid quadrature itself.
  SameGrid,
  /// Hbar fixed by fine-grid quadrature of the analytic potential, then
  /// m = (G*)'(V - Hbar) sampled at the nodes. Needs a catalog potential.
  Continuum,
};

struct OracleOptions {
  OracleReference reference = OracleReference::SameGrid;
  /// Points per axis of the quadrature grid for Continuum; 0 picks
  /// 2^20 in 1D and 2048 in 2D.
  int fine_n = 0;
};

/// Explicit minimizer for P = 0: u = 0, m = (G*)'(V - Hbar) with Hbar set
/// by unit mass.
SolveResult solve_P0(const ProblemSpec& spec, const OracleOptions& opts = {});

struct CriticalResult {
  SolveResult solution;
  double max_residual;  // max over nodes of |F(m)|
  double mass_error;
};

/// alpha = 1: u constant and m(x) the root of
///   |P|^gamma / (gamma m) - g(m) - (Hbar - V(x)) = 0
/// at every node, with Hbar chosen for unit mass.
CriticalResult solve_critical(const ProblemSpec& spec);

struct ClassicalCheck {
  GridFunction m_formula;
  double min_value;
  bool classical_exists;
};

/// For P = 0, gamma = 2, G = m^2/2: the only candidate classical solution is
/// m = 1 + V - mean(V); it exists when that stays positive.
ClassicalCheck classical_existence_check(const ProblemSpec& spec);

}  // namespace mfg

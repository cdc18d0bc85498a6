#pragma once

#include <cstddef>

#include <nlohmann/json.hpp>

#include "mfg/grid.hpp"
#include "mfg/model.hpp"

namespace mfg {

/// Discrete congestion functional
///   J_h(u, m) = h^d sum [ |P + D u|^gamma / (gamma (alpha - 1) max(m, m_floor)^(alpha - 1))
///                         - V m + G(m) ]
/// with D the five-point central gradient.
struct DiscreteObjective {
  ProblemSpec spec;
  double m_floor = 1e-8;

  explicit DiscreteObjective(ProblemSpec spec, double m_floor = 1e-8);
};

struct FeasiblePoint {
  GridFunction u;
  GridFunction m;
};

struct ObjectiveGradient {
  GridFunction du;
  GridFunction dm;
};

struct HbarEstimate {
  double mean;
  double stddev;
  std::size_t support;  // nodes with m > cutoff
};

struct AprioriDiagnostics {
  double congestion_energy_weighted = 0.0;
  double coupling_balance = 0.0;
  double second_order_proxy = 0.0;
};

nlohmann::json to_json(const AprioriDiagnostics& d);

double assemble_Jh(const FeasiblePoint& pt, const DiscreteObjective& obj);

/// Exact partial derivatives of assemble_Jh (including the h^d weight).
ObjectiveGradient grad_Jh(const FeasiblePoint& pt, const DiscreteObjective& obj);

/// Euclidean projection of m onto {m >= 0, h^d sum m = 1}.
GridFunction project_simplex(const GridFunction& m);

/// Mean-zero u and simplex-projected m.
FeasiblePoint project_feasible(const GridFunction& u, const GridFunction& m);

/// Mean and standard deviation of |P + D u|^gamma / (gamma m^alpha) + V - g(m)
/// over nodes with m > mass_cutoff. Throws DegenerateSolution when no node
/// qualifies.
HbarEstimate estimate_Hbar(const FeasiblePoint& pt, const DiscreteObjective& obj,
                           double mass_cutoff = 1e-4);

/// With abar = alpha / (gamma - 1):
///   congestion  h^d sum |q / m^abar|^gamma (m^abar + m^(abar + 1)),  q = P + D u
///   coupling    h^d sum (m - 1) g(m)
///   proxy       h^d sum g'(m) |D m|^2
/// m is floored at m_floor wherever it appears in a negative power.
AprioriDiagnostics apriori_diagnostics(const FeasiblePoint& pt, const DiscreteObjective& obj);

double mass_error(const GridFunction& m);
double mean_error(const GridFunction& u);

/// {Jh, Hbar_mean, Hbar_std, mass_error, umean_error, apriori}
nlohmann::json diagnostics_record(const FeasiblePoint& pt, const DiscreteObjective& obj,
                                  double mass_cutoff = 1e-4);

}  // namespace mfg

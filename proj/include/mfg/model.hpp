#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfg/grid.hpp"

namespace mfg {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct PowerTerm {
  double coefficient;  // c > 0
  double exponent;     // theta > 1
};

/// Convex coupling G(z) = sum_k c_k z^theta_k with g = G'.
/// Positive coefficients and exponents above one make G strictly convex and
/// coercive on [0, inf), and g strictly increasing with g(0+) = 0.
class CouplingG {
 public:
  CouplingG() = default;
  explicit CouplingG(std::vector<PowerTerm> terms);

  const std::vector<PowerTerm>& terms() const { return terms_; }

  double G(double z) const;
  double g(double z) const;
  double g_prime(double z) const;
  /// Right limit g(0+); zero for every admissible power sum.
  double g_at_zero() const { return 0.0; }

  /// (G*)'(q): the unique m >= 0 with g(m) = q, or 0 when q <= g(0+).
  double conjugate_deriv(double q) const;

  /// Coupling with every coefficient multiplied by s > 0.
  CouplingG scaled(double s) const;

 private:
  std::vector<PowerTerm> terms_;
};

double eval_G(const CouplingG& coupling, double z);
double eval_g(const CouplingG& coupling, double z);
double conjugate_deriv(const CouplingG& coupling, double q);

enum class PotentialKind { CosineShift, SineCosineProduct, GaussianBump, ExpSinCos, CustomSamples };

/// Named potential catalog. With A = amplitude, s1 = shift1, s2 = shift2:
///   cosine-shift         A cos(2 pi (x - s1))
///   sine-cosine-product  A sin(2 pi (x + s1)) [* cos(2 pi (y + s2)) in 2D]
///   gaussian-bump        A exp(-(x - s1)^2 [- (y - s2)^2])
///   exp-sin-cos          A exp(-sin^2(2 pi (x + s1))) cos(2 pi (y + s2))   (2D)
///   custom-samples       raw node values
struct PotentialFamily {
  PotentialKind kind = PotentialKind::CosineShift;
  double amplitude = 0.0;
  double shift1 = 0.0;
  double shift2 = 0.0;
  std::vector<double> samples;

  static PotentialFamily from_tag(const std::string& tag, double amplitude, double shift1,
                                  double shift2);
  static PotentialFamily custom(std::vector<double> samples);

  std::string tag() const;
  bool analytic() const { return kind != PotentialKind::CustomSamples; }
  /// Point evaluation; throws for custom samples.
  double operator()(double x, double y = 0.0) const;
  GridFunction sample(const TorusGrid& grid) const;
};

/// Everything needed to pose one congestion MFG on a grid.
struct ProblemSpec {
  TorusGrid grid;
  double alpha;
  double gamma;
  std::vector<double> drift;  // P, one entry per axis
  GridFunction V;
  CouplingG coupling;
  std::optional<PotentialFamily> potential;  // set when V came from the catalog

  ProblemSpec(TorusGrid grid, double alpha, double gamma, std::vector<double> drift,
              GridFunction V, CouplingG coupling);
  ProblemSpec(TorusGrid grid, double alpha, double gamma, std::vector<double> drift,
              const PotentialFamily& potential, CouplingG coupling);

  double drift_norm() const;
};

/// Extended congestion integrand
///   |P + p|^gamma / (gamma (alpha - 1) m^(alpha - 1))   for m > 0,
///   0 at m = 0 when p = -P exactly, +inf otherwise.
double barf(std::span<const double> p, double m, std::span<const double> drift, double alpha,
            double gamma);

/// Recession function of barf (depends only on gamma):
///   |p|^gamma / (gamma (gamma - 1) m^(gamma - 1)), 0 at (0, 0), +inf at m = 0, p != 0.
double barf_recession(std::span<const double> p, double m, double gamma);

}  // namespace mfg

#include "mfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfg/error.hpp"

namespace mfg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

CouplingG::CouplingG(std::vector<PowerTerm> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw InvalidArgument("coupling needs at least one power term");
  for (const auto& t : terms_) {
    if (!(t.coefficient > 0.0)) throw InvalidArgument("coupling coefficients must be positive");
    if (!(t.exponent > 1.0)) throw InvalidArgument("coupling exponents must exceed 1");
  }
}

double CouplingG::G(double z) const {
  if (z < 0.0) throw InvalidArgument("G is defined on z >= 0");
  double s = 0.0;
  for (const auto& t : terms_) s += t.coefficient * std::pow(z, t.exponent);
  return s;
}

double CouplingG::g(double z) const {
  if (z < 0.0) throw InvalidArgument("g is defined on z >= 0");
  double s = 0.0;
  for (const auto& t : terms_) s += t.coefficient * t.exponent * std::pow(z, t.exponent - 1.0);
  return s;
}

double CouplingG::g_prime(double z) const {
  if (z < 0.0) throw InvalidArgument("g' is defined on z >= 0");
  double s = 0.0;
  for (const auto& t : terms_) {
    const double e = t.exponent - 2.0;
    // exponent in (1, 2): g' blows up at 0
    if (z == 0.0 && e < 0.0) return kInfinity;
    s += t.coefficient * t.exponent * (t.exponent - 1.0) * (e == 0.0 ? 1.0 : std::pow(z, e));
  }
  return s;
}

double CouplingG::conjugate_deriv(double q) const {
  if (!(q > g_at_zero())) return 0.0;
  if (terms_.size() == 1) {
    const PowerTerm& t = terms_.front();
    return std::pow(q / (t.coefficient * t.exponent), 1.0 / (t.exponent - 1.0));
  }
  double slope = kInfinity;
  double min_theta = kInfinity;
  for (const auto& t : terms_) {
    slope = std::min(slope, t.coefficient * t.exponent);
    min_theta = std::min(min_theta, t.exponent);
  }
  double lo = 0.0;
  double hi = std::max(1.0, std::pow(q / slope, 1.0 / (min_theta - 1.0)));
  while (g(hi) < q) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericError("conjugate_deriv: bracket expansion overflowed");
  }
  // Newton from the upper end, falling back to bisection when it leaves the
  // bracket. g is increasing, so the bracket [lo, hi] shrinks monotonically.
  double x = hi;
  for (int it = 0; it < 200; ++it) {
    const double r = g(x) - q;
    if (r == 0.0) return x;
    if (r > 0.0) hi = x; else lo = x;
    const double d = g_prime(x);
    double next = (std::isfinite(d) && d > 0.0) ? x - r / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, x) || hi - lo <= 1e-15 * hi) return next;
    x = next;
  }
  return 0.5 * (lo + hi);
}

CouplingG CouplingG::scaled(double s) const {
  if (!(s > 0.0)) throw InvalidArgument("coupling scale must be positive");
  std::vector<PowerTerm> t = terms_;
  for (auto& term : t) term.coefficient *= s;
  return CouplingG(std::move(t));
}

double eval_G(const CouplingG& coupling, double z) { return coupling.G(z); }
double eval_g(const CouplingG& coupling, double z) { return coupling.g(z); }
double conjugate_deriv(const CouplingG& coupling, double q) { return coupling.conjugate_deriv(q); }

PotentialFamily PotentialFamily::from_tag(const std::string& tag, double amplitude, double shift1,
                                          double shift2) {
  PotentialFamily p;
  if (tag == "cosine-shift") p.kind = PotentialKind::CosineShift;
  else if (tag == "sine-cosine-product") p.kind = PotentialKind::SineCosineProduct;
  else if (tag == "gaussian-bump") p.kind = PotentialKind::GaussianBump;
  else if (tag == "exp-sin-cos") p.kind = PotentialKind::ExpSinCos;
  else throw InvalidArgument("unknown potential family '" + tag + "'");
  p.amplitude = amplitude;
  p.shift1 = shift1;
  p.shift2 = shift2;
  return p;
}

PotentialFamily PotentialFamily::custom(std::vector<double> samples) {
  PotentialFamily p;
  p.kind = PotentialKind::CustomSamples;
  p.samples = std::move(samples);
  return p;
}

std::string PotentialFamily::tag() const {
  switch (kind) {
    case PotentialKind::CosineShift: return "cosine-shift";
    case PotentialKind::SineCosineProduct: return "sine-cosine-product";
    case PotentialKind::GaussianBump: return "gaussian-bump";
    case PotentialKind::ExpSinCos: return "exp-sin-cos";
    case PotentialKind::CustomSamples: return "custom-samples";
  }
  return "unknown";
}

double PotentialFamily::operator()(double x, double y) const {
  switch (kind) {
    case PotentialKind::CosineShift:
      return amplitude * std::cos(kTwoPi * (x - shift1));
    case PotentialKind::SineCosineProduct:
      return amplitude * std::sin(kTwoPi * (x + shift1)) * std::cos(kTwoPi * (y + shift2));
    case PotentialKind::GaussianBump:
      return amplitude * std::exp(-(x - shift1) * (x - shift1) - (y - shift2) * (y - shift2));
    case PotentialKind::ExpSinCos: {
      const double s = std::sin(kTwoPi * (x + shift1));
      return amplitude * std::exp(-s * s) * std::cos(kTwoPi * (y + shift2));
    }
    case PotentialKind::CustomSamples:
      break;
  }
  throw InvalidArgument("custom-samples potentials cannot be evaluated off the grid");
}

GridFunction PotentialFamily::sample(const TorusGrid& grid) const {
  if (kind == PotentialKind::CustomSamples) return GridFunction(grid, samples);
  GridFunction out(grid);
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const double x = grid.position(idx, 0);
    // 1D samples ignore the second factor (y = 0 gives cos(2 pi s2) otherwise)
    double v;
    if (grid.dim() == 1) {
      switch (kind) {
        case PotentialKind::SineCosineProduct: v = amplitude * std::sin(kTwoPi * (x + shift1)); break;
        case PotentialKind::GaussianBump: v = amplitude * std::exp(-(x - shift1) * (x - shift1)); break;
        case PotentialKind::ExpSinCos: {
          const double s = std::sin(kTwoPi * (x + shift1));
          v = amplitude * std::exp(-s * s);
          break;
        }
        default: v = (*this)(x); break;
      }
    } else {
      v = (*this)(x, grid.position(idx, 1));
    }
    if (!std::isfinite(v)) throw InvalidArgument("potential sample is not finite");
    out[idx] = v;
  }
  return out;
}

ProblemSpec::ProblemSpec(TorusGrid g, double a, double gm, std::vector<double> p, GridFunction v,
                         CouplingG c)
    : grid(g), alpha(a), gamma(gm), drift(std::move(p)), V(std::move(v)), coupling(std::move(c)) {
  if (static_cast<int>(drift.size()) != grid.dim()) throw InvalidArgument("drift dimension mismatch");
  if (!(V.grid() == grid)) throw InvalidArgument("potential sampled on a different grid");
  if (!(gamma > 1.0)) throw InvalidArgument("gamma must exceed 1");
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  for (double v : V.values())
    if (!std::isfinite(v)) throw InvalidArgument("potential has non-finite samples");
}

ProblemSpec::ProblemSpec(TorusGrid g, double a, double gm, std::vector<double> p,
                         const PotentialFamily& pot, CouplingG c)
    : ProblemSpec(g, a, gm, std::move(p), pot.sample(g), std::move(c)) {
  potential = pot;
}

double ProblemSpec::drift_norm() const { return norm(drift); }

double barf(std::span<const double> p, double m, std::span<const double> drift, double alpha,
            double gamma) {
  if (p.size() != drift.size()) throw InvalidArgument("barf: dimension mismatch");
  if (m < 0.0) return kInfinity;
  double s = 0.0;
  bool at_minus_drift = true;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double q = drift[k] + p[k];
    if (p[k] != -drift[k]) at_minus_drift = false;
    s += q * q;
  }
  if (m == 0.0) return at_minus_drift ? 0.0 : kInfinity;
  return std::pow(s, 0.5 * gamma) / (gamma * (alpha - 1.0) * std::pow(m, alpha - 1.0));
}

double barf_recession(std::span<const double> p, double m, double gamma) {
  const double r = norm(p);
  if (m < 0.0) return kInfinity;
  if (m == 0.0) return r == 0.0 ? 0.0 : kInfinity;
  return std::pow(r, gamma) / (gamma * (gamma - 1.0) * std::pow(m, gamma - 1.0));
}

}  // namespace mfg

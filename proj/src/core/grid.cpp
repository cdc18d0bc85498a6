#include "mfg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mfg/error.hpp"

namespace mfg {

namespace {

long wrap(long i, long n) {
  long r = i % n;
  return r < 0 ? r + n : r;
}

void require_same_grid(const GridFunction& a, const GridFunction& b) {
  if (!(a.grid() == b.grid())) throw InvalidArgument("grid functions live on different grids");
}

void require_axis(const TorusGrid& g, int axis) {
  if (axis < 0 || axis >= g.dim())
    throw InvalidArgument("axis " + std::to_string(axis) + " out of range for dim " +
                          std::to_string(g.dim()));
}

// Applies sum_s coeffs[s] * (f[i + s + 1] - f[i - s - 1]) / denom along one axis.
// Pairing opposite neighbours makes the result exactly zero where f is constant along the axis.
GridFunction apply_antisymmetric(const GridFunction& f, int axis, std::span<const double> coeffs, double denom) {
  const TorusGrid& g = f.grid();
  require_axis(g, axis);
  GridFunction out(g);
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    double acc = 0.0;
    for (std::size_t s = coeffs.size(); s-- > 0;) {
      const int k = static_cast<int>(s) + 1;
      acc += coeffs[s] * (f[g.shift(idx, axis, k)] - f[g.shift(idx, axis, -k)]);
    }
    out[idx] = acc / denom;
  }
  return out;
}

}  // namespace

TorusGrid::TorusGrid(int dim, int n) : dim_(dim), n_(n) {
  if (dim != 1 && dim != 2) throw InvalidArgument("grid dimension must be 1 or 2");
  if (n < 5) throw InvalidArgument("grid needs at least 5 points per axis, got " + std::to_string(n));
  h_ = 1.0 / n;
  size_ = dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
  cell_volume_ = dim == 1 ? h_ : h_ * h_;
}

std::size_t TorusGrid::index(long i, long j) const {
  if (dim_ == 1) return static_cast<std::size_t>(wrap(i, n_));
  return static_cast<std::size_t>(wrap(i, n_) * n_ + wrap(j, n_));
}

std::size_t TorusGrid::shift(std::size_t idx, int axis, int offset) const {
  if (dim_ == 1) return static_cast<std::size_t>(wrap(static_cast<long>(idx) + offset, n_));
  const long i = static_cast<long>(idx) / n_;
  const long j = static_cast<long>(idx) % n_;
  return axis == 0 ? index(i + offset, j) : index(i, j + offset);
}

int TorusGrid::coordinate(std::size_t idx, int axis) const {
  if (dim_ == 1) return static_cast<int>(idx);
  return axis == 0 ? static_cast<int>(idx / n_) : static_cast<int>(idx % n_);
}

double TorusGrid::position(std::size_t idx, int axis) const { return coordinate(idx, axis) * h_; }

GridFunction::GridFunction(TorusGrid grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

GridFunction::GridFunction(TorusGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw InvalidArgument("grid function needs " + std::to_string(grid_.size()) + " values, got " +
                          std::to_string(values_.size()));
}

double GridFunction::max() const { return *std::max_element(values_.begin(), values_.end()); }
double GridFunction::min() const { return *std::min_element(values_.begin(), values_.end()); }

double GridFunction::mean() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s / static_cast<double>(values_.size());
}

double GridFunction::max_abs() const {
  double r = 0.0;
  for (double v : values_) r = std::max(r, std::abs(v));
  return r;
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

GridFunction& GridFunction::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

GridFunction& GridFunction::operator+=(double c) {
  for (double& v : values_) v += c;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

double max_abs_diff(const GridFunction& a, const GridFunction& b) {
  require_same_grid(a, b);
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

GridVectorField::GridVectorField(const TorusGrid& g) : grid(g), components(g.dim(), GridFunction(g)) {}

GridFunction central_diff(const GridFunction& f, int axis) {
  static constexpr double kCoeffs[] = {8.0, -1.0};
  return apply_antisymmetric(f, axis, kCoeffs, 12.0 * f.grid().h());
}

GridFunction central_diff_compact(const GridFunction& f, int axis) {
  static constexpr double kCoeffs[] = {1.0};
  return apply_antisymmetric(f, axis, kCoeffs, 2.0 * f.grid().h());
}

GridVectorField gradient_central(const GridFunction& f) {
  GridVectorField v(f.grid());
  for (int k = 0; k < f.grid().dim(); ++k) v[k] = central_diff(f, k);
  return v;
}

GridFunction divergence_central(const GridVectorField& v) {
  GridFunction out(v.grid);
  for (int k = 0; k < v.grid.dim(); ++k) out += central_diff(v[k], k);
  return out;
}

GridFunction divergence_compact(const GridVectorField& v) {
  GridFunction out(v.grid);
  for (int k = 0; k < v.grid.dim(); ++k) out += central_diff_compact(v[k], k);
  return out;
}

GridFunction upwind_grad_power(const GridFunction& u, std::span<const double> drift, double gamma) {
  const TorusGrid& g = u.grid();
  if (static_cast<int>(drift.size()) != g.dim()) throw InvalidArgument("drift dimension mismatch");
  const double h = g.h();
  GridFunction out(g);
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    double acc = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
      const double forward = (u[g.shift(idx, k, 1)] - u[idx]) / h;
      const double backward = (u[idx] - u[g.shift(idx, k, -1)]) / h;
      acc += std::pow(std::max(-drift[k] - forward, 0.0), gamma);
      acc += std::pow(std::max(drift[k] + backward, 0.0), gamma);
    }
    out[idx] = acc;
  }
  return out;
}

double integrate(const GridFunction& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s * f.grid().cell_volume();
}

GridFunction remove_stencil_kernel(const GridFunction& u) {
  const TorusGrid& g = u.grid();
  GridFunction out = u;
  // Orthogonal kernel basis: products of (1 or (-1)^i) per axis.
  const int modes_per_axis = g.n() % 2 == 0 ? 2 : 1;
  const int total = g.dim() == 1 ? modes_per_axis : modes_per_axis * modes_per_axis;
  for (int mode = 0; mode < total; ++mode) {
    const int ax0 = mode % modes_per_axis;
    const int ax1 = mode / modes_per_axis;
    auto basis = [&](std::size_t idx) {
      double s = 1.0;
      if (ax0 == 1 && g.coordinate(idx, 0) % 2 == 1) s = -s;
      if (g.dim() == 2 && ax1 == 1 && g.coordinate(idx, 1) % 2 == 1) s = -s;
      return s;
    };
    double dot = 0.0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) dot += basis(idx) * out[idx];
    const double coeff = dot / static_cast<double>(g.size());
    for (std::size_t idx = 0; idx < g.size(); ++idx) out[idx] -= coeff * basis(idx);
  }
  return out;
}

std::string to_csv(const GridFunction& f) {
  const TorusGrid& g = f.grid();
  std::string out;
  out.reserve(g.size() * 48);
  char buf[128];
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    int len;
    if (g.dim() == 1)
      len = std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", g.position(idx, 0), f[idx]);
    else
      len = std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", g.position(idx, 0),
                          g.position(idx, 1), f[idx]);
    out.append(buf, static_cast<std::size_t>(len));
  }
  return out;
}

nlohmann::json to_json(const GridFunction& f) {
  return {{"dim", f.grid().dim()}, {"n", f.grid().n()}, {"values", f.data()}};
}

GridFunction grid_function_from_json(const nlohmann::json& j) {
  try {
    TorusGrid g(j.at("dim").get<int>(), j.at("n").get<int>());
    return GridFunction(g, j.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed grid function record: ") + e.what());
  }
}

}  // namespace mfg

#pragma once

// Periodic grids on the unit torus T^d (d = 1 or 2), grid functions and the
// finite-difference operators used by every solver in the library.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mfg {

/// Uniform grid with n points per axis on the unit torus, spacing h = 1/n.
/// Node (i, j) sits at (i h, j h); storage is row-major with the first axis
/// outermost.
class TorusGrid {
 public:
  TorusGrid(int dim, int n);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double h() const { return h_; }
  /// n^dim
  std::size_t size() const { return size_; }
  /// Quadrature weight h^dim.
  double cell_volume() const { return cell_volume_; }

  /// Flat index of node (i, j); both indices wrap modulo n.
  std::size_t index(long i, long j = 0) const;
  /// Index of the node `offset` steps away from `idx` along `axis`, wrapped.
  std::size_t shift(std::size_t idx, int axis, int offset) const;
  /// Per-axis integer coordinate of a flat index.
  int coordinate(std::size_t idx, int axis) const;
  /// Physical coordinate in [0, 1).
  double position(std::size_t idx, int axis) const;

  bool operator==(const TorusGrid& other) const = default;

 private:
  int dim_;
  int n_;
  double h_;
  std::size_t size_;
  double cell_volume_;
};

class GridFunction {
 public:
  explicit GridFunction(TorusGrid grid, double fill = 0.0);
  GridFunction(TorusGrid grid, std::vector<double> values);

  const TorusGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t idx) { return values_[idx]; }
  double operator[](std::size_t idx) const { return values_[idx]; }
  /// Periodic access by node coordinates.
  double at(long i, long j = 0) const { return values_[grid_.index(i, j)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }

  double max() const;
  double min() const;
  double mean() const;
  double max_abs() const;

  GridFunction& operator+=(const GridFunction& other);
  GridFunction& operator-=(const GridFunction& other);
  GridFunction& operator*=(double s);
  GridFunction& operator+=(double c);

 private:
  TorusGrid grid_;
  std::vector<double> values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

/// Max-norm distance between two grid functions on the same grid.
double max_abs_diff(const GridFunction& a, const GridFunction& b);

struct GridVectorField {
  TorusGrid grid;
  std::vector<GridFunction> components;

  explicit GridVectorField(const TorusGrid& g);
  const GridFunction& operator[](int axis) const { return components[axis]; }
  GridFunction& operator[](int axis) { return components[axis]; }
};

/// Fourth-order five-point central difference along `axis`:
/// (-f[i+2] + 8 f[i+1] - 8 f[i-1] + f[i-2]) / (12 h).
GridFunction central_diff(const GridFunction& f, int axis);

/// Second-order three-point central difference (f[i+1] - f[i-1]) / (2 h).
/// Used for residuals that must not share the solver's own stencil.
GridFunction central_diff_compact(const GridFunction& f, int axis);

GridVectorField gradient_central(const GridFunction& f);
GridFunction divergence_central(const GridVectorField& v);
GridFunction divergence_compact(const GridVectorField& v);

/// Monotone upwind discretization of |P + Du|^gamma used by the discounted
/// Hamilton-Jacobi solve: per node and axis,
///   max(-p_k - D_k^+ u, 0)^gamma + max(p_k + D_k^- u, 0)^gamma
/// with one-sided differences of spacing h.
GridFunction upwind_grad_power(const GridFunction& u, std::span<const double> drift,
                               double gamma);

/// h^dim * sum of values, summed in storage order.
double integrate(const GridFunction& f);

/// Removes the components of `u` invisible to the five-point stencil: the
/// constant and, for even n, the alternating modes (-1)^i, (-1)^j, (-1)^(i+j).
GridFunction remove_stencil_kernel(const GridFunction& u);

/// "x[,y],value" per node in storage order, 17 significant digits.
std::string to_csv(const GridFunction& f);
nlohmann::json to_json(const GridFunction& f);
GridFunction grid_function_from_json(const nlohmann::json& j);

}  // namespace mfg

#pragma once

// Sparse-matrix forms of the grid stencils, used by the Newton-type solvers.

#include <vector>

#include <Eigen/CholmodSupport>
#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mfg/grid.hpp"

namespace mfg::detail {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Matrix of central_diff along `axis`.
SpMat central_diff_matrix(const TorusGrid& grid, int axis);

inline Vec to_vec(const GridFunction& f) {
  return Eigen::Map<const Vec>(f.data().data(), static_cast<Eigen::Index>(f.size()));
}

inline GridFunction to_grid(const TorusGrid& grid, const Vec& v) {
  return GridFunction(grid, std::vector<double>(v.data(), v.data() + v.size()));
}

/// Assembles S = sum_kl D_k^T diag(w_kl) D_l + diag(extra) with the
/// five-point D, always on the same sparsity pattern, and solves with it
/// through a supernodal Cholesky whose symbolic analysis is done once.
class StencilNormalSolver {
 public:
  explicit StencilNormalSolver(const TorusGrid& grid) : grid_(grid) {}

  /// w holds dim * dim node weights, w[k * dim + l]. Returns false when S
  /// is not numerically positive definite.
  bool factorize(const std::vector<Vec>& w, const Vec& extra);
  /// Diagonal of sum_kl D_k^T diag(w_kl) D_l.
  Vec stencil_diagonal(const std::vector<Vec>& w) const;
  Vec solve(const Vec& rhs) const { return solver_.solve(rhs); }

 private:
  TorusGrid grid_;
  SpMat S_;
  std::vector<Eigen::Triplet<double>> trips_;
  Eigen::CholmodSupernodalLLT<SpMat> solver_;
  bool analyzed_ = false;
};

}  // namespace mfg::detail

#include "stencil_matrix.hpp"

namespace mfg::detail {

namespace {

constexpr int kOffsets[] = {2, 1, -1, -2};
constexpr double kCoeffs[] = {-1.0, 8.0, -8.0, 1.0};

}  // namespace

SpMat central_diff_matrix(const TorusGrid& grid, int axis) {
  const double denom = 12.0 * grid.h();
  const auto n = static_cast<Eigen::Index>(grid.size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(grid.size() * 4);
  for (std::size_t idx = 0; idx < grid.size(); ++idx)
    for (int s = 0; s < 4; ++s)
      trips.emplace_back(static_cast<Eigen::Index>(idx),
                         static_cast<Eigen::Index>(grid.shift(idx, axis, kOffsets[s])),
                         kCoeffs[s] / denom);
  SpMat d(n, n);
  d.setFromTriplets(trips.begin(), trips.end());
  return d;
}

bool StencilNormalSolver::factorize(const std::vector<Vec>& w, const Vec& extra) {
  const int d = grid_.dim();
  const double denom = 12.0 * grid_.h();
  const auto n = static_cast<Eigen::Index>(grid_.size());
  trips_.clear();
  for (std::size_t p = 0; p < grid_.size(); ++p) {
    const auto pi = static_cast<Eigen::Index>(p);
    trips_.emplace_back(pi, pi, extra[pi]);
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) {
        const double wp = w[k * d + l][pi] / (denom * denom);
        for (int sa = 0; sa < 4; ++sa) {
          const auto i = static_cast<Eigen::Index>(grid_.shift(p, k, kOffsets[sa]));
          for (int sb = 0; sb < 4; ++sb) {
            const auto j = static_cast<Eigen::Index>(grid_.shift(p, l, kOffsets[sb]));
            trips_.emplace_back(i, j, kCoeffs[sa] * wp * kCoeffs[sb]);
          }
        }
      }
  }
  S_.resize(n, n);
  S_.setFromTriplets(trips_.begin(), trips_.end());
  if (!analyzed_) {
    solver_.analyzePattern(S_);
    analyzed_ = true;
  }
  solver_.factorize(S_);
  return solver_.info() == Eigen::Success;
}

Vec StencilNormalSolver::stencil_diagonal(const std::vector<Vec>& w) const {
  const int d = grid_.dim();
  const double denom = 12.0 * grid_.h();
  Vec diag = Vec::Zero(static_cast<Eigen::Index>(grid_.size()));
  // Only k = l reaches the diagonal: the stencil has no zero offset.
  for (std::size_t p = 0; p < grid_.size(); ++p)
    for (int k = 0; k < d; ++k) {
      const double wp = w[k * d + k][static_cast<Eigen::Index>(p)] / (denom * denom);
      for (int s = 0; s < 4; ++s)
        diag[static_cast<Eigen::Index>(grid_.shift(p, k, kOffsets[s]))] += kCoeffs[s] * kCoeffs[s] * wp;
    }
  return diag;
}

}  // namespace mfg::detail

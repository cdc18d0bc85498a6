#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace mfgcli {

struct ConvergenceRow {
  int n;
  double max_abs_error;
  double mean_abs_error;
  double runtime_seconds;
  bool converged;
};

struct ConvergenceReport {
  std::string reference;
  std::vector<ConvergenceRow> rows;
  /// Least-squares slope of log(max error) against log(h); NaN with one row.
  double order;
};

/// Least-squares slope of log(err) against log(1 / n).
double fitted_order(const std::vector<ConvergenceRow>& rows);

/// Solves at every N of cfg.n_list and compares with the explicit solution.
/// Writes per-N output under cfg.out/n<N>/ when `emit` is set.
ConvergenceReport convergence_study(const ExperimentConfig& cfg, bool emit = true);

enum ExitCode { kExitConverged = 0, kExitConfig = 1, kExitNotConverged = 2 };

/// Validates, dispatches and writes the result bundle under cfg.out.
/// Messages go to `log`.
int run(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace mfgcli

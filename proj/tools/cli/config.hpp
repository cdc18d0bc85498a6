#pragma once

// Experiment configuration: INI parsing, validation and the preset registry.

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfgcli {

/// Invalid or unparseable configuration; the message names the field and,
/// when it came from a file, the line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { Solve, Oracle, Critical, Transform, SecondOrder, Convergence, Reproduce };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct Term {
  double c;
  double theta;
};

struct ProblemConfig {
  std::optional<int> dim;
  std::optional<int> n;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::vector<double> drift;  // empty means zero
  std::optional<std::pair<double, double>> Q;
  std::string potential = "cosine-shift";
  double amplitude = 1.0;
  double shift1 = 0.0;
  double shift2 = 0.0;
  std::vector<Term> coupling;
};

struct SolverConfig {
  std::string method = "barrier-newton";
  std::optional<int> max_iters;
  std::optional<double> tol_gradmap;
  std::optional<double> tol_obj;
  std::optional<double> step0;
  std::optional<double> armijo_c;
  std::optional<double> backtrack;
  std::optional<double> mass_cutoff;
  std::optional<double> mu_initial;
  std::optional<double> mu_final;
  std::optional<double> mu_factor;
  std::optional<double> newton_tol;
  std::optional<int> max_newton_per_stage;
  bool trace = false;
  std::string init = "uniform";
  std::uint64_t seed = 0;
};

struct TransformConfig {
  std::vector<double> betas;  // empty keeps the library default
  std::optional<std::pair<double, double>> target_P;
  std::optional<double> hjb_tol;
  std::optional<int> hjb_max_iters;
};

struct SecondOrderConfig {
  std::optional<double> inner_tol;
  std::optional<int> inner_max_iters;
  std::optional<double> mass_tol;
  std::optional<int> outer_max_iters;
  std::optional<std::pair<double, double>> bracket;
};

struct SweepConfig {
  std::string param;  // "drift" or "alpha"; empty means no sweep
  std::vector<double> values;
};

struct ExperimentConfig {
  Mode mode = Mode::Solve;
  std::string preset;
  std::string source = "<config>";  // file name for messages
  ProblemConfig problem;
  SolverConfig solver;
  std::string reference = "same-grid";
  int fine_n = 0;
  std::vector<int> n_list;
  SweepConfig sweep;
  TransformConfig transform;
  SecondOrderConfig second_order;
  std::string out = "out";
  std::set<std::string> emit{"csv", "json", "plt"};
};

/// Parses INI text. Keys outside any section are mode, preset and out.
/// When `preset` is set, the preset is the starting point and the file
/// overrides it.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Hard-coded experiment; throws ConfigError for an unknown name.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Resolves mode=reproduce to the preset's own mode.
ExperimentConfig resolve(ExperimentConfig cfg);

/// Mode-specific checks; throws ConfigError naming the field.
void validate(const ExperimentConfig& cfg);

}  // namespace mfgcli

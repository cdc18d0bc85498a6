#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"
#include "runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stationary congestion MFG solver"};
  std::string config_path, preset_name, out;
  int n = 0;
  long long seed = -1;
  std::vector<std::string> emit;
  bool list = false;
  app.add_option("--config", config_path, "INI experiment file");
  app.add_option("--preset", preset_name, "run a named preset (mode reproduce)");
  app.add_option("--n", n, "nodes per axis; replaces the N list of convergence runs")->check(CLI::Range(5, 1 << 20));
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "random initial point with this seed")->check(CLI::NonNegativeNumber);
  app.add_option("--emit", emit, "outputs to write")->check(CLI::IsMember({"csv", "json", "plt"}))->delimiter(',');
  app.add_flag("--list-presets", list, "print preset names and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mfgcli::kExitConfig;
  }
  if (list) {
    for (const auto& name : mfgcli::preset_names()) std::cout << name << "\n";
    return 0;
  }
  mfgcli::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) {
      cfg = mfgcli::load_config(config_path);
      if (!preset_name.empty()) throw mfgcli::ConfigError("give either --config or --preset, not both");
    } else if (!preset_name.empty()) {
      cfg = mfgcli::preset(preset_name);
      cfg.mode = mfgcli::Mode::Reproduce;
      cfg.source = "--preset";
    } else {
      throw mfgcli::ConfigError("need --config or --preset");
    }
  } catch (const mfgcli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mfgcli::kExitConfig;
  }
  if (n > 0) {
    cfg.problem.n = n;
    if (!cfg.n_list.empty()) cfg.n_list = {n};
  }
  if (!out.empty()) cfg.out = out;
  if (seed >= 0) {
    cfg.solver.init = "random";
    cfg.solver.seed = static_cast<std::uint64_t>(seed);
  }
  if (!emit.empty()) cfg.emit = {emit.begin(), emit.end()};
  return mfgcli::run(cfg, std::cout);
}

#include "runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mfg/mfg.h"

namespace mfgcli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class LibraryError : public std::runtime_error {
 public:
  LibraryError(mfg_status s, const std::string& what) : std::runtime_error(what), status(s) {}
  mfg_status status;
};

void check(mfg_status s) {
  if (s != MFG_OK) throw LibraryError(s, mfg_last_error());
}

struct ProblemDeleter {
  void operator()(mfg_problem* p) const { mfg_problem_destroy(p); }
};
struct ResultDeleter {
  void operator()(mfg_result* r) const { mfg_result_destroy(r); }
};
using Problem = std::unique_ptr<mfg_problem, ProblemDeleter>;
using Result = std::unique_ptr<mfg_result, ResultDeleter>;

struct Overrides {
  std::optional<int> n;
  std::optional<double> alpha;
  std::optional<std::vector<double>> drift;
};

Problem make_problem(const ExperimentConfig& cfg, const Overrides& o = {}) {
  const ProblemConfig& p = cfg.problem;
  const int dim = *p.dim;
  std::vector<double> drift = o.drift ? *o.drift : p.drift;
  drift.resize(static_cast<std::size_t>(dim), 0.0);
  std::vector<double> c, theta;
  for (const auto& t : p.coupling) {
    c.push_back(t.c);
    theta.push_back(t.theta);
  }
  mfg_problem* raw = nullptr;
  check(mfg_problem_create(dim, o.n.value_or(*p.n), o.alpha.value_or(*p.alpha), *p.gamma, drift.data(),
                           p.potential.c_str(), p.amplitude, p.shift1, p.shift2, c.data(), theta.data(), c.size(),
                           &raw));
  return Problem(raw);
}

mfg_solve_options solve_options(const ExperimentConfig& cfg) {
  mfg_solve_options o;
  mfg_solve_options_init(&o);
  const SolverConfig& s = cfg.solver;
  o.method = s.method == "projected-gradient" ? MFG_METHOD_PROJECTED_GRADIENT : MFG_METHOD_BARRIER_NEWTON;
  if (s.max_iters) o.max_iters = *s.max_iters;
  if (s.tol_gradmap) o.tol_gradmap = *s.tol_gradmap;
  if (s.tol_obj) o.tol_obj = *s.tol_obj;
  if (s.step0) o.step0 = *s.step0;
  if (s.armijo_c) o.armijo_c = *s.armijo_c;
  if (s.backtrack) o.backtrack = *s.backtrack;
  if (s.mass_cutoff) o.mass_cutoff = *s.mass_cutoff;
  if (s.mu_initial) o.mu_initial = *s.mu_initial;
  if (s.mu_final) o.mu_final = *s.mu_final;
  if (s.mu_factor) o.mu_factor = *s.mu_factor;
  if (s.newton_tol) o.newton_tol = *s.newton_tol;
  if (s.max_newton_per_stage) o.max_newton_per_stage = *s.max_newton_per_stage;
  o.record_trace = s.trace ? 1 : 0;
  o.seed = s.seed;
  return o;
}

int init_kind(const ExperimentConfig& cfg) { return cfg.solver.init == "random" ? MFG_INIT_RANDOM : MFG_INIT_UNIFORM; }

std::vector<double> field(const mfg_result* r, const std::string& name) {
  std::vector<double> v(mfg_result_size(r));
  check(mfg_result_field(r, name.c_str(), v.data(), v.size()));
  return v;
}

std::vector<std::string> field_names(const mfg_result* r) {
  std::vector<std::string> out;
  std::stringstream ss(mfg_result_field_names(r));
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

json summary_of(const mfg_result* r) { return json::parse(mfg_result_summary_json(r)); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

/// Node positions are i / n; same layout as the library's CSV writer.
std::string grid_table(const std::vector<double>& v, int dim, int n, const char* sep, bool blank_rows) {
  std::string out;
  char buf[128];
  const double h = 1.0 / n;
  for (std::size_t idx = 0; idx < v.size(); ++idx) {
    int len;
    if (dim == 1) {
      len = std::snprintf(buf, sizeof buf, "%.17g%s%.17g\n", static_cast<double>(idx) * h, sep, v[idx]);
    } else {
      const std::size_t i = idx / static_cast<std::size_t>(n), j = idx % static_cast<std::size_t>(n);
      if (blank_rows && j == 0 && i > 0) out += '\n';
      len = std::snprintf(buf, sizeof buf, "%.17g%s%.17g%s%.17g\n", static_cast<double>(i) * h, sep,
                          static_cast<double>(j) * h, sep, v[idx]);
    }
    out.append(buf, static_cast<std::size_t>(len));
  }
  return out;
}

std::string plot_script(const std::string& name, int dim) {
  std::ostringstream s;
  s << "set terminal pngcairo size 800,600\n"
    << "set output '" << name << ".png'\n"
    << "set xlabel 'x'\n";
  if (dim == 1) {
    s << "set ylabel '" << name << "'\n"
      << "plot '" << name << ".dat' using 1:2 with lines title '" << name << "'\n";
  } else {
    s << "set ylabel 'y'\n"
      << "set view map\n"
      << "set pm3d at b\n"
      << "splot '" << name << ".dat' using 1:2:3 with pm3d title '" << name << "'\n";
  }
  return s.str();
}

void emit_field(const fs::path& dir, const std::string& name, const std::vector<double>& v, int dim, int n,
                const ExperimentConfig& cfg) {
  if (cfg.emit.count("csv")) write_text(dir / (name + ".csv"), grid_table(v, dim, n, ",", false));
  if (cfg.emit.count("plt")) {
    write_text(dir / (name + ".dat"), grid_table(v, dim, n, " ", true));
    write_text(dir / (name + ".plt"), plot_script(name, dim));
  }
}

void emit_result(const fs::path& dir, const mfg_result* r, const ExperimentConfig& cfg, int n,
                 const std::string& suffix = "") {
  fs::create_directories(dir);
  const int dim = *cfg.problem.dim;
  for (const auto& name : field_names(r)) {
    if (cfg.emit.count("csv")) check(mfg_result_write_csv(r, name.c_str(), (dir / (name + suffix + ".csv")).c_str()));
    if (cfg.emit.count("plt")) {
      const auto v = field(r, name);
      write_text(dir / (name + suffix + ".dat"), grid_table(v, dim, n, " ", true));
      write_text(dir / (name + suffix + ".plt"), plot_script(name + suffix, dim));
    }
  }
}

void emit_summary(const fs::path& dir, const json& j, const ExperimentConfig& cfg) {
  fs::create_directories(dir);
  if (cfg.emit.count("json")) write_text(dir / "summary.json", j.dump(2) + "\n");
}

json header(const ExperimentConfig& cfg) {
  json j{{"mode", to_string(cfg.mode)}};
  if (!cfg.preset.empty()) j["preset"] = cfg.preset;
  return j;
}

void log_result(std::ostream& log, const std::string& label, const json& s) {
  log << label << (s.value("converged", false) ? "converged" : "NOT converged") << std::setprecision(10)
      << "  Hbar=" << s.value("Hbar", std::numeric_limits<double>::quiet_NaN());
  if (s.contains("mass_error")) log << "  mass_error=" << s["mass_error"].get<double>();
  log << "\n";
}

bool run_solve(const ExperimentConfig& cfg, std::ostream& log) {
  const fs::path out(cfg.out);
  const mfg_solve_options opts = solve_options(cfg);
  auto solve_one = [&](const Overrides& o, const fs::path& dir, const std::string& label) {
    Problem p = make_problem(cfg, o);
    mfg_result* raw = nullptr;
    const auto t0 = std::chrono::steady_clock::now();
    check(mfg_minimize(p.get(), &opts, init_kind(cfg), cfg.solver.seed, &raw));
    Result r(raw);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json s = summary_of(r.get());
    s["runtime_seconds"] = dt;
    emit_result(dir, r.get(), cfg, o.n.value_or(*cfg.problem.n));
    log_result(log, label, s);
    return s;
  };
  if (cfg.sweep.param.empty()) {
    json s = solve_one({}, out, "");
    json j = header(cfg);
    j.update(s);
    emit_summary(out, j, cfg);
    return s.value("converged", false);
  }
  json runs = json::array();
  bool all = true;
  for (double v : cfg.sweep.values) {
    std::ostringstream tag;
    tag << cfg.sweep.param << "_" << v;
    Overrides o;
    if (cfg.sweep.param == "alpha") o.alpha = v;
    else o.drift = std::vector<double>{v};
    json s = solve_one(o, out / tag.str(), tag.str() + ": ");
    s["sweep_value"] = v;
    s["dir"] = tag.str();
    all = all && s.value("converged", false);
    runs.push_back(std::move(s));
  }
  json j = header(cfg);
  j["sweep"] = {{"param", cfg.sweep.param}, {"values", cfg.sweep.values}};
  j["runs"] = runs;
  j["converged"] = all;
  emit_summary(out, j, cfg);
  return all;
}

bool run_single(const ExperimentConfig& cfg, std::ostream& log) {
  Problem p = make_problem(cfg);
  mfg_result* raw = nullptr;
  const auto t0 = std::chrono::steady_clock::now();
  switch (cfg.mode) {
    case Mode::Oracle:
      check(mfg_oracle_p0(p.get(), cfg.reference == "continuum" ? MFG_REFERENCE_CONTINUUM : MFG_REFERENCE_SAME_GRID,
                          cfg.fine_n, &raw));
      break;
    case Mode::Critical:
      check(mfg_critical(p.get(), &raw));
      break;
    case Mode::Transform: {
      mfg_transform_options o;
      mfg_transform_options_init(&o);
      o.solve = solve_options(cfg);
      if (cfg.transform.hjb_tol) o.hjb_tol = *cfg.transform.hjb_tol;
      if (cfg.transform.hjb_max_iters) o.hjb_max_iters = *cfg.transform.hjb_max_iters;
      if (!cfg.transform.betas.empty()) {
        o.betas = cfg.transform.betas.data();
        o.n_betas = cfg.transform.betas.size();
      }
      if (cfg.transform.target_P) {
        o.has_target_P = 1;
        o.target_P[0] = cfg.transform.target_P->first;
        o.target_P[1] = cfg.transform.target_P->second;
      }
      const double Q[2] = {cfg.problem.Q->first, cfg.problem.Q->second};
      check(mfg_transform(p.get(), Q, &o, &raw));
      break;
    }
    case Mode::SecondOrder: {
      mfg_second_order_options o;
      mfg_second_order_options_init(&o);
      const SecondOrderConfig& s = cfg.second_order;
      if (s.inner_tol) o.inner_tol = *s.inner_tol;
      if (s.inner_max_iters) o.inner_max_iters = *s.inner_max_iters;
      if (s.mass_tol) o.mass_tol = *s.mass_tol;
      if (s.outer_max_iters) o.outer_max_iters = *s.outer_max_iters;
      if (s.bracket) {
        o.has_bracket = 1;
        o.bracket_lo = s.bracket->first;
        o.bracket_hi = s.bracket->second;
      }
      check(mfg_second_order(p.get(), &o, &raw));
      break;
    }
    default:
      throw std::logic_error("unexpected mode");
  }
  Result r(raw);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json s = summary_of(r.get());
  s["runtime_seconds"] = dt;
  if (cfg.mode == Mode::Critical) s["mode_note"] = "u is constant for alpha = 1";
  emit_result(cfg.out, r.get(), cfg, *cfg.problem.n);
  json j = header(cfg);
  j.update(s);
  emit_summary(cfg.out, j, cfg);
  log_result(log, "", s);
  return s.value("converged", false);
}

bool run_convergence(const ExperimentConfig& cfg, std::ostream& log) {
  const ConvergenceReport rep = convergence_study(cfg, true);
  json rows = json::array();
  std::string csv = "n,max_abs_error,mean_abs_error\n";
  std::string dat = "# h max_abs_error mean_abs_error runtime_seconds\n";
  char buf[160];
  bool all = true;
  log << "reference: " << rep.reference << "\n";
  log << std::setw(8) << "N" << std::setw(18) << "max_abs_error" << std::setw(18) << "mean_abs_error"
      << std::setw(12) << "time[s]" << "\n";
  for (const auto& r : rep.rows) {
    rows.push_back({{"n", r.n},
                    {"max_abs_error", r.max_abs_error},
                    {"mean_abs_error", r.mean_abs_error},
                    {"runtime_seconds", r.runtime_seconds},
                    {"converged", r.converged}});
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", r.n, r.max_abs_error, r.mean_abs_error);
    csv += buf;
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.6g\n", 1.0 / r.n, r.max_abs_error, r.mean_abs_error,
                  r.runtime_seconds);
    dat += buf;
    all = all && r.converged;
    log << std::setw(8) << r.n << std::setw(18) << std::setprecision(8) << r.max_abs_error << std::setw(18)
        << r.mean_abs_error << std::setw(12) << std::setprecision(4) << r.runtime_seconds
        << (r.converged ? "" : "  (not converged)") << "\n";
  }
  if (std::isfinite(rep.order)) log << "fitted order: " << std::setprecision(4) << rep.order << "\n";
  const fs::path out(cfg.out);
  fs::create_directories(out);
  if (cfg.emit.count("csv")) write_text(out / "convergence.csv", csv);
  if (cfg.emit.count("plt")) {
    write_text(out / "convergence.dat", dat);
    write_text(out / "convergence.plt",
               "set terminal pngcairo size 800,600\n"
               "set output 'convergence.png'\n"
               "set logscale xy\n"
               "set xlabel 'h'\n"
               "set ylabel 'max |m - m_ref|'\n"
               "plot 'convergence.dat' using 1:2 with linespoints title 'max error', \\\n"
               "     'convergence.dat' using 1:3 with linespoints title 'mean error'\n");
  }
  json j = header(cfg);
  j["reference"] = rep.reference;
  j["rows"] = rows;
  j["order"] = std::isfinite(rep.order) ? json(rep.order) : json(nullptr);
  j["converged"] = all;
  emit_summary(out, j, cfg);
  return all;
}

}  // namespace

double fitted_order(const std::vector<ConvergenceRow>& rows) {
  if (rows.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = std::log(1.0 / r.n), y = std::log(r.max_abs_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

ConvergenceReport convergence_study(const ExperimentConfig& cfg, bool emit) {
  ConvergenceReport rep;
  rep.reference = cfg.reference;
  const mfg_solve_options opts = solve_options(cfg);
  const int ref = cfg.reference == "continuum" ? MFG_REFERENCE_CONTINUUM : MFG_REFERENCE_SAME_GRID;
  const int dim = *cfg.problem.dim;
  for (int n : cfg.n_list) {
    Overrides o;
    o.n = n;
    Problem p = make_problem(cfg, o);
    mfg_result* raw = nullptr;
    const auto t0 = std::chrono::steady_clock::now();
    check(mfg_minimize(p.get(), &opts, init_kind(cfg), cfg.solver.seed, &raw));
    Result sol(raw);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check(mfg_oracle_p0(p.get(), ref, cfg.fine_n, &raw));
    Result exact(raw);
    const auto m = field(sol.get(), "m");
    const auto me = field(exact.get(), "m");
    std::vector<double> err(m.size());
    double mx = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      err[i] = std::abs(m[i] - me[i]);
      mx = std::max(mx, err[i]);
      mean += err[i];
    }
    mean /= static_cast<double>(m.size());
    const bool conv = mfg_result_converged(sol.get()) != 0;
    rep.rows.push_back({n, mx, mean, dt, conv});
    if (emit) {
      const fs::path dir = fs::path(cfg.out) / ("n" + std::to_string(n));
      emit_result(dir, sol.get(), cfg, n);
      if (cfg.emit.count("csv") || cfg.emit.count("plt")) {
        const auto me_v = field(exact.get(), "m");
        emit_field(dir, "m_reference", me_v, dim, n, cfg);
        emit_field(dir, "error", err, dim, n, cfg);
      }
      json s = summary_of(sol.get());
      s["runtime_seconds"] = dt;
      s["reference"] = summary_of(exact.get());
      s["max_abs_error"] = mx;
      s["mean_abs_error"] = mean;
      emit_summary(dir, s, cfg);
    }
  }
  rep.order = fitted_order(rep.rows);
  return rep;
}

int run(const ExperimentConfig& input, std::ostream& log) {
  ExperimentConfig cfg;
  try {
    cfg = resolve(input);
    validate(cfg);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    bool ok = false;
    switch (cfg.mode) {
      case Mode::Solve: ok = run_solve(cfg, log); break;
      case Mode::Convergence: ok = run_convergence(cfg, log); break;
      default: ok = run_single(cfg, log); break;
    }
    return ok ? kExitConverged : kExitNotConverged;
  } catch (const LibraryError& e) {
    log << "error: " << e.what() << "\n";
    return e.status == MFG_ERR_INVALID_ARGUMENT ? kExitConfig : kExitNotConverged;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace mfgcli

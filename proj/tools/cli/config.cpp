#include "config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace mfgcli {

namespace pt = boost::property_tree;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Solve: return "solve";
    case Mode::Oracle: return "oracle";
    case Mode::Critical: return "critical";
    case Mode::Transform: return "transform";
    case Mode::SecondOrder: return "second-order";
    case Mode::Convergence: return "convergence";
    case Mode::Reproduce: return "reproduce";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::Solve, Mode::Oracle, Mode::Critical, Mode::Transform, Mode::SecondOrder, Mode::Convergence,
                 Mode::Reproduce})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown mode '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Line of every "section.key" in the file, for messages.
std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string line, section;
  for (int no = 1; std::getline(in, line); ++no) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t[0] == '[') {
      section = trim(t.substr(1, t.find(']') - 1));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(t.substr(0, eq));
    lines[section.empty() ? key : section + "." + key] = no;
  }
  return lines;
}

class Reader {
 public:
  Reader(const pt::ptree& tree, std::map<std::string, int> lines, std::string source)
      : tree_(tree), lines_(std::move(lines)), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = lines_.find(key);
    const std::string where = it == lines_.end() ? source_ : source_ + ":" + std::to_string(it->second);
    throw ConfigError(where + ": " + what + " for '" + key + "'");
  }

  std::optional<std::string> raw(const std::string& key) {
    seen_.insert(key);
    const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  double to_double(const std::string& key, const std::string& s) const {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
      fail(key, "invalid number '" + s + "'");
    return v;
  }

  long to_long(const std::string& key, const std::string& s) const {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) fail(key, "invalid integer '" + s + "'");
    return v;
  }

  std::vector<std::string> split(const std::string& s, char sep) const {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
  }

  void get(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }
  void get(const std::string& key, double& out) {
    if (auto v = raw(key)) out = to_double(key, *v);
  }
  void get(const std::string& key, std::optional<double>& out) {
    if (auto v = raw(key)) out = to_double(key, *v);
  }
  void get(const std::string& key, int& out) {
    if (auto v = raw(key)) out = static_cast<int>(to_long(key, *v));
  }
  void get(const std::string& key, std::optional<int>& out) {
    if (auto v = raw(key)) out = static_cast<int>(to_long(key, *v));
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (auto v = raw(key)) {
      const long x = to_long(key, *v);
      if (x < 0) fail(key, "negative seed");
      out = static_cast<std::uint64_t>(x);
    }
  }
  void get(const std::string& key, bool& out) {
    if (auto v = raw(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") out = true;
      else if (*v == "false" || *v == "0" || *v == "no") out = false;
      else fail(key, "invalid boolean '" + *v + "'");
    }
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (auto v = raw(key)) {
      out.clear();
      if (v->empty()) return;
      for (const auto& s : split(*v, ',')) out.push_back(to_double(key, s));
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (auto v = raw(key)) {
      out.clear();
      if (v->empty()) return;
      for (const auto& s : split(*v, ',')) out.push_back(static_cast<int>(to_long(key, s)));
    }
  }
  void get(const std::string& key, std::optional<std::pair<double, double>>& out) {
    if (auto v = raw(key)) {
      const auto parts = split(*v, ',');
      if (parts.size() != 2) fail(key, "expected two comma-separated numbers");
      out = std::make_pair(to_double(key, parts[0]), to_double(key, parts[1]));
    }
  }
  void get(const std::string& key, std::vector<Term>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& s : split(*v, ',')) {
        const auto p = split(s, ':');
        if (p.size() != 2) fail(key, "expected c:theta pairs");
        out.push_back({to_double(key, p[0]), to_double(key, p[1])});
      }
    }
  }
  void get(const std::string& key, std::set<std::string>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& s : split(*v, ',')) {
        if (s != "csv" && s != "json" && s != "plt") fail(key, "unknown output kind '" + s + "'");
        out.insert(s);
      }
    }
  }

  /// Every key in the file must have been read.
  void reject_unknown() const {
    for (const auto& [key, line] : lines_)
      if (!seen_.count(key)) fail(key, "unknown key");
  }

 private:
  const pt::ptree& tree_;
  std::map<std::string, int> lines_;
  std::string source_;
  std::set<std::string> seen_;
};

void apply(Reader& r, ExperimentConfig& c) {
  if (auto m = r.raw("mode")) {
    try {
      c.mode = mode_from_string(*m);
    } catch (const ConfigError&) {
      r.fail("mode", "unknown mode '" + *m + "'");
    }
  }
  r.get("out", c.out);

  ProblemConfig& p = c.problem;
  r.get("problem.dim", p.dim);
  r.get("problem.n", p.n);
  r.get("problem.alpha", p.alpha);
  r.get("problem.gamma", p.gamma);
  r.get("problem.drift", p.drift);
  r.get("problem.Q", p.Q);
  r.get("problem.potential", p.potential);
  r.get("problem.amplitude", p.amplitude);
  r.get("problem.shift1", p.shift1);
  r.get("problem.shift2", p.shift2);
  r.get("problem.coupling", p.coupling);

  SolverConfig& s = c.solver;
  r.get("solver.method", s.method);
  r.get("solver.max_iters", s.max_iters);
  r.get("solver.tol_gradmap", s.tol_gradmap);
  r.get("solver.tol_obj", s.tol_obj);
  r.get("solver.step0", s.step0);
  r.get("solver.armijo_c", s.armijo_c);
  r.get("solver.backtrack", s.backtrack);
  r.get("solver.mass_cutoff", s.mass_cutoff);
  r.get("solver.mu_initial", s.mu_initial);
  r.get("solver.mu_final", s.mu_final);
  r.get("solver.mu_factor", s.mu_factor);
  r.get("solver.newton_tol", s.newton_tol);
  r.get("solver.max_newton_per_stage", s.max_newton_per_stage);
  r.get("solver.trace", s.trace);
  r.get("solver.init", s.init);
  r.get("solver.seed", s.seed);

  r.get("oracle.reference", c.reference);
  r.get("oracle.fine_n", c.fine_n);
  r.get("convergence.n_list", c.n_list);
  r.get("sweep.param", c.sweep.param);
  r.get("sweep.values", c.sweep.values);

  r.get("transform.betas", c.transform.betas);
  r.get("transform.target_P", c.transform.target_P);
  r.get("transform.hjb_tol", c.transform.hjb_tol);
  r.get("transform.hjb_max_iters", c.transform.hjb_max_iters);

  r.get("second_order.inner_tol", c.second_order.inner_tol);
  r.get("second_order.inner_max_iters", c.second_order.inner_max_iters);
  r.get("second_order.mass_tol", c.second_order.mass_tol);
  r.get("second_order.outer_max_iters", c.second_order.outer_max_iters);
  r.get("second_order.bracket", c.second_order.bracket);

  r.get("output.emit", c.emit);
}

ExperimentConfig base(Mode mode, int dim, int n, double alpha, double gamma, std::vector<double> drift,
                      std::string potential, double amplitude, double s1, double s2, std::vector<Term> coupling) {
  ExperimentConfig c;
  c.mode = mode;
  c.problem.dim = dim;
  c.problem.n = n;
  c.problem.alpha = alpha;
  c.problem.gamma = gamma;
  c.problem.drift = std::move(drift);
  c.problem.potential = std::move(potential);
  c.problem.amplitude = amplitude;
  c.problem.shift1 = s1;
  c.problem.shift2 = s2;
  c.problem.coupling = std::move(coupling);
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig1",    "borderline", "table1",        "psweep",    "alphasweep",
          "table2",  "fig2d_p13",  "fig2d_gamma25", "transform", "secondorder"};
}

ExperimentConfig preset(const std::string& name) {
  const std::vector<Term> quad{{0.5, 2.0}};
  const std::vector<Term> cubic{{1.0, 3.0}};
  ExperimentConfig c;
  if (name == "fig1" || name == "borderline" || name == "table1") {
    const double amp = name == "fig1" ? 0.5 : name == "borderline" ? 1.0 : 10.0;
    c = base(Mode::Convergence, 1, 200, 1.5, 2.0, {0.0}, "cosine-shift", amp, 0.25, 0.0, quad);
    if (name == "table1") {
      c.n_list = {100, 200, 400};
      c.reference = "continuum";
    } else {
      c.n_list = {200};
    }
  } else if (name == "psweep") {
    c = base(Mode::Solve, 1, 200, 1.5, 2.0, {0.0}, "gaussian-bump", 1.0, 0.5, 0.0, {{1.0, 2.0}});
    c.sweep = {"drift", {0.0, 2.0, 4.0, 6.0, 8.0}};
  } else if (name == "alphasweep") {
    c = base(Mode::Solve, 1, 200, 1.5, 2.0, {1.0}, "sine-cosine-product", 10.0, 0.25, 0.0, cubic);
    c.sweep = {"alpha", {1.001, 1.2, 1.4, 2.0}};
  } else if (name == "table2") {
    c = base(Mode::Convergence, 2, 40, 1.5, 2.0, {0.0, 0.0}, "sine-cosine-product", 10.0, 0.25, 0.25, quad);
    c.n_list = {20, 40};
    c.reference = "continuum";
  } else if (name == "fig2d_p13") {
    c = base(Mode::Solve, 2, 50, 1.5, 2.0, {1.0, 3.0}, "sine-cosine-product", 1.0, 0.25, 0.25, cubic);
  } else if (name == "fig2d_gamma25") {
    c = base(Mode::Solve, 2, 50, 2.0, 2.5, {-1.0, 3.0}, "exp-sin-cos", 1.0, 0.25, -0.25, {{0.5, 2.0}, {1.0, 3.0}});
  } else if (name == "transform") {
    c = base(Mode::Transform, 2, 50, 0.8, 2.0, {0.0, 0.0}, "sine-cosine-product", 1.0, 0.25, 0.25, cubic);
    c.problem.Q = std::make_pair(3.0, -1.0);
  } else if (name == "secondorder") {
    c = base(Mode::SecondOrder, 2, 50, 1.5, 2.0, {0.0, 0.0}, "exp-sin-cos", 1.0, 0.25, -0.5, cubic);
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  c.preset = name;
  c.out = "out/" + name;
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  Reader r(tree, key_lines(text), source);
  ExperimentConfig c;
  if (auto p = r.raw("preset"); p && !p->empty()) {
    try {
      c = preset(*p);
    } catch (const ConfigError& e) {
      r.fail("preset", e.what());
    }
    c.mode = Mode::Reproduce;
  }
  c.source = source;
  apply(r, c);
  r.reject_unknown();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

ExperimentConfig resolve(ExperimentConfig cfg) {
  if (cfg.mode != Mode::Reproduce) return cfg;
  if (cfg.preset.empty()) throw ConfigError(cfg.source + ": mode reproduce needs 'preset'");
  cfg.mode = preset(cfg.preset).mode;
  return cfg;
}

void validate(const ExperimentConfig& c) {
  const std::string& src = c.source;
  auto fail = [&](const std::string& key, const std::string& what) -> void {
    throw ConfigError(src + ": " + what + " for '" + key + "'");
  };
  const ProblemConfig& p = c.problem;
  if (c.mode == Mode::Reproduce) fail("mode", "unresolved reproduce mode");
  if (!p.dim) fail("problem.dim", "missing required field");
  if (!p.n) fail("problem.n", "missing required field");
  if (!p.alpha) fail("problem.alpha", "missing required field");
  if (!p.gamma) fail("problem.gamma", "missing required field");
  if (*p.dim != 1 && *p.dim != 2) fail("problem.dim", "dimension must be 1 or 2");
  if (*p.n < 5) fail("problem.n", "need at least 5 nodes per axis");
  if (!(*p.gamma > 1.0)) fail("problem.gamma", "gamma must exceed 1");
  if (!(*p.alpha > 0.0)) fail("problem.alpha", "alpha must be positive");
  if (p.coupling.empty()) fail("problem.coupling", "missing required field");
  if (!p.drift.empty() && static_cast<int>(p.drift.size()) != *p.dim)
    fail("problem.drift", "need one entry per axis");
  const bool zero_drift = std::all_of(p.drift.begin(), p.drift.end(), [](double v) { return v == 0.0; });
  const double a = *p.alpha, g = *p.gamma;

  switch (c.mode) {
    case Mode::Solve:
      if (!(a > 1.0 && a <= g)) fail("problem.alpha", "solve needs 1 < alpha <= gamma");
      break;
    case Mode::Convergence:
      if (!(a > 1.0 && a <= g)) fail("problem.alpha", "convergence needs 1 < alpha <= gamma");
      [[fallthrough]];
    case Mode::Oracle:
      if (!zero_drift) fail("problem.drift", "the explicit solution needs P = 0");
      break;
    case Mode::Critical:
      if (a != 1.0) fail("problem.alpha", "critical mode needs alpha = 1");
      break;
    case Mode::Transform:
      if (*p.dim != 2) fail("problem.dim", "transform needs dim = 2");
      if (!(a < 1.0)) fail("problem.alpha", "transform needs 0 < alpha < 1");
      if (!p.Q) fail("problem.Q", "missing required field");
      break;
    case Mode::SecondOrder:
      if (!zero_drift) fail("problem.drift", "second-order mode needs P = 0");
      break;
    case Mode::Reproduce:
      break;
  }
  if (c.mode == Mode::Convergence) {
    if (c.n_list.empty()) fail("convergence.n_list", "missing required field");
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
      if (c.n_list[i] < 5) fail("convergence.n_list", "need at least 5 nodes per axis");
      if (i > 0 && c.n_list[i] <= c.n_list[i - 1]) fail("convergence.n_list", "N must be strictly increasing");
    }
  }
  if (!c.sweep.param.empty()) {
    if (c.mode != Mode::Solve) fail("sweep.param", "sweeps run in solve mode only");
    if (c.sweep.values.empty()) fail("sweep.values", "missing required field");
    if (c.sweep.param == "drift") {
      if (*p.dim != 1) fail("sweep.param", "drift sweeps need dim = 1");
    } else if (c.sweep.param == "alpha") {
      for (double v : c.sweep.values)
        if (!(v > 1.0 && v <= g)) fail("sweep.values", "every alpha must satisfy 1 < alpha <= gamma");
    } else {
      fail("sweep.param", "unknown sweep parameter '" + c.sweep.param + "'");
    }
  }
  if (c.reference != "same-grid" && c.reference != "continuum")
    fail("oracle.reference", "unknown reference '" + c.reference + "'");
  if (c.fine_n < 0) fail("oracle.fine_n", "negative size");
  if (c.solver.method != "barrier-newton" && c.solver.method != "projected-gradient")
    fail("solver.method", "unknown method '" + c.solver.method + "'");
  if (c.solver.init != "uniform" && c.solver.init != "random")
    fail("solver.init", "unknown init '" + c.solver.init + "'");
  for (double b : c.transform.betas)
    if (!(b > 0.0)) fail("transform.betas", "discount factors must be positive");
  if (c.second_order.bracket && !(c.second_order.bracket->first < c.second_order.bracket->second))
    fail("second_order.bracket", "need lo < hi");
  if (c.out.empty()) fail("out", "missing required field");
}

}  // namespace mfgcli

#include "mfg/mfg.h"

#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <new>
#include <string>

#include <nlohmann/json.hpp>

#include "mfg/error.hpp"
#include "mfg/oracle.hpp"
#include "mfg/second_order.hpp"
#include "mfg/transform.hpp"

struct mfg_problem {
  mfg::ProblemSpec spec;
};

struct mfg_result {
  std::map<std::string, mfg::GridFunction> fields;
  std::string field_names;
  nlohmann::json summary;
  std::string summary_text;
  bool converged = false;
  double Hbar = 0.0;
  std::size_t size = 0;

  void add(const std::string& name, mfg::GridFunction f) {
    size = f.size();
    if (!field_names.empty()) field_names += ',';
    field_names += name;
    fields.emplace(name, std::move(f));
  }
  void seal() {
    summary["converged"] = converged;
    summary["Hbar"] = Hbar;
    summary_text = summary.dump(2);
  }
};

namespace {

thread_local std::string g_last_error;

template <class F>
mfg_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return MFG_OK;
  } catch (const mfg::InvalidArgument& e) {
    g_last_error = e.what();
    return MFG_ERR_INVALID_ARGUMENT;
  } catch (const mfg::InvalidInit& e) {
    g_last_error = e.what();
    return MFG_ERR_INVALID_INIT;
  } catch (const mfg::DegenerateSolution& e) {
    g_last_error = e.what();
    return MFG_ERR_DEGENERATE;
  } catch (const mfg::NumericError& e) {
    g_last_error = e.what();
    return MFG_ERR_NUMERIC;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return MFG_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MFG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MFG_ERR_INTERNAL;
  }
}

void require(bool ok, const char* msg) {
  if (!ok) throw mfg::InvalidArgument(msg);
}

mfg::CouplingG make_coupling(const double* c, const double* theta, std::size_t n) {
  require(n == 0 || (c && theta), "coupling arrays are null");
  std::vector<mfg::PowerTerm> terms;
  for (std::size_t i = 0; i < n; ++i) terms.push_back({c[i], theta[i]});
  return mfg::CouplingG(std::move(terms));
}

std::vector<double> make_drift(int dim, const double* drift) {
  std::vector<double> p(static_cast<std::size_t>(std::max(dim, 0)), 0.0);
  if (drift)
    for (int k = 0; k < dim; ++k) p[static_cast<std::size_t>(k)] = drift[k];
  return p;
}

mfg::SolveOptions to_cpp(const mfg_solve_options& o) {
  mfg::SolveOptions s;
  require(o.method == MFG_METHOD_BARRIER_NEWTON || o.method == MFG_METHOD_PROJECTED_GRADIENT,
          "unknown solve method");
  s.method = o.method == MFG_METHOD_BARRIER_NEWTON ? mfg::SolveMethod::BarrierNewton
                                                   : mfg::SolveMethod::ProjectedGradient;
  s.max_iters = o.max_iters;
  s.tol_gradmap = o.tol_gradmap;
  s.tol_obj = o.tol_obj;
  s.step0 = o.step0;
  s.armijo_c = o.armijo_c;
  s.backtrack = o.backtrack;
  s.seed = o.seed;
  s.mass_cutoff = o.mass_cutoff;
  s.mu_initial = o.mu_initial;
  s.mu_final = o.mu_final;
  s.mu_factor = o.mu_factor;
  s.newton_tol = o.newton_tol;
  s.max_newton_per_stage = o.max_newton_per_stage;
  s.record_trace = o.record_trace != 0;
  s.validate();
  return s;
}

nlohmann::json problem_json(const mfg::ProblemSpec& s) {
  nlohmann::json coupling = nlohmann::json::array();
  for (const auto& t : s.coupling.terms()) coupling.push_back({{"c", t.coefficient}, {"theta", t.exponent}});
  nlohmann::json j{{"dim", s.grid.dim()},      {"n", s.grid.n()},        {"alpha", s.alpha},
                   {"gamma", s.gamma},         {"drift", s.drift},       {"coupling", coupling}};
  if (s.potential) {
    j["potential"] = {{"family", s.potential->tag()},
                      {"amplitude", s.potential->amplitude},
                      {"shift1", s.potential->shift1},
                      {"shift2", s.potential->shift2}};
  } else {
    j["potential"] = {{"family", "custom-samples"}};
  }
  return j;
}

void fill_solution(mfg_result& r, const mfg::SolveResult& s, const mfg::ProblemSpec& spec, const char* kind) {
  r.summary["kind"] = kind;
  r.summary["problem"] = problem_json(spec);
  r.summary["objective"] = s.objective;
  r.summary["gradmap"] = s.gradmap;
  r.summary["iters"] = s.iters;
  r.summary["Hbar_std"] = s.Hbar_std;
  r.summary["mass_error"] = mfg::mass_error(s.m);
  r.summary["umean_error"] = mfg::mean_error(s.u);
  r.summary["apriori"] = mfg::to_json(s.diagnostics);
  if (!s.trace.empty()) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& row : s.trace)
      t.push_back({{"iter", row.iter}, {"objective", row.objective}, {"gradmap", row.gradmap}, {"step", row.step}});
    r.summary["trace"] = t;
  }
  r.converged = s.converged;
  r.Hbar = s.Hbar;
  r.add("u", s.u);
  r.add("m", s.m);
}

template <class F>
mfg_status make_result(mfg_result** out, F&& build) {
  if (!out) {
    g_last_error = "output handle is null";
    return MFG_ERR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<mfg_result>();
    build(*r);
    r->seal();
    *out = r.release();
  });
}

}  // namespace

extern "C" {

const char* mfg_last_error(void) { return g_last_error.c_str(); }

const char* mfg_version(void) { return "1.0.0"; }

mfg_status mfg_problem_create(int dim, int n, double alpha, double gamma, const double* drift,
                              const char* potential_tag, double amplitude, double shift1, double shift2,
                              const double* coupling_c, const double* coupling_theta, size_t n_terms,
                              mfg_problem** out) {
  if (!out) {
    g_last_error = "output handle is null";
    return MFG_ERR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guarded([&] {
    require(potential_tag != nullptr, "potential tag is null");
    mfg::TorusGrid grid(dim, n);
    auto pot = mfg::PotentialFamily::from_tag(potential_tag, amplitude, shift1, shift2);
    *out = new mfg_problem{mfg::ProblemSpec(grid, alpha, gamma, make_drift(dim, drift), pot,
                                            make_coupling(coupling_c, coupling_theta, n_terms))};
  });
}

mfg_status mfg_problem_create_sampled(int dim, int n, double alpha, double gamma, const double* drift,
                                      const double* V, const double* coupling_c, const double* coupling_theta,
                                      size_t n_terms, mfg_problem** out) {
  if (!out) {
    g_last_error = "output handle is null";
    return MFG_ERR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guarded([&] {
    require(V != nullptr, "potential samples are null");
    mfg::TorusGrid grid(dim, n);
    mfg::GridFunction v(grid, std::vector<double>(V, V + grid.size()));
    *out = new mfg_problem{mfg::ProblemSpec(grid, alpha, gamma, make_drift(dim, drift), std::move(v),
                                            make_coupling(coupling_c, coupling_theta, n_terms))};
  });
}

void mfg_problem_destroy(mfg_problem* p) { delete p; }

size_t mfg_problem_size(const mfg_problem* p) { return p ? p->spec.grid.size() : 0; }

void mfg_solve_options_init(mfg_solve_options* o) {
  if (!o) return;
  const mfg::SolveOptions d;
  o->method = d.method == mfg::SolveMethod::BarrierNewton ? MFG_METHOD_BARRIER_NEWTON
                                                          : MFG_METHOD_PROJECTED_GRADIENT;
  o->max_iters = d.max_iters;
  o->tol_gradmap = d.tol_gradmap;
  o->tol_obj = d.tol_obj;
  o->step0 = d.step0;
  o->armijo_c = d.armijo_c;
  o->backtrack = d.backtrack;
  o->seed = d.seed;
  o->mass_cutoff = d.mass_cutoff;
  o->mu_initial = d.mu_initial;
  o->mu_final = d.mu_final;
  o->mu_factor = d.mu_factor;
  o->newton_tol = d.newton_tol;
  o->max_newton_per_stage = d.max_newton_per_stage;
  o->record_trace = d.record_trace ? 1 : 0;
}

void mfg_transform_options_init(mfg_transform_options* o) {
  if (!o) return;
  const mfg::PipelineOptions d;
  mfg_solve_options_init(&o->solve);
  o->hjb_tol = d.hjb.tol;
  o->hjb_max_iters = d.hjb.max_iters;
  o->betas = nullptr;
  o->n_betas = 0;
  o->has_target_P = 0;
  o->target_P[0] = o->target_P[1] = 0.0;
  o->target_tol = d.target_tol;
  o->target_max_iters = d.target_max_iters;
}

void mfg_second_order_options_init(mfg_second_order_options* o) {
  if (!o) return;
  const mfg::SecondOrderOptions d;
  o->inner_tol = d.inner_tol;
  o->inner_max_iters = d.inner_max_iters;
  o->mass_tol = d.mass_tol;
  o->outer_max_iters = d.outer_max_iters;
  o->has_bracket = 0;
  o->bracket_lo = o->bracket_hi = 0.0;
}

mfg_status mfg_minimize(const mfg_problem* p, const mfg_solve_options* o, int init, uint64_t seed,
                        mfg_result** out) {
  return make_result(out, [&](mfg_result& r) {
    require(p != nullptr, "problem handle is null");
    mfg_solve_options defaults;
    mfg_solve_options_init(&defaults);
    const mfg::SolveOptions opts = to_cpp(o ? *o : defaults);
    require(init == MFG_INIT_UNIFORM || init == MFG_INIT_RANDOM, "unknown init kind");
    const mfg::InitSpec is = init == MFG_INIT_UNIFORM ? mfg::InitSpec::uniform() : mfg::InitSpec::random(seed);
    const mfg::DiscreteObjective obj(p->spec);
    const mfg::SolveResult s = mfg::minimize(obj, is, opts);
    fill_solution(r, s, p->spec, "solve");
    r.summary["method"] = mfg::to_string(opts.method);
    r.summary["init"] = init == MFG_INIT_UNIFORM ? "uniform" : "random";
    r.summary["seed"] = seed;
  });
}

mfg_status mfg_oracle_p0(const mfg_problem* p, int reference, int fine_n, mfg_result** out) {
  return make_result(out, [&](mfg_result& r) {
    require(p != nullptr, "problem handle is null");
    require(reference == MFG_REFERENCE_SAME_GRID || reference == MFG_REFERENCE_CONTINUUM,
            "unknown oracle reference");
    mfg::OracleOptions oo;
    oo.reference = reference == MFG_REFERENCE_SAME_GRID ? mfg::OracleReference::SameGrid
                                                        : mfg::OracleReference::Continuum;
    oo.fine_n = fine_n;
    const mfg::SolveResult s = mfg::solve_P0(p->spec, oo);
    fill_solution(r, s, p->spec, "oracle");
    r.summary["reference"] = reference == MFG_REFERENCE_SAME_GRID ? "same-grid" : "continuum";
  });
}

mfg_status mfg_critical(const mfg_problem* p, mfg_result** out) {
  return make_result(out, [&](mfg_result& r) {
    require(p != nullptr, "problem handle is null");
    const mfg::CriticalResult c = mfg::solve_critical(p->spec);
    fill_solution(r, c.solution, p->spec, "critical");
    r.summary["max_residual"] = c.max_residual;
  });
}

mfg_status mfg_classical_check(const mfg_problem* p, double* min_value, int* exists) {
  return guarded([&] {
    require(p != nullptr, "problem handle is null");
    const mfg::ClassicalCheck c = mfg::classical_existence_check(p->spec);
    if (min_value) *min_value = c.min_value;
    if (exists) *exists = c.classical_exists ? 1 : 0;
  });
}

mfg_status mfg_transform(const mfg_problem* p, const double Q[2], const mfg_transform_options* o,
                         mfg_result** out) {
  return make_result(out, [&](mfg_result& r) {
    require(p != nullptr, "problem handle is null");
    require(Q != nullptr, "Q is null");
    mfg_transform_options defaults;
    mfg_transform_options_init(&defaults);
    const mfg_transform_options& to = o ? *o : defaults;
    mfg::PipelineOptions po;
    po.solve = to_cpp(to.solve);
    po.hjb.tol = to.hjb_tol;
    po.hjb.max_iters = to.hjb_max_iters;
    po.hjb.mass_cutoff = po.solve.mass_cutoff;
    if (to.betas) {
      require(to.n_betas > 0, "empty discount schedule");
      po.beta_schedule.assign(to.betas, to.betas + to.n_betas);
    }
    if (to.has_target_P) po.target_P = mfg::Vec2{to.target_P[0], to.target_P[1]};
    po.target_tol = to.target_tol;
    po.target_max_iters = to.target_max_iters;
    const mfg::DualSpec dual(p->spec, {Q[0], Q[1]});
    const mfg::TransformResult t = mfg::pipeline_alpha_lt_1(dual, po);

    const auto ex = dual.exponents();
    r.summary["kind"] = "transform";
    r.summary["problem"] = problem_json(p->spec);
    r.summary["Q"] = {t.Q[0], t.Q[1]};
    r.summary["P_recovered"] = {t.P_recovered[0], t.P_recovered[1]};
    r.summary["gamma_prime"] = ex.gamma_prime;
    r.summary["alpha_tilde"] = ex.alpha_tilde;
    r.summary["Hbar_max_u"] = t.Hbar_max_u;
    r.summary["Hbar_dual"] = t.Hbar_dual;
    r.summary["dual_converged"] = t.dual_converged;
    r.summary["dual_iters"] = t.dual.iters;
    r.summary["dual_gradmap"] = t.dual.gradmap;
    r.summary["mass_error"] = mfg::mass_error(t.m);
    // u is emitted mean-zero like every other solver; the max-normalized
    // shift is kept in the summary.
    mfg::GridFunction u = t.u;
    u += -u.mean();
    r.summary["u_max_normalized_shift"] = t.u.mean();
    r.summary["umean_error"] = mfg::mean_error(u);
    nlohmann::json betas = nlohmann::json::array();
    for (const auto& b : t.betas)
      betas.push_back({{"beta", b.beta},
                       {"Hbar", b.Hbar},
                       {"Hbar_max_u", b.Hbar_max_u},
                       {"oscillation", b.oscillation},
                       {"residual", b.residual},
                       {"iters", b.iters},
                       {"converged", b.converged}});
    r.summary["betas"] = betas;
    r.summary["residuals"] = {{"dual_divergence_l1", t.residuals.dual_divergence_l1},
                              {"dual_divergence_l1_stencil", t.residuals.dual_divergence_l1_stencil},
                              {"hjb_max", t.residuals.hjb_max},
                              {"curl_proxy", t.residuals.curl_proxy},
                              {"flux_mismatch", t.residuals.flux_mismatch}};
    r.converged = t.converged;
    r.Hbar = t.Hbar;
    r.add("u", std::move(u));
    r.add("m", t.m);
    r.add("psi", t.psi);
  });
}

mfg_status mfg_second_order(const mfg_problem* p, const mfg_second_order_options* o, mfg_result** out) {
  return make_result(out, [&](mfg_result& r) {
    require(p != nullptr, "problem handle is null");
    mfg_second_order_options defaults;
    mfg_second_order_options_init(&defaults);
    const mfg_second_order_options& so = o ? *o : defaults;
    std::optional<std::pair<double, double>> bracket;
    if (so.has_bracket) bracket = std::make_pair(so.bracket_lo, so.bracket_hi);
    const mfg::SecondOrderSpec spec(p->spec, bracket);
    mfg::SecondOrderOptions opts;
    opts.inner_tol = so.inner_tol;
    opts.inner_max_iters = so.inner_max_iters;
    opts.mass_tol = so.mass_tol;
    opts.outer_max_iters = so.outer_max_iters;
    const mfg::SecondOrderResult s = mfg::solve_second_order(spec, opts);

    r.summary["kind"] = "second-order";
    r.summary["problem"] = problem_json(p->spec);
    r.summary["beta"] = spec.beta();
    r.summary["objective"] = s.solution.objective;
    r.summary["iters"] = s.solution.iters;
    r.summary["mass"] = s.mass;
    r.summary["mass_error"] = std::abs(s.mass - 1.0);
    r.summary["el_residual"] = s.residual.max_abs();
    r.summary["u_reconstructed"] = s.u_reconstructed;
    if (s.u_reconstructed) {
      r.summary["umean_error"] = mfg::mean_error(s.solution.u);
      r.summary["hjb_residual"] =
          mfg::hjb_residual_second_order(s.solution.u, s.solution.m, p->spec, s.solution.Hbar).max_abs();
    }
    nlohmann::json outer = nlohmann::json::array();
    for (const auto& o2 : s.outer) outer.push_back({{"Hbar", o2.Hbar}, {"mass", o2.mass}});
    r.summary["outer"] = outer;
    r.converged = s.solution.converged;
    r.Hbar = s.solution.Hbar;
    r.add("psi", s.psi);
    r.add("m", s.solution.m);
    if (s.u_reconstructed) r.add("u", s.solution.u);
    r.add("residual", s.residual);
  });
}

void mfg_result_destroy(mfg_result* r) { delete r; }

int mfg_result_converged(const mfg_result* r) { return r && r->converged ? 1 : 0; }

double mfg_result_hbar(const mfg_result* r) { return r ? r->Hbar : 0.0; }

size_t mfg_result_size(const mfg_result* r) { return r ? r->size : 0; }

const char* mfg_result_field_names(const mfg_result* r) { return r ? r->field_names.c_str() : ""; }

mfg_status mfg_result_field(const mfg_result* r, const char* name, double* out, size_t size) {
  return guarded([&] {
    require(r && name && out, "null argument");
    const auto it = r->fields.find(name);
    require(it != r->fields.end(), "result has no such field");
    require(size == it->second.size(), "output size does not match the field");
    std::copy(it->second.data().begin(), it->second.data().end(), out);
  });
}

const char* mfg_result_summary_json(const mfg_result* r) { return r ? r->summary_text.c_str() : "{}"; }

mfg_status mfg_result_write_csv(const mfg_result* r, const char* name, const char* path) {
  const mfg_status st = guarded([&] {
    require(r && name && path, "null argument");
    const auto it = r->fields.find(name);
    require(it != r->fields.end(), "result has no such field");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(std::string("cannot open ") + path);
    f << mfg::to_csv(it->second);
    if (!f) throw std::runtime_error(std::string("write failed for ") + path);
  });
  return st == MFG_ERR_INTERNAL ? MFG_ERR_IO : st;
}

}  // extern "C"

#ifndef MFG_MFG_H
#define MFG_MFG_H

/* C interface to the congestion MFG solvers. Every function returns an
 * mfg_status; on failure mfg_last_error() describes the cause for the
 * calling thread. Handles are opaque and released with their destroy
 * function. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MFG_API __declspec(dllexport)
#else
#define MFG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  MFG_OK = 0,
  MFG_ERR_INVALID_ARGUMENT = 1,
  MFG_ERR_NUMERIC = 2,
  MFG_ERR_DEGENERATE = 3,
  MFG_ERR_INVALID_INIT = 4,
  MFG_ERR_IO = 5,
  MFG_ERR_INTERNAL = 6
} mfg_status;

typedef enum { MFG_METHOD_BARRIER_NEWTON = 0, MFG_METHOD_PROJECTED_GRADIENT = 1 } mfg_method;

typedef enum { MFG_INIT_UNIFORM = 0, MFG_INIT_RANDOM = 1 } mfg_init;

typedef enum { MFG_REFERENCE_SAME_GRID = 0, MFG_REFERENCE_CONTINUUM = 1 } mfg_reference;

typedef struct mfg_problem mfg_problem;
typedef struct mfg_result mfg_result;

typedef struct {
  int method; /* mfg_method */
  int max_iters;
  double tol_gradmap;
  double tol_obj;
  double step0;
  double armijo_c;
  double backtrack;
  uint64_t seed;
  double mass_cutoff;
  double mu_initial;
  double mu_final;
  double mu_factor;
  double newton_tol;
  int max_newton_per_stage;
  int record_trace;
} mfg_solve_options;

typedef struct {
  mfg_solve_options solve;
  double hjb_tol;
  int hjb_max_iters;
  const double* betas; /* discount schedule; NULL keeps the default */
  size_t n_betas;
  int has_target_P;
  double target_P[2];
  double target_tol;
  int target_max_iters;
} mfg_transform_options;

typedef struct {
  double inner_tol;
  int inner_max_iters;
  double mass_tol;
  int outer_max_iters;
  int has_bracket;
  double bracket_lo;
  double bracket_hi;
} mfg_second_order_options;

MFG_API const char* mfg_last_error(void);
MFG_API const char* mfg_version(void);

/* Problem on the dim-torus with n nodes per axis. drift has dim entries
 * (NULL means zero). The coupling is G(m) = sum c_i m^theta_i. */
MFG_API mfg_status mfg_problem_create(int dim, int n, double alpha, double gamma, const double* drift,
                                      const char* potential_tag, double amplitude, double shift1,
                                      double shift2, const double* coupling_c,
                                      const double* coupling_theta, size_t n_terms, mfg_problem** out);
/* Same with the potential given as n^dim node values in row-major order. */
MFG_API mfg_status mfg_problem_create_sampled(int dim, int n, double alpha, double gamma,
                                              const double* drift, const double* V,
                                              const double* coupling_c, const double* coupling_theta,
                                              size_t n_terms, mfg_problem** out);
MFG_API void mfg_problem_destroy(mfg_problem* p);
MFG_API size_t mfg_problem_size(const mfg_problem* p);

MFG_API void mfg_solve_options_init(mfg_solve_options* o);
MFG_API void mfg_transform_options_init(mfg_transform_options* o);
MFG_API void mfg_second_order_options_init(mfg_second_order_options* o);

/* Discrete variational minimizer over mean-zero u and unit-mass m. */
MFG_API mfg_status mfg_minimize(const mfg_problem* p, const mfg_solve_options* o, int init, uint64_t seed,
                                mfg_result** out);
/* Explicit P = 0 solution. */
MFG_API mfg_status mfg_oracle_p0(const mfg_problem* p, int reference, int fine_n, mfg_result** out);
/* alpha = 1 nodewise algebraic solution. */
MFG_API mfg_status mfg_critical(const mfg_problem* p, mfg_result** out);
/* Candidate classical solution for P = 0, gamma = 2, G = m^2/2. */
MFG_API mfg_status mfg_classical_check(const mfg_problem* p, double* min_value, int* exists);
/* 0 < alpha < 1 in 2D through the dual problem with flux constant Q. */
MFG_API mfg_status mfg_transform(const mfg_problem* p, const double Q[2], const mfg_transform_options* o,
                                 mfg_result** out);
/* Second-order problem with P = 0 through m = psi^beta. */
MFG_API mfg_status mfg_second_order(const mfg_problem* p, const mfg_second_order_options* o,
                                    mfg_result** out);

MFG_API void mfg_result_destroy(mfg_result* r);
MFG_API int mfg_result_converged(const mfg_result* r);
MFG_API double mfg_result_hbar(const mfg_result* r);
/* Node count of the result fields. */
MFG_API size_t mfg_result_size(const mfg_result* r);
/* Comma-separated names of the fields the result carries ("u,m", ...). */
MFG_API const char* mfg_result_field_names(const mfg_result* r);
/* Copies field `name` into out[0..size). */
MFG_API mfg_status mfg_result_field(const mfg_result* r, const char* name, double* out, size_t size);
/* JSON summary; the pointer stays valid until the result is destroyed. */
MFG_API const char* mfg_result_summary_json(const mfg_result* r);
/* Writes field `name` as "x[,y],value" rows. */
MFG_API mfg_status mfg_result_write_csv(const mfg_result* r, const char* name, const char* path);

#ifdef __cplusplus
}
#endif

#endif

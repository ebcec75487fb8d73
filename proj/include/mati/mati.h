#ifndef MATI_MATI_H
#define MATI_MATI_H

/*
 * C interface to the MATI analysis library.
 *
 * Every function returns a mati_status. On failure the message is available
 * from mati_last_error() on the calling thread until the next call into the
 * library. Handles are opaque and owned by the caller; release them with the
 * matching *_free function (NULL is accepted). Matrices are row-major.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(MATI_BUILDING_LIBRARY)
#define MATI_API __attribute__((visibility("default")))
#else
#define MATI_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  MATI_OK = 0,
  MATI_ERR_DOMAIN = 1,
  MATI_ERR_CONVERGENCE = 2,
  MATI_ERR_SOLVER_STALL = 3,
  MATI_ERR_NO_CERTIFICATE = 4,
  MATI_ERR_INGESTION = 5,
  MATI_ERR_VERIFICATION = 6,
  MATI_ERR_PRECONDITION = 7,
  MATI_ERR_INVALID_ARGUMENT = 8,
  MATI_ERR_INTERNAL = 9
} mati_status;

typedef enum {
  MATI_GAMMA_GREATER = 0,
  MATI_GAMMA_EQUAL = 1,
  MATI_GAMMA_LESS = 2
} mati_regime;

typedef enum {
  MATI_PROTOCOL_TOD = 0,
  MATI_PROTOCOL_RR = 1,
  MATI_PROTOCOL_SAMPLED_DATA = 2,
  MATI_PROTOCOL_CUSTOM = 3
} mati_protocol;

MATI_API const char* mati_last_error(void);
MATI_API const char* mati_status_string(mati_status status);
MATI_API const char* mati_regime_string(mati_regime regime);
MATI_API const char* mati_protocol_string(mati_protocol protocol);

/* ---- bound ------------------------------------------------------------ */

/* Any of value, regime, r may be NULL. */
MATI_API mati_status mati_bound(double L, double gamma, double lambda,
                                double* value, mati_regime* regime, double* r);

/* Time for phi to travel from 1/lambda down to lambda under the Riccati
 * clock (from 1e6 to 0 when lambda = 0). */
MATI_API mati_status mati_phi_transit(double L, double gamma, double lambda,
                                      double* tau);

/* n >= 2 samples of phi on [0, tau_end], starting from phi0. */
MATI_API mati_status mati_phi_curve(double L, double gamma, double phi0,
                                    double tau_end, size_t n, double* tau_out,
                                    double* phi_out);

/* ---- linear systems ---------------------------------------------------- */

typedef struct mati_problem mati_problem;

typedef struct {
  int nx;
  int ne;
  mati_protocol protocol;
  int l;
  double lambda;
  double m_w;
  double alpha_lo;
  double alpha_hi;
  double grid_step;
  size_t n_delta;
} mati_problem_info;

MATI_API mati_status mati_problem_load(const char* path, mati_problem** out);
/* A is nx*nx, E nx*ne, C ne*nx, F ne*ne. Protocol constants follow from
 * (protocol, l); node_dims may be NULL when l == ne or l == 1. */
MATI_API mati_status mati_problem_create(int nx, int ne, const double* A,
                                         const double* E, const double* C,
                                         const double* F,
                                         mati_protocol protocol, int l,
                                         const int* node_dims,
                                         mati_problem** out);
MATI_API void mati_problem_free(mati_problem* p);

MATI_API mati_status mati_problem_get_info(const mati_problem* p,
                                           mati_problem_info* info);
/* Copies min(cap, n_delta) values. */
MATI_API mati_status mati_problem_deltas(const mati_problem* p, double* out,
                                         size_t cap);
MATI_API mati_status mati_problem_set_grid_step(mati_problem* p, double step);

typedef struct mati_sweep mati_sweep;

typedef struct {
  double k;
  double l_k;
  double gamma_k;
  double tau_k;
  double t_star;
  double p_min;
  double slack_margin;
  int certified;
} mati_sweep_row;

/* Minimal gamma and MATI for every k on the grid at this delta. Rows that
 * the solver could not certify are kept with certified = 0. */
MATI_API mati_status mati_sweep_run(const mati_problem* p, double delta,
                                    mati_sweep** out);
MATI_API void mati_sweep_free(mati_sweep* s);
MATI_API size_t mati_sweep_size(const mati_sweep* s);
MATI_API mati_status mati_sweep_get_row(const mati_sweep* s, size_t i,
                                        mati_sweep_row* row);
/* Index of the largest certified tau (ties to the smaller k). Returns
 * MATI_ERR_NO_CERTIFICATE if no row was certified. */
MATI_API mati_status mati_sweep_best(const mati_sweep* s, size_t* index);
/* Witness P for row i, nx*nx row-major into out (cap >= nx*nx). */
MATI_API mati_status mati_sweep_witness(const mati_sweep* s, size_t i,
                                        double* out, size_t cap);

/* The k = 0 analysis. */
MATI_API mati_status mati_baseline(const mati_problem* p, double delta,
                                   mati_sweep_row* row);

/* Spectral radius of one round-robin cycle at constant period T. */
MATI_API mati_status mati_monodromy_radius_rr(const mati_problem* p, double T,
                                              double* rho);

/* Empirical sup of ||h(e)|| / ||e|| over l scalar nodes. */
MATI_API mati_status mati_verify_lambda(mati_protocol protocol, int l,
                                        int n_trials, uint64_t seed,
                                        double* sup, double* analytic);

/* ---- polynomial certificates ------------------------------------------ */

typedef struct mati_certificate mati_certificate;

typedef struct {
  double min_margin;
  double max_abs;
  double tol;
  double worst_x;
  double worst_e;
  double worst_d;
  double worst_d2;
  int radial_growth;
  int pass;
} mati_verification;

MATI_API mati_status mati_certificate_load(const char* path,
                                           mati_certificate** out);
MATI_API mati_status mati_certificate_create(double c4, double c2, double k,
                                             double delta, double gamma,
                                             mati_certificate** out);
MATI_API void mati_certificate_free(mati_certificate* c);
/* Any output may be NULL. */
MATI_API mati_status mati_certificate_get(const mati_certificate* c,
                                          double* c4, double* c2, double* k,
                                          double* L, double* delta,
                                          double* gamma);
MATI_API mati_status mati_certificate_verify(const mati_certificate* c,
                                             double half_width, int n_grid,
                                             mati_verification* report);
/* Verifies, then returns the sampled-data bound; MATI_ERR_VERIFICATION if
 * the certificate fails. */
MATI_API mati_status mati_certificate_mati(const mati_certificate* c,
                                           double half_width, int n_grid,
                                           double* tau);
MATI_API mati_status mati_check_w_growth(const mati_certificate* c, double x,
                                         double e, double d, double* residual);

/* ---- simulation -------------------------------------------------------- */

typedef struct mati_scenario mati_scenario;
typedef struct mati_trace mati_trace;

typedef enum {
  MATI_VERDICT_STABLE = 0,
  MATI_VERDICT_DIVERGED = 1,
  MATI_VERDICT_UNDECIDED = 2
} mati_verdict;

typedef struct {
  double initial_norm;
  double final_norm;
  double min_ratio;
  double decay_time;
  double decay_rate;
  mati_verdict verdict;
  size_t n_points;
  size_t n_jumps;
  int diverged;
} mati_trace_summary;

typedef struct {
  double u0;
  double tolerance;
  double max_jump_increase;
  double max_flow_increase;
  long jump_checks;
  long flow_checks;
  long violations;
} mati_monitor_report;

typedef struct {
  double boundary;
  int found;
  int monodromy; /* 1 if decided by the monodromy radius */
} mati_empirical_result;

MATI_API mati_status mati_scenario_load(const char* path, mati_scenario** out);
MATI_API void mati_scenario_free(mati_scenario* s);
MATI_API int mati_scenario_has_monitor(const mati_scenario* s);
/* Copies the bracket to lo/hi; MATI_ERR_PRECONDITION if none was given. */
MATI_API mati_status mati_scenario_bracket(const mati_scenario* s, double* lo,
                                           double* hi);
/* Overrides the seed of a uniform-random schedule. */
MATI_API mati_status mati_scenario_set_seed(mati_scenario* s, uint64_t seed);

MATI_API mati_status mati_simulate(const mati_scenario* s, mati_trace** out);
MATI_API void mati_trace_free(mati_trace* t);
MATI_API mati_status mati_trace_summarize(const mati_trace* t,
                                          double decay_ratio,
                                          mati_trace_summary* out);
MATI_API mati_status mati_trace_check_domain(const mati_trace* t);
MATI_API mati_status mati_trace_write_csv(const mati_trace* t,
                                          const char* path);
/* Lyapunov monitor with the scenario's candidate and gains. */
MATI_API mati_status mati_trace_monitor(const mati_trace* t,
                                        const mati_scenario* s,
                                        mati_monitor_report* out);

/* Bisection on the constant transmission interval in [lo, hi] for the
 * scenario's dynamics and protocol. */
MATI_API mati_status mati_empirical(const mati_scenario* s, double lo,
                                    double hi, double tol,
                                    mati_empirical_result* out);

#ifdef __cplusplus
}
#endif

#endif

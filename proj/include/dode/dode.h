/* dode: diffusion probability-flow ODE samplers with distilled (D-ODE)
 * variants, exposed as a C shared-library API over opaque handles.
 *
 * Conventions:
 *   - every function returns a dode_status; DODE_OK is 0
 *   - on failure, dode_last_error() returns a thread-local message
 *   - sample blocks are row-major double arrays of shape (batch x dim)
 *   - handles are created by dode_*_create/_run and released by dode_*_free
 */
#ifndef DODE_H
#define DODE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dode_status {
    DODE_OK = 0,
    DODE_ERR_DOMAIN = 1,      /* argument outside the mathematical domain */
    DODE_ERR_CONFIG = 2,      /* invalid or incompatible configuration */
    DODE_ERR_NUMERIC = 3,     /* non-finite values or failed numerical procedure */
    DODE_ERR_UNSUPPORTED = 4, /* operation undefined for this backend/kind */
    DODE_ERR_INVALID = 5,     /* malformed argument */
    DODE_ERR_IO = 6,          /* file read/write failure */
} dode_status;

typedef enum dode_schedule_kind {
    DODE_SCHEDULE_VP_LINEAR = 0,
    DODE_SCHEDULE_VE_KARRAS = 1,
} dode_schedule_kind;

typedef enum dode_spacing {
    DODE_SPACING_UNIFORM_T = 0,
    DODE_SPACING_KARRAS_RHO = 1,
} dode_spacing;

typedef enum dode_parameterization {
    DODE_PARAM_NOISE = 0,
    DODE_PARAM_DATA = 1,
} dode_parameterization;

typedef enum dode_solver_kind {
    DODE_SOLVER_DDIM_NOISE = 0,
    DODE_SOLVER_DDIM_DATA = 1,
    DODE_SOLVER_IPNDM = 2,
    DODE_SOLVER_DPM1 = 3,
    DODE_SOLVER_DPM2 = 4,
    DODE_SOLVER_DPM3 = 5,
    DODE_SOLVER_DEIS0 = 6,
    DODE_SOLVER_DEIS1 = 7,
    DODE_SOLVER_DEIS2 = 8,
    DODE_SOLVER_DEIS3 = 9,
    DODE_SOLVER_EDM_HEUN = 10,
} dode_solver_kind;

typedef enum dode_ablation_axis {
    DODE_AXIS_SCALE = 0,
    DODE_AXIS_BATCH = 1,
} dode_ablation_axis;

typedef struct dode_schedule dode_schedule;
typedef struct dode_grid dode_grid;
typedef struct dode_oracle dode_oracle;
typedef struct dode_trajectory dode_trajectory;
typedef struct dode_lambda dode_lambda;
typedef struct dode_report dode_report;

const char* dode_version(void);
const char* dode_status_name(dode_status status);
/* Thread-local message for the most recent failure in this thread. */
const char* dode_last_error(void);

const char* dode_solver_kind_name(dode_solver_kind kind);
dode_status dode_solver_kind_parse(const char* name, dode_solver_kind* out);
/* Per-step lambda arity: 1 for single-stage solvers, 2 for dpm2/edm-heun, 3 for dpm3. */
int dode_solver_stage_count(dode_solver_kind kind);
int dode_solver_requires_ve(dode_solver_kind kind);

/* ---- noise schedules ---- */

dode_status dode_schedule_create_vp(double beta_min, double beta_max, double t_epsilon,
                                    dode_schedule** out);
dode_status dode_schedule_create_ve(double sigma_min, double sigma_max, double rho,
                                    dode_schedule** out);
void dode_schedule_free(dode_schedule* s);

dode_schedule_kind dode_schedule_get_kind(const dode_schedule* s);
double dode_schedule_t_min(const dode_schedule* s);
double dode_schedule_t_max(const dode_schedule* s);
dode_status dode_schedule_alpha_sigma(const dode_schedule* s, double t, double* alpha,
                                      double* sigma);
dode_status dode_schedule_log_snr(const dode_schedule* s, double t, double* tau);
dode_status dode_schedule_inv_log_snr(const dode_schedule* s, double tau, double* t);

/* ---- time grids ---- */

dode_status dode_grid_create(const dode_schedule* s, int n_steps, dode_spacing spacing,
                             dode_grid** out);
void dode_grid_free(dode_grid* g);
size_t dode_grid_num_points(const dode_grid* g);
/* Copies all points (strictly decreasing) into `out` (capacity >= num_points). */
dode_status dode_grid_points(const dode_grid* g, double* out);

/* ---- denoiser oracles ---- */

dode_status dode_oracle_create_gaussian(const double* mean, size_t dim, double stddev,
                                        dode_oracle** out);
/* points: n x dim row-major; the empirical-Bayes posterior mean over them. */
dode_status dode_oracle_create_point_cloud(const double* points, size_t n, size_t dim,
                                           dode_oracle** out);
/* weights: n_components (positive, summing to 1); means: n_components x dim;
 * stddevs: n_components. */
dode_status dode_oracle_create_gmm(const double* weights, const double* means,
                                   const double* stddevs, size_t n_components, size_t dim,
                                   dode_oracle** out);
void dode_oracle_free(dode_oracle* o);
size_t dode_oracle_dim(const dode_oracle* o);

/* out: batch x dim. Data view returns E[x0 | x_t]; noise view (x - alpha*xhat)/sigma. */
dode_status dode_oracle_denoise(const dode_oracle* o, const dode_schedule* s, const double* x,
                                size_t batch, double t, dode_parameterization param, double* out);
dode_status dode_oracle_score(const dode_oracle* o, const dode_schedule* s, const double* x,
                              size_t batch, double t, double* out);
/* Gaussian backend only: exact probability-flow transport from t_from to t_to. */
dode_status dode_oracle_exact_flow_map(const dode_oracle* o, const dode_schedule* s,
                                       const double* x, size_t batch, double t_from, double t_to,
                                       double* out);
/* Draws n samples from the backend's data distribution into out (n x dim). */
dode_status dode_oracle_sample_data(const dode_oracle* o, size_t n, uint64_t seed, double* out);

/* ---- sampling ---- */

/* Canonical initial noise shared by every entry point: N(0, I) for vp-linear,
 * N(0, sigma_max^2 I) for ve-karras. out: batch x dim. */
dode_status dode_init_noise(const dode_schedule* s, size_t batch, size_t dim, uint64_t seed,
                            double* out);

/* Runs the sampler over the grid. `lambdas` NULL gives the base solver;
 * otherwise the distilled variant with the given per-step weights.
 * `record` keeps all intermediate states and denoising outputs. */
dode_status dode_sample_run(dode_solver_kind kind, const dode_oracle* o, const dode_schedule* s,
                            const dode_grid* g, const double* x_init, size_t batch, int record,
                            const dode_lambda* lambdas, dode_trajectory** out);

void dode_trajectory_free(dode_trajectory* t);
size_t dode_trajectory_num_steps(const dode_trajectory* t);
size_t dode_trajectory_batch(const dode_trajectory* t);
size_t dode_trajectory_dim(const dode_trajectory* t);
long dode_trajectory_nfe(const dode_trajectory* t);
int dode_trajectory_recorded(const dode_trajectory* t);
dode_status dode_trajectory_times(const dode_trajectory* t, double* out); /* num_steps+1 */
/* State at grid index 0..num_steps (recorded runs only for interior indices). */
dode_status dode_trajectory_state(const dode_trajectory* t, size_t index, double* out);
dode_status dode_trajectory_final(const dode_trajectory* t, double* out);
/* Denoising output of step 0..num_steps-1 (recorded runs). */
dode_status dode_trajectory_output(const dode_trajectory* t, size_t index, double* out);
dode_status dode_trajectory_write_csv(const dode_trajectory* t, const char* path);
dode_status dode_trajectory_write_binary(const dode_trajectory* t, const char* path);
dode_status dode_trajectory_read_binary(const char* path, dode_trajectory** out);

/* ---- lambda schedules ---- */

dode_status dode_lambda_zero(dode_solver_kind kind, size_t steps, dode_lambda** out);
dode_status dode_lambda_fixed(dode_solver_kind kind, size_t steps, double value,
                              dode_lambda** out);
void dode_lambda_free(dode_lambda* l);
size_t dode_lambda_steps(const dode_lambda* l);
int dode_lambda_arity(const dode_lambda* l);
dode_status dode_lambda_kind(const dode_lambda* l, dode_solver_kind* out);
/* Copies the stage weights of one step into out (capacity >= arity). */
dode_status dode_lambda_values(const dode_lambda* l, size_t step, double* out);
dode_status dode_lambda_save_json(const dode_lambda* l, const char* path);
dode_status dode_lambda_load_json(const char* path, dode_lambda** out);

/* ---- distillation ---- */

typedef struct dode_distill_params {
    dode_solver_kind teacher;
    dode_solver_kind student;
    int scale_c;       /* teacher-to-student step ratio C */
    int student_steps; /* T */
    int batch;         /* |B| */
    uint64_t seed;
    dode_spacing spacing;
    int fit_batches; /* 1 = fit on a single batch (the default procedure) */
} dode_distill_params;

dode_status dode_distill_run(const dode_oracle* o, const dode_schedule* s,
                             const dode_distill_params* params, dode_lambda** out_lambda,
                             dode_report** out_report);
void dode_report_free(dode_report* r);
size_t dode_report_num_rows(const dode_report* r);
dode_status dode_report_row(const dode_report* r, size_t row, int* step, int* stage,
                            double* lambda, double* obj0, double* obj_star);
int dode_report_teacher_steps(const dode_report* r);
int dode_report_teacher_extra_points(const dode_report* r);
double dode_report_wall_seconds(const dode_report* r);
dode_status dode_report_write_csv(const dode_report* r, const char* path);

/* Repeats distill + held-out evaluation along one axis (3 seeds by default).
 * values may be NULL to use {5,10,20,30} (scale) or {5,10,50,100} (batch).
 * reference: reference_n x dim data sample for the quality metric.
 * out_means/out_stds: one entry per axis value. */
dode_status dode_ablate_run(const dode_oracle* o, const dode_schedule* s,
                            const dode_distill_params* params, dode_ablation_axis axis,
                            const double* values, size_t n_values, int seeds, int eval_batch,
                            int projections, uint64_t metric_seed, const double* reference,
                            size_t reference_n, double* out_means, double* out_stds);

/* Grid search over constant lambda values for a single-stage solver; the
 * metric is the sliced Wasserstein distance to the reference sample.
 * out_curve (optional): metric per candidate. */
dode_status dode_fixed_lambda_search(dode_solver_kind kind, const dode_oracle* o,
                                     const dode_schedule* s, const dode_grid* g,
                                     const double* x_init, size_t batch,
                                     const double* lambda_grid, size_t n_lambda,
                                     const double* reference, size_t reference_n, int projections,
                                     uint64_t metric_seed, double* out_best, double* out_curve);

/* ---- analysis metrics ---- */

/* Mean-over-batch cosine similarity between the denoising outputs of every
 * step pair; out: num_steps x num_steps row-major. zero_flag (optional) is set
 * when a zero-norm output was encountered (those entries are 0). */
dode_status dode_cosine_matrix(const dode_trajectory* t, double* out, int* zero_flag);
/* Batch-mean L2 norm per recorded state; out: num_steps+1. */
dode_status dode_norm_trace(const dode_trajectory* t, double* out);
/* Two chosen coordinates of one sample per recorded state; out: 2*(num_steps+1),
 * interleaved (a0, b0, a1, b1, ...). */
dode_status dode_coordinate_trace(const dode_trajectory* t, size_t sample, size_t coord_a,
                                  size_t coord_b, double* out);
dode_status dode_sliced_wasserstein(const double* a, size_t n_a, const double* b, size_t n_b,
                                    size_t dim, int n_projections, uint64_t seed, double* out);
/* Least-squares slope of log(error) vs log(1/steps). */
dode_status dode_convergence_order(const double* steps, const double* errors, size_t n,
                                   double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DODE_H */

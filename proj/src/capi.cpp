#include "dode/dode.h"

#include <cstring>
#include <string>

#include "analysis.hpp"
#include "distill.hpp"
#include "dode_transform.hpp"
#include "rng.hpp"

struct dode_schedule {
    dode::NoiseSchedule impl;
};
struct dode_grid {
    dode::TimeGrid impl;
};
struct dode_oracle {
    dode::DenoiserOracle impl;
};
struct dode_trajectory {
    dode::Trajectory impl;
};
struct dode_lambda {
    dode::LambdaSchedule impl;
};
struct dode_report {
    dode::DistillReport impl;
};

namespace {

thread_local std::string g_last_error;

dode_status to_status(dode::ErrorCode code) {
    switch (code) {
        case dode::ErrorCode::domain: return DODE_ERR_DOMAIN;
        case dode::ErrorCode::config: return DODE_ERR_CONFIG;
        case dode::ErrorCode::numeric: return DODE_ERR_NUMERIC;
        case dode::ErrorCode::unsupported: return DODE_ERR_UNSUPPORTED;
        case dode::ErrorCode::invalid: return DODE_ERR_INVALID;
        case dode::ErrorCode::io: return DODE_ERR_IO;
    }
    return DODE_ERR_INVALID;
}

template <typename F>
dode_status guarded(F&& fn) noexcept {
    try {
        fn();
        return DODE_OK;
    } catch (const dode::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DODE_ERR_NUMERIC;
    } catch (...) {
        g_last_error = "unknown error";
        return DODE_ERR_NUMERIC;
    }
}

dode_status invalid_arg(const char* msg) {
    g_last_error = msg;
    return DODE_ERR_INVALID;
}

dode::SolverKind to_kind(dode_solver_kind kind) {
    switch (kind) {
        case DODE_SOLVER_DDIM_NOISE: return dode::SolverKind::ddim_noise;
        case DODE_SOLVER_DDIM_DATA: return dode::SolverKind::ddim_data;
        case DODE_SOLVER_IPNDM: return dode::SolverKind::ipndm;
        case DODE_SOLVER_DPM1: return dode::SolverKind::dpm1;
        case DODE_SOLVER_DPM2: return dode::SolverKind::dpm2;
        case DODE_SOLVER_DPM3: return dode::SolverKind::dpm3;
        case DODE_SOLVER_DEIS0: return dode::SolverKind::deis0;
        case DODE_SOLVER_DEIS1: return dode::SolverKind::deis1;
        case DODE_SOLVER_DEIS2: return dode::SolverKind::deis2;
        case DODE_SOLVER_DEIS3: return dode::SolverKind::deis3;
        case DODE_SOLVER_EDM_HEUN: return dode::SolverKind::edm_heun;
    }
    dode::fail(dode::ErrorCode::invalid, "unknown solver kind");
}

dode_solver_kind from_kind(dode::SolverKind kind) {
    switch (kind) {
        case dode::SolverKind::ddim_noise: return DODE_SOLVER_DDIM_NOISE;
        case dode::SolverKind::ddim_data: return DODE_SOLVER_DDIM_DATA;
        case dode::SolverKind::ipndm: return DODE_SOLVER_IPNDM;
        case dode::SolverKind::dpm1: return DODE_SOLVER_DPM1;
        case dode::SolverKind::dpm2: return DODE_SOLVER_DPM2;
        case dode::SolverKind::dpm3: return DODE_SOLVER_DPM3;
        case dode::SolverKind::deis0: return DODE_SOLVER_DEIS0;
        case dode::SolverKind::deis1: return DODE_SOLVER_DEIS1;
        case dode::SolverKind::deis2: return DODE_SOLVER_DEIS2;
        case dode::SolverKind::deis3: return DODE_SOLVER_DEIS3;
        case dode::SolverKind::edm_heun: return DODE_SOLVER_EDM_HEUN;
    }
    return DODE_SOLVER_DDIM_NOISE;
}

dode::GridSpacing to_spacing(dode_spacing spacing) {
    return spacing == DODE_SPACING_KARRAS_RHO ? dode::GridSpacing::karras_rho
                                              : dode::GridSpacing::uniform_t;
}

dode::Batch to_batch(const double* data, size_t n, size_t dim) {
    dode::Batch b(n, dim);
    std::memcpy(b.data.data(), data, n * dim * sizeof(double));
    return b;
}

void from_batch(const dode::Batch& b, double* out) {
    std::memcpy(out, b.data.data(), b.data.size() * sizeof(double));
}

dode::DistillConfig to_config(const dode_distill_params* p, const dode_oracle* o) {
    dode::DistillConfig cfg;
    cfg.teacher = to_kind(p->teacher);
    cfg.student = to_kind(p->student);
    cfg.scale_c = p->scale_c;
    cfg.student_steps = p->student_steps;
    cfg.batch = p->batch;
    cfg.seed = p->seed;
    cfg.dim = o->impl.dim();
    cfg.spacing = to_spacing(p->spacing);
    cfg.fit_batches = p->fit_batches;
    return cfg;
}

}  // namespace

extern "C" {

const char* dode_version(void) {
    return "0.1.0";
}

const char* dode_status_name(dode_status status) {
    switch (status) {
        case DODE_OK: return "ok";
        case DODE_ERR_DOMAIN: return "domain";
        case DODE_ERR_CONFIG: return "config";
        case DODE_ERR_NUMERIC: return "numeric";
        case DODE_ERR_UNSUPPORTED: return "unsupported";
        case DODE_ERR_INVALID: return "invalid";
        case DODE_ERR_IO: return "io";
    }
    return "?";
}

const char* dode_last_error(void) {
    return g_last_error.c_str();
}

const char* dode_solver_kind_name(dode_solver_kind kind) {
    return dode::solver_kind_name(to_kind(kind));
}

dode_status dode_solver_kind_parse(const char* name, dode_solver_kind* out) {
    if (!name || !out) return invalid_arg("null argument");
    auto k = dode::solver_kind_from_name(name);
    if (!k) return invalid_arg("unknown solver kind name");
    *out = from_kind(*k);
    return DODE_OK;
}

int dode_solver_stage_count(dode_solver_kind kind) {
    return dode::solver_stage_count(to_kind(kind));
}

int dode_solver_requires_ve(dode_solver_kind kind) {
    return dode::solver_schedule_kind(to_kind(kind)) == dode::ScheduleKind::ve_karras ? 1 : 0;
}

/* ---- schedules ---- */

dode_status dode_schedule_create_vp(double beta_min, double beta_max, double t_epsilon,
                                    dode_schedule** out) {
    if (!out) return invalid_arg("null output");
    return guarded([&] {
        *out = new dode_schedule{dode::NoiseSchedule::vp_linear(beta_min, beta_max, t_epsilon)};
    });
}

dode_status dode_schedule_create_ve(double sigma_min, double sigma_max, double rho,
                                    dode_schedule** out) {
    if (!out) return invalid_arg("null output");
    return guarded([&] {
        *out = new dode_schedule{dode::NoiseSchedule::ve_karras(sigma_min, sigma_max, rho)};
    });
}

void dode_schedule_free(dode_schedule* s) {
    delete s;
}

dode_schedule_kind dode_schedule_get_kind(const dode_schedule* s) {
    return s->impl.kind() == dode::ScheduleKind::ve_karras ? DODE_SCHEDULE_VE_KARRAS
                                                           : DODE_SCHEDULE_VP_LINEAR;
}

double dode_schedule_t_min(const dode_schedule* s) {
    return s->impl.t_min();
}

double dode_schedule_t_max(const dode_schedule* s) {
    return s->impl.t_max();
}

dode_status dode_schedule_alpha_sigma(const dode_schedule* s, double t, double* alpha,
                                      double* sigma) {
    if (!s || !alpha || !sigma) return invalid_arg("null argument");
    return guarded([&] {
        auto [a, sg] = s->impl.alpha_sigma(t);
        *alpha = a;
        *sigma = sg;
    });
}

dode_status dode_schedule_log_snr(const dode_schedule* s, double t, double* tau) {
    if (!s || !tau) return invalid_arg("null argument");
    return guarded([&] { *tau = s->impl.log_snr(t); });
}

dode_status dode_schedule_inv_log_snr(const dode_schedule* s, double tau, double* t) {
    if (!s || !t) return invalid_arg("null argument");
    return guarded([&] { *t = s->impl.inv_log_snr(tau); });
}

/* ---- grids ---- */

dode_status dode_grid_create(const dode_schedule* s, int n_steps, dode_spacing spacing,
                             dode_grid** out) {
    if (!s || !out) return invalid_arg("null argument");
    return guarded([&] {
        *out = new dode_grid{dode::make_grid(s->impl, n_steps, to_spacing(spacing))};
    });
}

void dode_grid_free(dode_grid* g) {
    delete g;
}

size_t dode_grid_num_points(const dode_grid* g) {
    return g->impl.points.size();
}

dode_status dode_grid_points(const dode_grid* g, double* out) {
    if (!g || !out) return invalid_arg("null argument");
    std::memcpy(out, g->impl.points.data(), g->impl.points.size() * sizeof(double));
    return DODE_OK;
}

/* ---- oracles ---- */

dode_status dode_oracle_create_gaussian(const double* mean, size_t dim, double stddev,
                                        dode_oracle** out) {
    if (!mean || !out) return invalid_arg("null argument");
    return guarded([&] {
        *out = new dode_oracle{
            dode::DenoiserOracle::gaussian(std::vector<double>(mean, mean + dim), stddev)};
    });
}

dode_status dode_oracle_create_point_cloud(const double* points, size_t n, size_t dim,
                                           dode_oracle** out) {
    if (!points || !out) return invalid_arg("null argument");
    return guarded([&] {
        *out = new dode_oracle{dode::DenoiserOracle::point_cloud(to_batch(points, n, dim))};
    });
}

dode_status dode_oracle_create_gmm(const double* weights, const double* means,
                                   const double* stddevs, size_t n_components, size_t dim,
                                   dode_oracle** out) {
    if (!weights || !means || !stddevs || !out) return invalid_arg("null argument");
    return guarded([&] {
        std::vector<dode::GmmComponent> comps(n_components);
        for (size_t c = 0; c < n_components; ++c) {
            comps[c].weight = weights[c];
            comps[c].mean.assign(means + c * dim, means + (c + 1) * dim);
            comps[c].stddev = stddevs[c];
        }
        *out = new dode_oracle{dode::DenoiserOracle::gmm(std::move(comps))};
    });
}

void dode_oracle_free(dode_oracle* o) {
    delete o;
}

size_t dode_oracle_dim(const dode_oracle* o) {
    return o->impl.dim();
}

dode_status dode_oracle_denoise(const dode_oracle* o, const dode_schedule* s, const double* x,
                                size_t batch, double t, dode_parameterization param, double* out) {
    if (!o || !s || !x || !out) return invalid_arg("null argument");
    return guarded([&] {
        dode::Batch q = to_batch(x, batch, o->impl.dim());
        from_batch(o->impl.denoise(q, t, s->impl,
                                   param == DODE_PARAM_DATA ? dode::Parameterization::data
                                                            : dode::Parameterization::noise),
                   out);
    });
}

dode_status dode_oracle_score(const dode_oracle* o, const dode_schedule* s, const double* x,
                              size_t batch, double t, double* out) {
    if (!o || !s || !x || !out) return invalid_arg("null argument");
    return guarded([&] {
        from_batch(o->impl.score(to_batch(x, batch, o->impl.dim()), t, s->impl), out);
    });
}

dode_status dode_oracle_exact_flow_map(const dode_oracle* o, const dode_schedule* s,
                                       const double* x, size_t batch, double t_from, double t_to,
                                       double* out) {
    if (!o || !s || !x || !out) return invalid_arg("null argument");
    return guarded([&] {
        from_batch(
            o->impl.exact_flow_map(to_batch(x, batch, o->impl.dim()), t_from, t_to, s->impl), out);
    });
}

dode_status dode_oracle_sample_data(const dode_oracle* o, size_t n, uint64_t seed, double* out) {
    if (!o || !out) return invalid_arg("null argument");
    return guarded([&] {
        dode::Rng rng(seed);
        from_batch(o->impl.sample_data(n, rng), out);
    });
}

/* ---- sampling ---- */

dode_status dode_init_noise(const dode_schedule* s, size_t batch, size_t dim, uint64_t seed,
                            double* out) {
    if (!s || !out) return invalid_arg("null argument");
    return guarded(
        [&] { from_batch(dode::sample_initial_noise(s->impl, batch, dim, seed), out); });
}

dode_status dode_sample_run(dode_solver_kind kind, const dode_oracle* o, const dode_schedule* s,
                            const dode_grid* g, const double* x_init, size_t batch, int record,
                            const dode_lambda* lambdas, dode_trajectory** out) {
    if (!o || !s || !g || !x_init || !out) return invalid_arg("null argument");
    return guarded([&] {
        dode::RunOptions opts;
        opts.record = record != 0;
        opts.lambdas = lambdas ? &lambdas->impl : nullptr;
        *out = new dode_trajectory{dode::run_sampler(
            to_kind(kind), o->impl, s->impl, g->impl, to_batch(x_init, batch, o->impl.dim()),
            opts)};
    });
}

void dode_trajectory_free(dode_trajectory* t) {
    delete t;
}

size_t dode_trajectory_num_steps(const dode_trajectory* t) {
    return t->impl.times.size() - 1;
}

size_t dode_trajectory_batch(const dode_trajectory* t) {
    return t->impl.final_state().batch;
}

size_t dode_trajectory_dim(const dode_trajectory* t) {
    return t->impl.final_state().dim;
}

long dode_trajectory_nfe(const dode_trajectory* t) {
    return t->impl.nfe;
}

int dode_trajectory_recorded(const dode_trajectory* t) {
    return t->impl.recorded ? 1 : 0;
}

dode_status dode_trajectory_times(const dode_trajectory* t, double* out) {
    if (!t || !out) return invalid_arg("null argument");
    std::memcpy(out, t->impl.times.data(), t->impl.times.size() * sizeof(double));
    return DODE_OK;
}

dode_status dode_trajectory_state(const dode_trajectory* t, size_t index, double* out) {
    if (!t || !out) return invalid_arg("null argument");
    return guarded([&] {
        if (!t->impl.recorded)
            dode::fail(dode::ErrorCode::invalid, "trajectory was not recorded");
        if (index >= t->impl.states.size())
            dode::fail(dode::ErrorCode::invalid, "state index out of range");
        from_batch(t->impl.states[index], out);
    });
}

dode_status dode_trajectory_final(const dode_trajectory* t, double* out) {
    if (!t || !out) return invalid_arg("null argument");
    from_batch(t->impl.final_state(), out);
    return DODE_OK;
}

dode_status dode_trajectory_output(const dode_trajectory* t, size_t index, double* out) {
    if (!t || !out) return invalid_arg("null argument");
    return guarded([&] {
        if (index >= t->impl.steps.size())
            dode::fail(dode::ErrorCode::invalid, "step index out of range");
        from_batch(t->impl.steps[index].output, out);
    });
}

dode_status dode_trajectory_write_csv(const dode_trajectory* t, const char* path) {
    if (!t || !path) return invalid_arg("null argument");
    return guarded([&] { t->impl.write_csv(path); });
}

dode_status dode_trajectory_write_binary(const dode_trajectory* t, const char* path) {
    if (!t || !path) return invalid_arg("null argument");
    return guarded([&] { t->impl.write_binary(path); });
}

dode_status dode_trajectory_read_binary(const char* path, dode_trajectory** out) {
    if (!path || !out) return invalid_arg("null argument");
    return guarded([&] { *out = new dode_trajectory{dode::Trajectory::read_binary(path)}; });
}

/* ---- lambda schedules ---- */

dode_status dode_lambda_zero(dode_solver_kind kind, size_t steps, dode_lambda** out) {
    if (!out) return invalid_arg("null argument");
    return guarded(
        [&] { *out = new dode_lambda{dode::LambdaSchedule::zero(to_kind(kind), steps)}; });
}

dode_status dode_lambda_fixed(dode_solver_kind kind, size_t steps, double value,
                              dode_lambda** out) {
    if (!out) return invalid_arg("null argument");
    return guarded(
        [&] { *out = new dode_lambda{dode::LambdaSchedule::fixed(to_kind(kind), steps, value)}; });
}

void dode_lambda_free(dode_lambda* l) {
    delete l;
}

size_t dode_lambda_steps(const dode_lambda* l) {
    return l->impl.steps();
}

int dode_lambda_arity(const dode_lambda* l) {
    return l->impl.arity();
}

dode_status dode_lambda_kind(const dode_lambda* l, dode_solver_kind* out) {
    if (!l || !out) return invalid_arg("null argument");
    *out = from_kind(l->impl.kind);
    return DODE_OK;
}

dode_status dode_lambda_values(const dode_lambda* l, size_t step, double* out) {
    if (!l || !out) return invalid_arg("null argument");
    return guarded([&] {
        if (step >= l->impl.steps()) dode::fail(dode::ErrorCode::invalid, "step out of range");
        const auto& v = l->impl.values[step];
        std::memcpy(out, v.data(), v.size() * sizeof(double));
    });
}

dode_status dode_lambda_save_json(const dode_lambda* l, const char* path) {
    if (!l || !path) return invalid_arg("null argument");
    return guarded([&] { dode::save_lambda_json(l->impl, path); });
}

dode_status dode_lambda_load_json(const char* path, dode_lambda** out) {
    if (!path || !out) return invalid_arg("null argument");
    return guarded([&] { *out = new dode_lambda{dode::load_lambda_json(path)}; });
}

/* ---- distillation ---- */

dode_status dode_distill_run(const dode_oracle* o, const dode_schedule* s,
                             const dode_distill_params* params, dode_lambda** out_lambda,
                             dode_report** out_report) {
    if (!o || !s || !params || !out_lambda) return invalid_arg("null argument");
    return guarded([&] {
        auto [ls, report] = dode::distill(to_config(params, o), o->impl, s->impl);
        *out_lambda = new dode_lambda{std::move(ls)};
        if (out_report) *out_report = new dode_report{std::move(report)};
    });
}

void dode_report_free(dode_report* r) {
    delete r;
}

size_t dode_report_num_rows(const dode_report* r) {
    return r->impl.fits.size();
}

dode_status dode_report_row(const dode_report* r, size_t row, int* step, int* stage,
                            double* lambda, double* obj0, double* obj_star) {
    if (!r) return invalid_arg("null argument");
    return guarded([&] {
        if (row >= r->impl.fits.size()) dode::fail(dode::ErrorCode::invalid, "row out of range");
        const auto& fit = r->impl.fits[row];
        if (step) *step = fit.step;
        if (stage) *stage = fit.stage;
        if (lambda) *lambda = fit.lambda_star;
        if (obj0) *obj0 = fit.objective_zero;
        if (obj_star) *obj_star = fit.objective_star;
    });
}

int dode_report_teacher_steps(const dode_report* r) {
    return r->impl.teacher_steps;
}

int dode_report_teacher_extra_points(const dode_report* r) {
    return r->impl.teacher_extra_points;
}

double dode_report_wall_seconds(const dode_report* r) {
    return r->impl.wall_seconds;
}

dode_status dode_report_write_csv(const dode_report* r, const char* path) {
    if (!r || !path) return invalid_arg("null argument");
    return guarded([&] { r->impl.write_csv(path); });
}

dode_status dode_ablate_run(const dode_oracle* o, const dode_schedule* s,
                            const dode_distill_params* params, dode_ablation_axis axis,
                            const double* values, size_t n_values, int seeds, int eval_batch,
                            int projections, uint64_t metric_seed, const double* reference,
                            size_t reference_n, double* out_means, double* out_stds) {
    if (!o || !s || !params || !reference || !out_means || !out_stds)
        return invalid_arg("null argument");
    return guarded([&] {
        dode::AblationOptions opts;
        if (values) opts.values.assign(values, values + n_values);
        opts.seeds = seeds;
        opts.eval_batch = eval_batch;
        opts.projections = projections;
        opts.metric_seed = metric_seed;
        dode::Batch ref = to_batch(reference, reference_n, o->impl.dim());
        opts.reference = &ref;
        auto rows = dode::ablate(to_config(params, o),
                                 axis == DODE_AXIS_SCALE ? dode::AblationAxis::scale
                                                         : dode::AblationAxis::batch,
                                 opts, o->impl, s->impl);
        for (size_t i = 0; i < rows.size(); ++i) {
            out_means[i] = rows[i].mean;
            out_stds[i] = rows[i].stddev;
        }
    });
}

dode_status dode_fixed_lambda_search(dode_solver_kind kind, const dode_oracle* o,
                                     const dode_schedule* s, const dode_grid* g,
                                     const double* x_init, size_t batch,
                                     const double* lambda_grid, size_t n_lambda,
                                     const double* reference, size_t reference_n, int projections,
                                     uint64_t metric_seed, double* out_best, double* out_curve) {
    if (!o || !s || !g || !x_init || !lambda_grid || !reference || !out_best)
        return invalid_arg("null argument");
    return guarded([&] {
        dode::Batch ref = to_batch(reference, reference_n, o->impl.dim());
        auto metric = [&](const dode::Batch& endpoint) {
            return dode::sliced_wasserstein(endpoint, ref, projections, metric_seed);
        };
        auto res = dode::fixed_lambda_search(
            to_kind(kind), o->impl, s->impl, g->impl, to_batch(x_init, batch, o->impl.dim()),
            std::vector<double>(lambda_grid, lambda_grid + n_lambda), metric);
        *out_best = res.lambda_best;
        if (out_curve)
            for (size_t i = 0; i < res.curve.size(); ++i) out_curve[i] = res.curve[i].second;
    });
}

/* ---- analysis ---- */

dode_status dode_cosine_matrix(const dode_trajectory* t, double* out, int* zero_flag) {
    if (!t || !out) return invalid_arg("null argument");
    return guarded([&] {
        dode::CosineMatrix m = dode::cosine_similarity_matrix(t->impl);
        std::memcpy(out, m.values.data(), m.values.size() * sizeof(double));
        if (zero_flag) *zero_flag = m.zero_norm_flag ? 1 : 0;
    });
}

dode_status dode_norm_trace(const dode_trajectory* t, double* out) {
    if (!t || !out) return invalid_arg("null argument");
    return guarded([&] {
        auto trace = dode::norm_trace(t->impl);
        std::memcpy(out, trace.data(), trace.size() * sizeof(double));
    });
}

dode_status dode_coordinate_trace(const dode_trajectory* t, size_t sample, size_t coord_a,
                                  size_t coord_b, double* out) {
    if (!t || !out) return invalid_arg("null argument");
    return guarded([&] {
        auto trace = dode::coordinate_trace(t->impl, sample, coord_a, coord_b);
        for (size_t i = 0; i < trace.size(); ++i) {
            out[2 * i] = trace[i][0];
            out[2 * i + 1] = trace[i][1];
        }
    });
}

dode_status dode_sliced_wasserstein(const double* a, size_t n_a, const double* b, size_t n_b,
                                    size_t dim, int n_projections, uint64_t seed, double* out) {
    if (!a || !b || !out) return invalid_arg("null argument");
    return guarded([&] {
        *out = dode::sliced_wasserstein(to_batch(a, n_a, dim), to_batch(b, n_b, dim),
                                        n_projections, seed);
    });
}

dode_status dode_convergence_order(const double* steps, const double* errors, size_t n,
                                   double* out) {
    if (!steps || !errors || !out) return invalid_arg("null argument");
    return guarded([&] {
        std::vector<std::pair<double, double>> pts(n);
        for (size_t i = 0; i < n; ++i) pts[i] = {steps[i], errors[i]};
        *out = dode::convergence_order(pts);
    });
}

} /* extern "C" */

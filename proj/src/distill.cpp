#include "distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "analysis.hpp"

namespace dode {

SolverKind default_teacher(SolverKind student) {
    switch (student) {
        case SolverKind::ipndm:
        case SolverKind::deis0:
        case SolverKind::deis1:
        case SolverKind::deis2:
        case SolverKind::deis3: return student;
        case SolverKind::ddim_data:
        case SolverKind::edm_heun: return SolverKind::ddim_data;
        default: return SolverKind::ddim_noise;
    }
}

void DistillReport::write_csv(const std::string& path) const {
    FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail(ErrorCode::io, "cannot open " + path + " for writing");
    std::fprintf(f, "step,stage,lambda,obj0,obj_star\n");
    for (const auto& fit : fits)
        std::fprintf(f, "%d,%d,%.17g,%.17g,%.17g\n", fit.step, fit.stage, fit.lambda_star,
                     fit.objective_zero, fit.objective_star);
    std::fclose(f);
}

double fit_lambda(const Batch& target, const Batch& a, const Batch& b, double* objective_zero,
                  double* objective_star) {
    check_same_shape(target, a, "fit_lambda");
    check_same_shape(target, b, "fit_lambda");
    if (!a.all_finite() || !b.all_finite())
        fail(ErrorCode::numeric, "fit_lambda: non-finite student prediction");
    double num = 0.0, den = 0.0, obj0 = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        double r = target.data[i] - a.data[i];
        num += r * b.data[i];
        den += b.data[i] * b.data[i];
        obj0 += r * r;
    }
    double lambda = den < 1e-20 ? 0.0 : num / den;
    if (objective_zero) *objective_zero = obj0;
    if (objective_star) {
        double obj = 0.0;
        for (size_t i = 0; i < target.size(); ++i) {
            double r = target.data[i] - a.data[i] - lambda * b.data[i];
            obj += r * r;
        }
        *objective_star = obj;
    }
    return lambda;
}

namespace {

constexpr long kMaxTeacherSteps = 1000000;

void validate_config(const DistillConfig& cfg) {
    if (cfg.scale_c < 1) fail(ErrorCode::config, "scale C must be >= 1");
    if (cfg.student_steps < 1) fail(ErrorCode::config, "student steps T must be >= 1");
    if (cfg.batch < 1) fail(ErrorCode::config, "batch |B| must be >= 1");
    if (cfg.fit_batches < 1) fail(ErrorCode::config, "fit_batches must be >= 1");
    if (cfg.dim == 0) fail(ErrorCode::config, "sample dimension must be set");
    if (long(cfg.scale_c) * cfg.student_steps > kMaxTeacherSteps)
        fail(ErrorCode::config, "C*T exceeds the resolvable teacher step budget");
    bool self_taught = cfg.teacher == cfg.student && cfg.scale_c == 1;
    if (solver_is_multistage(cfg.student)) {
        if (cfg.scale_c % 2 != 0 && !self_taught)
            fail(ErrorCode::config, "multi-stage students need an even scale C");
        if (cfg.student == SolverKind::dpm3 && cfg.student_steps < 2)
            fail(ErrorCode::config, "dpm3 distillation needs at least two student steps");
    }
    if (solver_is_multistage(cfg.teacher) && !self_taught)
        fail(ErrorCode::config,
             "multi-stage teachers are only supported as self-teachers with C = 1");
    if (solver_schedule_kind(cfg.teacher) != solver_schedule_kind(cfg.student))
        fail(ErrorCode::config, "teacher and student require different schedule kinds");
}

// Target time of stage k of a student step t -> t_next.
double stage_target_time(SolverKind kind, const NoiseSchedule& sched, double t, double t_next,
                         int stage) {
    if (kind == SolverKind::dpm2 && stage == 0) return dpm2_mid_time(sched, t, t_next);
    if (kind == SolverKind::dpm3 && stage < 2) {
        auto [s1, s2] = dpm3_stage_times(sched, t, t_next);
        return stage == 0 ? s1 : s2;
    }
    return t_next;  // final stage; EDM's predictor also lands on t_next
}

// Stage-k state of a step outcome: inner stages come from the record, the
// last stage is the post-step state.
const Batch& stage_state(const StepResult& res, int stage, int active_stages) {
    if (stage + 1 < active_stages) return res.record.stages[size_t(stage)].state;
    return res.state.x;
}

}  // namespace

TimeGrid student_grid(const DistillConfig& cfg, const NoiseSchedule& sched) {
    return make_grid(sched, cfg.student_steps, cfg.spacing);
}

TimeGrid teacher_grid(const DistillConfig& cfg, const NoiseSchedule& sched, int* extra_points) {
    TimeGrid grid = make_grid(sched, cfg.scale_c * cfg.student_steps, cfg.spacing);
    int extra = 0;
    if (solver_is_multistage(cfg.student) && !solver_is_multistage(cfg.teacher)) {
        TimeGrid sg = student_grid(cfg, sched);
        std::vector<double> stage_times = interior_stage_times(cfg.student, sched, sg);
        for (double ts : stage_times) {
            auto pos = std::lower_bound(grid.points.begin(), grid.points.end(), ts,
                                        [](double a, double b) { return a > b; });
            bool duplicate = (pos != grid.points.end() && std::abs(*pos - ts) <= 1e-12) ||
                             (pos != grid.points.begin() && std::abs(*(pos - 1) - ts) <= 1e-12);
            if (!duplicate) {
                grid.points.insert(pos, ts);
                ++extra;
            }
        }
    }
    if (extra_points) *extra_points = extra;
    return grid;
}

Trajectory teacher_targets(const DistillConfig& cfg, const DenoiserOracle& oracle,
                           const NoiseSchedule& sched) {
    validate_config(cfg);
    if (oracle.dim() != cfg.dim) fail(ErrorCode::config, "oracle dimension mismatch");
    TimeGrid tg = teacher_grid(cfg, sched);
    Batch x_init = sample_initial_noise(sched, size_t(cfg.batch), cfg.dim, cfg.seed);
    RunOptions opts;
    opts.record = true;
    return run_sampler(cfg.teacher, oracle, sched, tg, x_init, opts);
}

std::pair<LambdaSchedule, DistillReport> distill(const DistillConfig& cfg,
                                                 const DenoiserOracle& oracle,
                                                 const NoiseSchedule& sched) {
    validate_config(cfg);
    if (oracle.dim() != cfg.dim) fail(ErrorCode::config, "oracle dimension mismatch");
    check_solver_schedule(cfg.student, sched);
    check_solver_schedule(cfg.teacher, sched);
    auto t_start = std::chrono::steady_clock::now();

    DistillReport report;
    TimeGrid tg = teacher_grid(cfg, sched, &report.teacher_extra_points);
    report.teacher_steps = cfg.scale_c * cfg.student_steps;
    TimeGrid sg = student_grid(cfg, sched);

    size_t n_fit = size_t(cfg.fit_batches);
    std::vector<Trajectory> teachers(n_fit);
    std::vector<SolverState> students(n_fit);
    RunOptions teacher_opts;
    teacher_opts.record = true;
    for (size_t m = 0; m < n_fit; ++m) {
        Batch x_init = sample_initial_noise(sched, size_t(cfg.batch), cfg.dim, cfg.seed + uint64_t(m));
        teachers[m] =
            run_sampler(cfg.teacher, oracle, sched, tg, x_init, teacher_opts);
        students[m].x = x_init;
        students[m].x_init = std::move(x_init);
    }

    int arity = solver_stage_count(cfg.student);
    LambdaSchedule ls;
    ls.kind = cfg.student;
    ls.mode = LambdaMode::fitted;
    ls.provenance = {solver_kind_name(cfg.teacher), cfg.scale_c, cfg.batch, cfg.seed};
    ls.values.assign(size_t(cfg.student_steps), std::vector<double>(size_t(arity), 0.0));

    size_t n_steps = sg.steps();
    for (size_t i = 0; i < n_steps; ++i) {
        double t = sg.points[i], t_next = sg.points[i + 1];
        bool final_interval = (i + 1 == n_steps);
        // EDM's last step has no correction stage to fit.
        int active_stages =
            (cfg.student == SolverKind::edm_heun && final_interval) ? 1 : arity;
        StageLambdas lam;
        lam.active = true;
        for (int stage = 0; stage < active_stages; ++stage) {
            double target_time = stage_target_time(cfg.student, sched, t, t_next, stage);
            double num = 0.0, den = 0.0, obj0 = 0.0;
            std::vector<std::pair<Batch, Batch>> ab(n_fit);  // (a, b) per batch
            for (size_t m = 0; m < n_fit; ++m) {
                const Batch* target = teachers[m].state_at(target_time);
                if (!target)
                    fail(ErrorCode::config, "stage time " + std::to_string(target_time) +
                                                " is absent from the teacher grid");
                lam.v[size_t(stage)] = 0.0;
                StepResult r0 = make_step(cfg.student, students[m], oracle, sched, t,
                                          t_next, lam, final_interval);
                lam.v[size_t(stage)] = 1.0;
                StepResult r1 = make_step(cfg.student, students[m], oracle, sched, t,
                                          t_next, lam, final_interval);
                Batch a = stage_state(r0, stage, active_stages);
                const Batch& s1 = stage_state(r1, stage, active_stages);
                Batch b(a.batch, a.dim);
                for (size_t k = 0; k < a.size(); ++k) b.data[k] = s1.data[k] - a.data[k];
                if (!a.all_finite() || !b.all_finite())
                    fail(ErrorCode::numeric,
                         "non-finite student prediction at step " + std::to_string(i));
                for (size_t k = 0; k < a.size(); ++k) {
                    double r = target->data[k] - a.data[k];
                    num += r * b.data[k];
                    den += b.data[k] * b.data[k];
                    obj0 += r * r;
                }
                ab[m] = {std::move(a), std::move(b)};
            }
            double lambda = den < 1e-20 ? 0.0 : num / den;
            double obj_star = 0.0;
            for (size_t m = 0; m < n_fit; ++m) {
                const Batch* target = teachers[m].state_at(target_time);
                const auto& [a, b] = ab[m];
                for (size_t k = 0; k < a.size(); ++k) {
                    double r = target->data[k] - a.data[k] - lambda * b.data[k];
                    obj_star += r * r;
                }
            }
            lam.v[size_t(stage)] = lambda;
            ls.values[i][size_t(stage)] = lambda;
            report.fits.push_back(StepFit{int(i), stage, lambda, obj0, obj_star});
        }
        for (size_t m = 0; m < n_fit; ++m) {
            StepResult adv =
                make_step(cfg.student, students[m], oracle, sched, t, t_next, lam,
                          final_interval);
            students[m] = std::move(adv.state);
            students[m].step_index = int(i) + 1;
        }
    }

    report.student_final = students[0].x;
    report.teacher_final = teachers[0].final_state();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(ls), std::move(report)};
}

std::vector<Batch> sample_with_schedule(const DistillConfig& cfg, const LambdaSchedule& ls,
                                        const DenoiserOracle& oracle, const NoiseSchedule& sched,
                                        int n_batches) {
    validate_config(cfg);
    ls.validate();
    if (ls.kind != cfg.student) fail(ErrorCode::config, "lambda schedule kind mismatch");
    if (ls.steps() != size_t(cfg.student_steps))
        fail(ErrorCode::config, "lambda schedule length does not match student steps");
    TimeGrid sg = student_grid(cfg, sched);
    RunOptions opts;
    opts.lambdas = &ls;
    std::vector<Batch> out;
    out.reserve(size_t(n_batches));
    for (int m = 0; m < n_batches; ++m) {
        Batch x_init =
            sample_initial_noise(sched, size_t(cfg.batch), cfg.dim, cfg.seed + uint64_t(m));
        Trajectory traj = run_sampler(cfg.student, oracle, sched, sg, x_init, opts);
        out.push_back(traj.final_state());
    }
    return out;
}

const char* ablation_axis_name(AblationAxis axis) {
    return axis == AblationAxis::scale ? "scale" : "batch";
}

std::vector<AblationRow> ablate(const DistillConfig& cfg, AblationAxis axis,
                                const AblationOptions& opts, const DenoiserOracle& oracle,
                                const NoiseSchedule& sched) {
    if (!opts.reference) fail(ErrorCode::invalid, "ablate needs a reference batch");
    if (opts.seeds < 1) fail(ErrorCode::invalid, "ablate needs at least one seed");
    std::vector<double> values = opts.values;
    if (values.empty())
        values = axis == AblationAxis::scale ? std::vector<double>{5, 10, 20, 30}
                                             : std::vector<double>{5, 10, 50, 100};
    std::vector<AblationRow> rows;
    for (double v : values) {
        if (v < 1 || v != std::floor(v))
            fail(ErrorCode::config, "ablation values must be positive integers");
        std::vector<double> metrics;
        for (int s = 0; s < opts.seeds; ++s) {
            DistillConfig run_cfg = cfg;
            run_cfg.seed = cfg.seed + uint64_t(s);
            if (axis == AblationAxis::scale)
                run_cfg.scale_c = int(v);
            else
                run_cfg.batch = int(v);
            auto [ls, report] = distill(run_cfg, oracle, sched);
            // held-out evaluation batch, shared across rows and seeds so the
            // row spread isolates the fit variability
            DistillConfig eval_cfg = run_cfg;
            eval_cfg.batch = opts.eval_batch;
            eval_cfg.seed = cfg.seed + 9000;
            std::vector<Batch> finals = sample_with_schedule(eval_cfg, ls, oracle, sched, 1);
            metrics.push_back(sliced_wasserstein(finals[0], *opts.reference, opts.projections,
                                                 opts.metric_seed));
        }
        double mean = 0.0;
        for (double m : metrics) mean += m;
        mean /= double(metrics.size());
        double var = 0.0;
        for (double m : metrics) var += (m - mean) * (m - mean);
        double stddev = metrics.size() > 1 ? std::sqrt(var / double(metrics.size() - 1)) : 0.0;
        rows.push_back(AblationRow{v, mean, stddev});
    }
    return rows;
}

}  // namespace dode

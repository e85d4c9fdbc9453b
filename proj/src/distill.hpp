#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dode_transform.hpp"

namespace dode {

struct DistillConfig {
    SolverKind teacher = SolverKind::ddim_noise;
    SolverKind student = SolverKind::ddim_noise;
    int scale_c = 10;
    int student_steps = 10;  // T
    int batch = 100;         // |B|
    uint64_t seed = 0;
    size_t dim = 0;  // sample dimension; must match the oracle
    GridSpacing spacing = GridSpacing::uniform_t;
    int fit_batches = 1;  // >1 pools the per-step least squares across batches
};

// iPNDM and DEIS teach themselves; everything else is taught by DDIM in the
// matching parameterization.
SolverKind default_teacher(SolverKind student);

struct StepFit {
    int step = 0;
    int stage = 0;
    double lambda_star = 0;
    double objective_zero = 0;
    double objective_star = 0;
};

struct DistillReport {
    std::vector<StepFit> fits;
    int teacher_steps = 0;        // uniform teacher grid intervals (C*T)
    int teacher_extra_points = 0; // student stage times merged into the teacher grid
    double wall_seconds = 0;
    Batch student_final;          // fitting batch endpoint after the last fitted step
    Batch teacher_final;          // teacher endpoint for the same batch

    void write_csv(const std::string& path) const;  // step,stage,lambda,obj0,obj_star
};

// Closed-form scalar least squares for target ~ a + lambda*b, summed over the
// batch. Degenerate directions (sum ||b||^2 < 1e-20) give lambda = 0.
double fit_lambda(const Batch& target, const Batch& a, const Batch& b,
                  double* objective_zero = nullptr, double* objective_star = nullptr);

// Teacher grid: C*T uniform (or karras) intervals, augmented with the
// student's interior stage times when the student is multi-stage and the
// teacher single-stage, so every fitting target exists at an exact time.
TimeGrid teacher_grid(const DistillConfig& cfg, const NoiseSchedule& sched, int* extra_points = nullptr);

TimeGrid student_grid(const DistillConfig& cfg, const NoiseSchedule& sched);

// Recorded teacher trajectory from the shared initial noise.
Trajectory teacher_targets(const DistillConfig& cfg, const DenoiserOracle& oracle,
                           const NoiseSchedule& sched);

// Sequential per-step (and per-stage, inner first) lambda fitting against the
// teacher trajectory; the student advances with each fitted value before the
// next fit.
std::pair<LambdaSchedule, DistillReport> distill(const DistillConfig& cfg,
                                                 const DenoiserOracle& oracle,
                                                 const NoiseSchedule& sched);

// Frozen-schedule sampling; batch m draws its noise from seed cfg.seed + m.
std::vector<Batch> sample_with_schedule(const DistillConfig& cfg, const LambdaSchedule& ls,
                                        const DenoiserOracle& oracle, const NoiseSchedule& sched,
                                        int n_batches);

enum class AblationAxis { scale, batch };

struct AblationOptions {
    std::vector<double> values;  // empty: {5,10,20,30} for scale, {5,10,50,100} for batch
    int seeds = 3;
    int eval_batch = 512;
    int projections = 128;
    uint64_t metric_seed = 99;
    const Batch* reference = nullptr;  // data reference for the quality metric
};

struct AblationRow {
    double value = 0;
    double mean = 0;
    double stddev = 0;
};

// Repeats distill + held-out evaluation along one axis; the metric is the
// sliced Wasserstein distance between generated endpoints and the reference.
std::vector<AblationRow> ablate(const DistillConfig& cfg, AblationAxis axis,
                                const AblationOptions& opts, const DenoiserOracle& oracle,
                                const NoiseSchedule& sched);

const char* ablation_axis_name(AblationAxis axis);

}  // namespace dode

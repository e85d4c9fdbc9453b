#pragma once

#include <array>
#include <optional>
#include <string>

#include "denoiser.hpp"
#include "schedule.hpp"
#include "trajectory.hpp"

namespace dode {

struct LambdaSchedule;  // dode_transform.hpp

enum class SolverKind {
    ddim_noise,
    ddim_data,
    ipndm,
    dpm1,
    dpm2,
    dpm3,
    deis0,
    deis1,
    deis2,
    deis3,
    edm_heun,
};

constexpr std::array<SolverKind, 11> kAllSolverKinds = {
    SolverKind::ddim_noise, SolverKind::ddim_data, SolverKind::ipndm, SolverKind::dpm1,
    SolverKind::dpm2,       SolverKind::dpm3,      SolverKind::deis0, SolverKind::deis1,
    SolverKind::deis2,      SolverKind::deis3,     SolverKind::edm_heun,
};

const char* solver_kind_name(SolverKind kind);
std::optional<SolverKind> solver_kind_from_name(const std::string& name);
int solver_stage_count(SolverKind kind);   // per-step lambda arity
bool solver_is_multistage(SolverKind kind);
int deis_order(SolverKind kind);           // -1 when not a DEIS kind
Parameterization solver_parameterization(SolverKind kind);
ScheduleKind solver_schedule_kind(SolverKind kind);
void check_solver_schedule(SolverKind kind, const NoiseSchedule& sched);

// Adams-Bashforth-style warm-up weights used by iPNDM, as exact rationals.
// Row p holds the p+1 weights applied to [d_t, d_{t+1}, ..., d_{t+p}].
struct RationalCoeff {
    long num, den;
};
extern const std::array<std::array<RationalCoeff, 4>, 4> kIpndmCoefficients;

struct HistoryEntry {
    double time = 0;
    Batch output;
};

// Mutable per-run state. `history` holds raw denoising outputs, most recent
// first, timesteps increasing with depth. `prev_combined` is the previous
// step's composite output, the anchor for the distilled-output transform;
// `x_init` stands in for it at the first step.
struct SolverState {
    Batch x;
    int step_index = 0;
    std::vector<HistoryEntry> history;  // capped at 4
    std::optional<Batch> prev_combined;
    Batch x_init;
    long nfe = 0;
};

struct StageLambdas {
    std::array<double, 3> v{0.0, 0.0, 0.0};
    bool active = false;  // false: plain solver step, no transform applied
};

struct StepResult {
    SolverState state;
    StepRecord record;
};

// One composite step from t down to t_next. `final_interval` marks the last
// grid interval (EDM-Heun drops its correction stage there).
StepResult make_step(SolverKind kind, const SolverState& state, const DenoiserOracle& oracle,
                     const NoiseSchedule& sched, double t, double t_next,
                     const StageLambdas& lambdas, bool final_interval);

// Exponential-integrator quadrature coefficients C_j for the polynomial term
// sum_j C_j d(node_j); node_times[0] is the current time, the rest are history
// times in increasing order. Composite trapezoid with 256 sub-intervals in the
// noise-to-signal variable u = sigma/alpha, which makes the r=0 coefficient
// reduce to sigma_next - (alpha_next/alpha_t) sigma_t up to rounding.
std::vector<double> deis_coefficients(const NoiseSchedule& sched, double t, double t_next,
                                      const std::vector<double>& node_times);

// Stage times a run visits strictly inside grid intervals (DPM2 log-SNR
// midpoints, DPM3 log-SNR thirds); empty for other kinds.
std::vector<double> interior_stage_times(SolverKind kind, const NoiseSchedule& sched,
                                         const TimeGrid& grid);
double dpm2_mid_time(const NoiseSchedule& sched, double t, double t_next);
std::pair<double, double> dpm3_stage_times(const NoiseSchedule& sched, double t, double t_next);

struct RunOptions {
    bool record = false;
    const LambdaSchedule* lambdas = nullptr;  // null: base solver
};

Trajectory run_sampler(SolverKind kind, const DenoiserOracle& oracle, const NoiseSchedule& sched,
                       const TimeGrid& grid, const Batch& x_init, const RunOptions& opts = {});

// Canonical initial noise: N(0, I) for vp-linear, N(0, sigma_max^2 I) for
// ve-karras. Teacher, student and CLI all derive x_T through this.
Batch sample_initial_noise(const NoiseSchedule& sched, size_t batch, size_t dim, uint64_t seed);

}  // namespace dode

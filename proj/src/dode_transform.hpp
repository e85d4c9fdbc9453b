#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "solvers.hpp"

namespace dode {

// O = d + lambda * (d - prev): the single-parameter distilled output.
Batch combine(const Batch& d, const Batch& prev, double lambda);
// First-step variant: the initial noise stands in for the missing previous output.
Batch combine_initial(const Batch& d, const Batch& x_init, double lambda);

enum class LambdaMode { fitted, fixed, zero };

struct LambdaProvenance {
    std::string teacher;
    int scale_c = 0;
    int batch = 0;
    uint64_t seed = 0;
};

// Per-student-step stage weights driving a distilled solver run.
struct LambdaSchedule {
    SolverKind kind = SolverKind::ddim_noise;
    LambdaMode mode = LambdaMode::zero;
    double fixed_value = 0.0;
    std::vector<std::vector<double>> values;  // [step][stage]
    LambdaProvenance provenance;

    size_t steps() const { return values.size(); }
    int arity() const { return solver_stage_count(kind); }

    static LambdaSchedule zero(SolverKind kind, size_t steps);
    static LambdaSchedule fixed(SolverKind kind, size_t steps, double value);
    void validate() const;
};

const char* lambda_mode_name(LambdaMode mode);

std::string lambda_to_json(const LambdaSchedule& ls);
LambdaSchedule lambda_from_json(const std::string& text);
void save_lambda_json(const LambdaSchedule& ls, const std::string& path);
LambdaSchedule load_lambda_json(const std::string& path);

// Alternative output formulations evaluated on the DDIM base (ablation only;
// they are excluded from the default pipelines).
//   standard: O = d + w0 (d - d_prev)
//   sep:      O = w0 d + w1 d_prev
//   all:      O = sum_k w_k d_k over every output seen so far (current first)
//   two_term: O = d + w0 (d - d_prev) + w1 (d - d_prev2)
enum class DOdeFormulation { standard, sep, all, two_term };

// weights[i] holds step i's parameters: 1 for standard, 2 for sep/two_term,
// i+1 for all. two_term degrades to standard until two previous outputs exist.
Trajectory run_ddim_alt(DOdeFormulation form, const DenoiserOracle& oracle,
                        const NoiseSchedule& sched, const TimeGrid& grid, const Batch& x_init,
                        const std::vector<std::vector<double>>& weights, bool record = false);

struct FixedLambdaSearch {
    double lambda_best = 0.0;
    std::vector<std::pair<double, double>> curve;  // (lambda, metric)
};

// Evaluates a scalar sample-quality metric on the endpoint of a constant-
// lambda distilled run for every candidate and returns the argmin.
FixedLambdaSearch fixed_lambda_search(SolverKind kind, const DenoiserOracle& oracle,
                                      const NoiseSchedule& sched, const TimeGrid& grid,
                                      const Batch& x_init, const std::vector<double>& lambda_grid,
                                      const std::function<double(const Batch&)>& metric);

}  // namespace dode

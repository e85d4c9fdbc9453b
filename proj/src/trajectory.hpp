#pragma once

#include <string>
#include <vector>

#include "batch.hpp"

namespace dode {

struct StageRecord {
    double time = 0;
    Batch state;   // intermediate solver state at `time`
    Batch output;  // denoising output evaluated there
};

struct StepRecord {
    double t_from = 0, t_to = 0;
    Batch output;                     // first denoising output of the step (at t_from)
    std::vector<StageRecord> stages;  // inner stages of multi-stage steps
};

// Recorded sampling run: states at every grid time plus per-step outputs.
// When not recorded, only the final state is kept.
struct Trajectory {
    std::vector<double> times;      // grid times, size K+1
    std::vector<Batch> states;      // size K+1 when recorded, else {final}
    std::vector<StepRecord> steps;  // size K when recorded
    bool recorded = false;
    long nfe = 0;

    const Batch& final_state() const { return states.back(); }

    // Exact-time lookup over grid times and inner stage times; null when the
    // time is not present within `tol`. Requires a recorded trajectory.
    const Batch* state_at(double time, double tol = 1e-12) const;

    void write_csv(const std::string& path) const;
    void write_binary(const std::string& path) const;
    static Trajectory read_binary(const std::string& path);
};

}  // namespace dode

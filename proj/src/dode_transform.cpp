#include "dode_transform.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dode {

Batch combine(const Batch& d, const Batch& prev, double lambda) {
    check_same_shape(d, prev, "combine");
    Batch out(d.batch, d.dim);
    for (size_t i = 0; i < d.size(); ++i)
        out.data[i] = d.data[i] + lambda * (d.data[i] - prev.data[i]);
    return out;
}

Batch combine_initial(const Batch& d, const Batch& x_init, double lambda) {
    return combine(d, x_init, lambda);
}

LambdaSchedule LambdaSchedule::zero(SolverKind kind, size_t steps) {
    LambdaSchedule ls;
    ls.kind = kind;
    ls.mode = LambdaMode::zero;
    ls.values.assign(steps, std::vector<double>(size_t(solver_stage_count(kind)), 0.0));
    return ls;
}

LambdaSchedule LambdaSchedule::fixed(SolverKind kind, size_t steps, double value) {
    LambdaSchedule ls;
    ls.kind = kind;
    ls.mode = LambdaMode::fixed;
    ls.fixed_value = value;
    ls.values.assign(steps, std::vector<double>(size_t(solver_stage_count(kind)), value));
    return ls;
}

void LambdaSchedule::validate() const {
    size_t ar = size_t(arity());
    for (const auto& v : values) {
        if (v.size() != ar) fail(ErrorCode::config, "lambda schedule stage arity mismatch");
        for (double x : v) {
            if (!std::isfinite(x)) fail(ErrorCode::config, "lambda schedule has non-finite values");
            if (mode == LambdaMode::zero && x != 0.0)
                fail(ErrorCode::config, "zero-mode lambda schedule has nonzero entries");
        }
    }
}

const char* lambda_mode_name(LambdaMode mode) {
    switch (mode) {
        case LambdaMode::fitted: return "fitted";
        case LambdaMode::fixed: return "fixed";
        case LambdaMode::zero: return "zero";
    }
    return "?";
}

std::string lambda_to_json(const LambdaSchedule& ls) {
    nlohmann::ordered_json j;
    j["solver"] = solver_kind_name(ls.kind);
    j["mode"] = lambda_mode_name(ls.mode);
    j["fixed_value"] = ls.fixed_value;
    j["teacher"] = ls.provenance.teacher;
    j["scale_c"] = ls.provenance.scale_c;
    j["batch"] = ls.provenance.batch;
    j["seed"] = ls.provenance.seed;
    j["values"] = ls.values;
    return j.dump(2) + "\n";
}

LambdaSchedule lambda_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorCode::io, std::string("lambda schedule JSON parse error: ") + e.what());
    }
    LambdaSchedule ls;
    auto kind = solver_kind_from_name(j.at("solver").get<std::string>());
    if (!kind) fail(ErrorCode::config, "lambda schedule names an unknown solver kind");
    ls.kind = *kind;
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "fitted")
        ls.mode = LambdaMode::fitted;
    else if (mode == "fixed")
        ls.mode = LambdaMode::fixed;
    else if (mode == "zero")
        ls.mode = LambdaMode::zero;
    else
        fail(ErrorCode::config, "lambda schedule names an unknown mode");
    ls.fixed_value = j.at("fixed_value").get<double>();
    ls.provenance.teacher = j.at("teacher").get<std::string>();
    ls.provenance.scale_c = j.at("scale_c").get<int>();
    ls.provenance.batch = j.at("batch").get<int>();
    ls.provenance.seed = j.at("seed").get<uint64_t>();
    ls.values = j.at("values").get<std::vector<std::vector<double>>>();
    ls.validate();
    return ls;
}

void save_lambda_json(const LambdaSchedule& ls, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::io, "cannot open " + path + " for writing");
    f << lambda_to_json(ls);
    if (!f) fail(ErrorCode::io, "write failure on " + path);
}

LambdaSchedule load_lambda_json(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::io, "cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return lambda_from_json(ss.str());
}

Trajectory run_ddim_alt(DOdeFormulation form, const DenoiserOracle& oracle,
                        const NoiseSchedule& sched, const TimeGrid& grid, const Batch& x_init,
                        const std::vector<std::vector<double>>& weights, bool record) {
    check_solver_schedule(SolverKind::ddim_noise, sched);
    size_t n_steps = grid.steps();
    if (weights.size() != n_steps)
        fail(ErrorCode::config, "alt-formulation weights length does not match the grid");

    Trajectory out;
    out.times = grid.points;
    out.recorded = record;
    if (record) out.states.push_back(x_init);

    Batch x = x_init;
    std::vector<Batch> outputs;  // most recent first
    for (size_t i = 0; i < n_steps; ++i) {
        double t = grid.points[i], t_next = grid.points[i + 1];
        auto [a_t, s_t] = sched.alpha_sigma(t);
        auto [a_n, s_n] = sched.alpha_sigma(t_next);
        Batch d = oracle.denoise(x, t, sched, Parameterization::noise);
        const auto& w = weights[i];
        const Batch& prev1 = outputs.empty() ? x_init : outputs.front();
        Batch o(d.batch, d.dim);
        switch (form) {
            case DOdeFormulation::standard: {
                if (w.size() != 1) fail(ErrorCode::config, "standard formulation takes 1 weight");
                o = combine(d, prev1, w[0]);
                break;
            }
            case DOdeFormulation::sep: {
                if (w.size() != 2) fail(ErrorCode::config, "sep formulation takes 2 weights");
                for (size_t k = 0; k < d.size(); ++k)
                    o.data[k] = w[0] * d.data[k] + w[1] * prev1.data[k];
                break;
            }
            case DOdeFormulation::all: {
                if (w.size() != outputs.size() + 1)
                    fail(ErrorCode::config, "all formulation takes one weight per seen output");
                for (size_t k = 0; k < d.size(); ++k) {
                    double v = w[0] * d.data[k];
                    for (size_t j = 0; j < outputs.size(); ++j)
                        v += w[j + 1] * outputs[j].data[k];
                    o.data[k] = v;
                }
                break;
            }
            case DOdeFormulation::two_term: {
                if (w.size() != 2) fail(ErrorCode::config, "two-term formulation takes 2 weights");
                o = combine(d, prev1, w[0]);
                if (outputs.size() >= 2) {  // else degrade to the standard form
                    const Batch& prev2 = outputs[1];
                    for (size_t k = 0; k < d.size(); ++k)
                        o.data[k] += w[1] * (d.data[k] - prev2.data[k]);
                }
                break;
            }
        }
        Batch x_next(x.batch, x.dim);
        for (size_t k = 0; k < x.size(); ++k)
            x_next.data[k] = a_n * ((x.data[k] - s_t * o.data[k]) / a_t) + s_n * o.data[k];
        x = std::move(x_next);
        if (record) {
            out.states.push_back(x);
            StepRecord rec;
            rec.t_from = t;
            rec.t_to = t_next;
            rec.output = d;
            out.steps.push_back(std::move(rec));
        }
        outputs.insert(outputs.begin(), std::move(d));
        out.nfe += 1;
    }
    if (!record) out.states.push_back(std::move(x));
    return out;
}

FixedLambdaSearch fixed_lambda_search(SolverKind kind, const DenoiserOracle& oracle,
                                      const NoiseSchedule& sched, const TimeGrid& grid,
                                      const Batch& x_init, const std::vector<double>& lambda_grid,
                                      const std::function<double(const Batch&)>& metric) {
    if (lambda_grid.empty()) fail(ErrorCode::invalid, "fixed_lambda_search needs candidates");
    if (solver_stage_count(kind) != 1)
        fail(ErrorCode::config, "fixed_lambda_search supports single-stage solvers only");
    FixedLambdaSearch res;
    double best = HUGE_VAL;
    for (double lam : lambda_grid) {
        LambdaSchedule ls = LambdaSchedule::fixed(kind, grid.steps(), lam);
        RunOptions opts;
        opts.lambdas = &ls;
        Trajectory traj = run_sampler(kind, oracle, sched, grid, x_init, opts);
        double value = metric(traj.final_state());
        res.curve.emplace_back(lam, value);
        if (value < best) {
            best = value;
            res.lambda_best = lam;
        }
    }
    return res;
}

}  // namespace dode

#include "solvers.hpp"

#include <algorithm>
#include <cmath>

#include "dode_transform.hpp"
#include "rng.hpp"

namespace dode {

const char* solver_kind_name(SolverKind kind) {
    switch (kind) {
        case SolverKind::ddim_noise: return "ddim-noise";
        case SolverKind::ddim_data: return "ddim-data";
        case SolverKind::ipndm: return "ipndm";
        case SolverKind::dpm1: return "dpm1";
        case SolverKind::dpm2: return "dpm2";
        case SolverKind::dpm3: return "dpm3";
        case SolverKind::deis0: return "deis0";
        case SolverKind::deis1: return "deis1";
        case SolverKind::deis2: return "deis2";
        case SolverKind::deis3: return "deis3";
        case SolverKind::edm_heun: return "edm-heun";
    }
    return "?";
}

std::optional<SolverKind> solver_kind_from_name(const std::string& name) {
    for (SolverKind k : kAllSolverKinds)
        if (name == solver_kind_name(k)) return k;
    return std::nullopt;
}

int solver_stage_count(SolverKind kind) {
    switch (kind) {
        case SolverKind::dpm2:
        case SolverKind::edm_heun: return 2;
        case SolverKind::dpm3: return 3;
        default: return 1;
    }
}

bool solver_is_multistage(SolverKind kind) {
    return solver_stage_count(kind) > 1;
}

int deis_order(SolverKind kind) {
    switch (kind) {
        case SolverKind::deis0: return 0;
        case SolverKind::deis1: return 1;
        case SolverKind::deis2: return 2;
        case SolverKind::deis3: return 3;
        default: return -1;
    }
}

Parameterization solver_parameterization(SolverKind kind) {
    return (kind == SolverKind::ddim_data || kind == SolverKind::edm_heun)
               ? Parameterization::data
               : Parameterization::noise;
}

ScheduleKind solver_schedule_kind(SolverKind kind) {
    return (kind == SolverKind::ddim_data || kind == SolverKind::edm_heun)
               ? ScheduleKind::ve_karras
               : ScheduleKind::vp_linear;
}

void check_solver_schedule(SolverKind kind, const NoiseSchedule& sched) {
    if (sched.kind() != solver_schedule_kind(kind))
        fail(ErrorCode::config, std::string(solver_kind_name(kind)) + " requires the " +
                                    schedule_kind_name(solver_schedule_kind(kind)) + " schedule");
}

const std::array<std::array<RationalCoeff, 4>, 4> kIpndmCoefficients = {{
    {{{1, 1}, {0, 1}, {0, 1}, {0, 1}}},
    {{{3, 2}, {-1, 2}, {0, 1}, {0, 1}}},
    {{{23, 12}, {-16, 12}, {5, 12}, {0, 1}}},
    {{{55, 24}, {-59, 24}, {37, 24}, {-9, 24}}},
}};

namespace {

// expm1(h)/h with the h -> 0 limit
double phi1(double h) {
    return h == 0.0 ? 1.0 : std::expm1(h) / h;
}

Batch ddim_update_noise(const Batch& x, const Batch& d, double a_t, double s_t, double a_n,
                        double s_n) {
    Batch out(x.batch, x.dim);
    for (size_t i = 0; i < x.size(); ++i)
        out.data[i] = a_n * ((x.data[i] - s_t * d.data[i]) / a_t) + s_n * d.data[i];
    return out;
}

Batch ddim_update_data(const Batch& x, const Batch& d, double s_t, double s_n) {
    Batch out(x.batch, x.dim);
    for (size_t i = 0; i < x.size(); ++i)
        out.data[i] = x.data[i] + (s_t - s_n) * (d.data[i] - x.data[i]) / s_t;
    return out;
}

const Batch& transform_anchor(const SolverState& st) {
    return st.prev_combined ? *st.prev_combined : st.x_init;
}

Batch maybe_transform(const Batch& d, const Batch& prev, const StageLambdas& lam, int stage) {
    if (!lam.active) return d;
    return combine(d, prev, lam.v[size_t(stage)]);
}

void push_history(SolverState& st, double time, Batch output) {
    st.history.insert(st.history.begin(), HistoryEntry{time, std::move(output)});
    if (st.history.size() > 4) st.history.pop_back();
}

double lagrange_basis(const std::vector<double>& nodes, size_t j, double s) {
    double v = 1.0;
    for (size_t k = 0; k < nodes.size(); ++k)
        if (k != j) v *= (s - nodes[k]) / (nodes[j] - nodes[k]);
    return v;
}

}  // namespace

std::vector<double> deis_coefficients(const NoiseSchedule& sched, double t, double t_next,
                                      const std::vector<double>& node_times) {
    size_t r = node_times.size();
    if (r == 0 || r > 4) fail(ErrorCode::invalid, "deis_coefficients needs 1..4 nodes");
    for (size_t i = 0; i < r; ++i)
        for (size_t j = i + 1; j < r; ++j)
            if (std::abs(node_times[i] - node_times[j]) < 1e-15)
                fail(ErrorCode::domain, "degenerate Lagrange nodes: duplicate history timesteps");

    constexpr int kSub = 256;
    double a_n = sched.alpha(t_next);
    double u_hi = sched.snr_ratio(t);
    double u_lo = sched.snr_ratio(t_next);
    double du = (u_hi - u_lo) / kSub;
    std::vector<double> acc(r, 0.0);
    for (int k = 0; k <= kSub; ++k) {
        double s;
        if (k == 0)
            s = t_next;
        else if (k == kSub)
            s = t;
        else
            s = sched.inv_log_snr(-std::log(u_lo + du * k));
        double w = (k == 0 || k == kSub) ? 0.5 : 1.0;
        for (size_t j = 0; j < r; ++j) acc[j] += w * lagrange_basis(node_times, j, s);
    }
    std::vector<double> coeff(r);
    for (size_t j = 0; j < r; ++j) coeff[j] = -a_n * acc[j] * du;
    return coeff;
}

double dpm2_mid_time(const NoiseSchedule& sched, double t, double t_next) {
    return sched.inv_log_snr(0.5 * (sched.log_snr(t) + sched.log_snr(t_next)));
}

std::pair<double, double> dpm3_stage_times(const NoiseSchedule& sched, double t, double t_next) {
    double tau_t = sched.log_snr(t);
    double h = sched.log_snr(t_next) - tau_t;
    return {sched.inv_log_snr(tau_t + h / 3.0), sched.inv_log_snr(tau_t + 2.0 * h / 3.0)};
}

std::vector<double> interior_stage_times(SolverKind kind, const NoiseSchedule& sched,
                                         const TimeGrid& grid) {
    std::vector<double> out;
    if (kind == SolverKind::dpm2) {
        for (size_t i = 0; i + 1 < grid.points.size(); ++i)
            out.push_back(dpm2_mid_time(sched, grid.points[i], grid.points[i + 1]));
    } else if (kind == SolverKind::dpm3) {
        for (size_t i = 0; i + 1 < grid.points.size(); ++i) {
            auto [s1, s2] = dpm3_stage_times(sched, grid.points[i], grid.points[i + 1]);
            out.push_back(s1);
            out.push_back(s2);
        }
    }
    return out;
}

StepResult make_step(SolverKind kind, const SolverState& state, const DenoiserOracle& oracle,
                     const NoiseSchedule& sched, double t, double t_next,
                     const StageLambdas& lambdas, bool final_interval) {
    if (!(t > t_next)) fail(ErrorCode::invalid, "step requires t > t_next");
    StepResult res{state, {}};
    SolverState& st = res.state;
    StepRecord& rec = res.record;
    rec.t_from = t;
    rec.t_to = t_next;
    Parameterization param = solver_parameterization(kind);

    auto [a_t, s_t] = sched.alpha_sigma(t);
    auto [a_n, s_n] = sched.alpha_sigma(t_next);

    switch (kind) {
        case SolverKind::ddim_noise:
        case SolverKind::ddim_data: {
            Batch d = oracle.denoise(st.x, t, sched, param);
            st.nfe += 1;
            Batch o = maybe_transform(d, transform_anchor(st), lambdas, 0);
            st.x = (kind == SolverKind::ddim_noise) ? ddim_update_noise(st.x, o, a_t, s_t, a_n, s_n)
                                                    : ddim_update_data(st.x, o, s_t, s_n);
            rec.output = d;
            st.prev_combined = d;
            push_history(st, t, std::move(d));
            break;
        }
        case SolverKind::dpm1: {
            double h = sched.log_snr(t_next) - sched.log_snr(t);
            Batch d = oracle.denoise(st.x, t, sched, param);
            st.nfe += 1;
            Batch o = maybe_transform(d, transform_anchor(st), lambdas, 0);
            double ratio = a_n / a_t, c = s_n * std::expm1(h);
            Batch x(st.x.batch, st.x.dim);
            for (size_t i = 0; i < x.size(); ++i) x.data[i] = ratio * st.x.data[i] - c * o.data[i];
            st.x = std::move(x);
            rec.output = d;
            st.prev_combined = d;
            push_history(st, t, std::move(d));
            break;
        }
        case SolverKind::ipndm: {
            Batch d = oracle.denoise(st.x, t, sched, param);
            st.nfe += 1;
            size_t p = std::min<size_t>(st.history.size(), 3);
            Batch comp(d.batch, d.dim);
            for (size_t i = 0; i < d.size(); ++i) {
                double v = double(kIpndmCoefficients[p][0].num) /
                           double(kIpndmCoefficients[p][0].den) * d.data[i];
                for (size_t j = 1; j <= p; ++j)
                    v += double(kIpndmCoefficients[p][j].num) /
                         double(kIpndmCoefficients[p][j].den) * st.history[j - 1].output.data[i];
                comp.data[i] = v;
            }
            Batch o = maybe_transform(comp, transform_anchor(st), lambdas, 0);
            st.x = ddim_update_noise(st.x, o, a_t, s_t, a_n, s_n);
            rec.output = d;
            st.prev_combined = std::move(comp);
            push_history(st, t, std::move(d));
            break;
        }
        case SolverKind::deis0:
        case SolverKind::deis1:
        case SolverKind::deis2:
        case SolverKind::deis3: {
            size_t r = std::min<size_t>(size_t(deis_order(kind)), st.history.size());
            std::vector<double> nodes{t};
            for (size_t j = 0; j < r; ++j) nodes.push_back(st.history[j].time);
            std::vector<double> coeff = deis_coefficients(sched, t, t_next, nodes);
            Batch d = oracle.denoise(st.x, t, sched, param);
            st.nfe += 1;
            Batch poly(d.batch, d.dim);
            for (size_t i = 0; i < d.size(); ++i) {
                double v = coeff[0] * d.data[i];
                for (size_t j = 1; j <= r; ++j) v += coeff[j] * st.history[j - 1].output.data[i];
                poly.data[i] = v;
            }
            Batch o = maybe_transform(poly, transform_anchor(st), lambdas, 0);
            double ratio = a_n / a_t;
            Batch x(st.x.batch, st.x.dim);
            for (size_t i = 0; i < x.size(); ++i) x.data[i] = ratio * st.x.data[i] + o.data[i];
            st.x = std::move(x);
            rec.output = d;
            st.prev_combined = std::move(poly);
            push_history(st, t, std::move(d));
            break;
        }
        case SolverKind::dpm2: {
            double tau_t = sched.log_snr(t);
            double h = sched.log_snr(t_next) - tau_t;
            double t_mid = dpm2_mid_time(sched, t, t_next);
            auto [a_m, s_m] = sched.alpha_sigma(t_mid);
            Batch d_t = oracle.denoise(st.x, t, sched, param);
            Batch o_t = maybe_transform(d_t, transform_anchor(st), lambdas, 0);
            double ratio_m = a_m / a_t, c_m = s_m * std::expm1(0.5 * h);
            Batch x_mid(st.x.batch, st.x.dim);
            for (size_t i = 0; i < x_mid.size(); ++i)
                x_mid.data[i] = ratio_m * st.x.data[i] - c_m * o_t.data[i];
            Batch d_mid = oracle.denoise(x_mid, t_mid, sched, param);
            st.nfe += 2;
            Batch o_mid = maybe_transform(d_mid, d_t, lambdas, 1);
            double ratio_n = a_n / a_t, c_n = s_n * std::expm1(h);
            Batch x(st.x.batch, st.x.dim);
            for (size_t i = 0; i < x.size(); ++i)
                x.data[i] = ratio_n * st.x.data[i] - c_n * o_mid.data[i];
            st.x = std::move(x);
            rec.output = d_t;
            rec.stages.push_back(StageRecord{t_mid, std::move(x_mid), d_mid});
            st.prev_combined = std::move(d_mid);
            push_history(st, t, std::move(d_t));
            break;
        }
        case SolverKind::dpm3: {
            constexpr double r1 = 1.0 / 3.0, r2 = 2.0 / 3.0;
            double tau_t = sched.log_snr(t);
            double h = sched.log_snr(t_next) - tau_t;
            auto [ts1, ts2] = dpm3_stage_times(sched, t, t_next);
            auto [a_1, s_1] = sched.alpha_sigma(ts1);
            auto [a_2, s_2] = sched.alpha_sigma(ts2);
            Batch d_t = oracle.denoise(st.x, t, sched, param);
            Batch o_t = maybe_transform(d_t, transform_anchor(st), lambdas, 0);
            Batch u1(st.x.batch, st.x.dim);
            double c1 = s_1 * std::expm1(r1 * h);
            for (size_t i = 0; i < u1.size(); ++i)
                u1.data[i] = (a_1 / a_t) * st.x.data[i] - c1 * o_t.data[i];
            Batch d_1 = oracle.denoise(u1, ts1, sched, param);
            Batch o_1 = maybe_transform(d_1, d_t, lambdas, 1);
            Batch u2(st.x.batch, st.x.dim);
            double c2 = s_2 * std::expm1(r2 * h);
            double c2d = (s_2 * r2 / r1) * (phi1(r2 * h) - 1.0);
            for (size_t i = 0; i < u2.size(); ++i)
                u2.data[i] = (a_2 / a_t) * st.x.data[i] - c2 * o_t.data[i] -
                             c2d * (o_1.data[i] - o_t.data[i]);
            Batch d_2 = oracle.denoise(u2, ts2, sched, param);
            st.nfe += 3;
            Batch o_2 = maybe_transform(d_2, d_1, lambdas, 2);
            double cn = s_n * std::expm1(h);
            double cnd = (s_n / r2) * (phi1(h) - 1.0);
            Batch x(st.x.batch, st.x.dim);
            for (size_t i = 0; i < x.size(); ++i)
                x.data[i] = (a_n / a_t) * st.x.data[i] - cn * o_t.data[i] -
                            cnd * (o_2.data[i] - o_t.data[i]);
            st.x = std::move(x);
            rec.output = d_t;
            rec.stages.push_back(StageRecord{ts1, std::move(u1), std::move(d_1)});
            rec.stages.push_back(StageRecord{ts2, std::move(u2), d_2});
            st.prev_combined = std::move(d_2);
            push_history(st, t, std::move(d_t));
            break;
        }
        case SolverKind::edm_heun: {
            Batch d_t = oracle.denoise(st.x, t, sched, param);
            st.nfe += 1;
            Batch o_t = maybe_transform(d_t, transform_anchor(st), lambdas, 0);
            Batch x_pred(st.x.batch, st.x.dim);
            double dt = s_t - s_n;
            for (size_t i = 0; i < x_pred.size(); ++i)
                x_pred.data[i] = st.x.data[i] + dt * (o_t.data[i] - st.x.data[i]) / s_t;
            if (final_interval) {
                st.x = std::move(x_pred);
                rec.output = d_t;
                st.prev_combined = d_t;
                push_history(st, t, std::move(d_t));
                break;
            }
            Batch d_p = oracle.denoise(x_pred, t_next, sched, param);
            st.nfe += 1;
            Batch o_p = maybe_transform(d_p, d_t, lambdas, 1);
            Batch x(st.x.batch, st.x.dim);
            for (size_t i = 0; i < x.size(); ++i) {
                double slope1 = (o_t.data[i] - st.x.data[i]) / s_t;
                double slope2 = (o_p.data[i] - x_pred.data[i]) / s_n;
                x.data[i] = st.x.data[i] + dt * 0.5 * (slope1 + slope2);
            }
            st.x = std::move(x);
            rec.output = d_t;
            rec.stages.push_back(StageRecord{t_next, std::move(x_pred), d_p});
            st.prev_combined = std::move(d_p);
            push_history(st, t, std::move(d_t));
            break;
        }
    }
    return res;
}

Trajectory run_sampler(SolverKind kind, const DenoiserOracle& oracle, const NoiseSchedule& sched,
                       const TimeGrid& grid, const Batch& x_init, const RunOptions& opts) {
    check_solver_schedule(kind, sched);
    if (grid.points.size() < 2) fail(ErrorCode::config, "grid needs at least two points");
    for (size_t i = 0; i + 1 < grid.points.size(); ++i)
        if (!(grid.points[i] > grid.points[i + 1]))
            fail(ErrorCode::invalid, "grid points must be strictly decreasing");
    sched.alpha_sigma(grid.points.front());
    sched.alpha_sigma(grid.points.back());
    if (x_init.dim != oracle.dim()) fail(ErrorCode::invalid, "x_init dimension mismatch");

    size_t n_steps = grid.steps();
    // A third-order step needs three denoising outputs; degenerate grids fall
    // back to plain DDIM.
    SolverKind eff_kind =
        (kind == SolverKind::dpm3 && grid.points.size() < 3) ? SolverKind::ddim_noise : kind;
    int arity = solver_stage_count(kind);
    if (opts.lambdas) {
        if (opts.lambdas->kind != kind)
            fail(ErrorCode::config, "lambda schedule was fitted for a different solver kind");
        if (opts.lambdas->steps() != n_steps)
            fail(ErrorCode::config, "lambda schedule length does not match the grid");
        for (const auto& v : opts.lambdas->values)
            if (v.size() != size_t(arity))
                fail(ErrorCode::config, "lambda schedule stage arity mismatch");
    }

    Trajectory out;
    out.times = grid.points;
    out.recorded = opts.record;

    SolverState st;
    st.x = x_init;
    st.x_init = x_init;
    if (opts.record) {
        out.states.reserve(n_steps + 1);
        out.states.push_back(x_init);
        out.steps.reserve(n_steps);
    }
    for (size_t i = 0; i < n_steps; ++i) {
        StageLambdas lam;
        if (opts.lambdas) {
            lam.active = true;
            const auto& v = opts.lambdas->values[i];
            for (size_t k = 0; k < v.size(); ++k) lam.v[k] = v[k];
        }
        StepResult res;
        try {
            res = make_step(eff_kind, st, oracle, sched, grid.points[i], grid.points[i + 1], lam,
                            i + 1 == n_steps);
        } catch (const Error& e) {
            fail(e.code(), "step " + std::to_string(i) + ": " + e.what());
        }
        st = std::move(res.state);
        st.step_index = int(i) + 1;
        if (!st.x.all_finite())
            fail(ErrorCode::numeric, "step " + std::to_string(i) + ": non-finite state");
        if (opts.record) {
            out.states.push_back(st.x);
            out.steps.push_back(std::move(res.record));
        }
    }
    if (!opts.record) out.states.push_back(std::move(st.x));
    out.nfe = st.nfe;
    return out;
}

Batch sample_initial_noise(const NoiseSchedule& sched, size_t batch, size_t dim, uint64_t seed) {
    double scale = sched.kind() == ScheduleKind::ve_karras ? sched.sigma_max() : 1.0;
    Rng rng(seed);
    return rng.normal_batch(batch, dim, scale);
}

}  // namespace dode

#include "analysis.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"
#include "rng.hpp"

namespace dode {

CosineMatrix cosine_similarity_matrix(const Trajectory& traj) {
    if (!traj.recorded || traj.steps.empty())
        fail(ErrorCode::invalid, "cosine matrix needs a recorded trajectory with outputs");
    size_t n = traj.steps.size();
    size_t batch = traj.steps[0].output.batch;
    std::vector<double> norms(n * batch);
    bool zero_flag = false;
    for (size_t k = 0; k < n; ++k) {
        const Batch& d = traj.steps[k].output;
        for (size_t b = 0; b < batch; ++b) {
            double s = 0.0;
            const double* row = d.row(b);
            for (size_t j = 0; j < d.dim; ++j) s += row[j] * row[j];
            norms[k * batch + b] = std::sqrt(s);
            if (s == 0.0) zero_flag = true;
        }
    }
    CosineMatrix m;
    m.n = n;
    m.zero_norm_flag = zero_flag;
    m.values.assign(n * n, 0.0);
    parallel_for(n, 4, [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            const Batch& di = traj.steps[i].output;
            for (size_t j = i; j < n; ++j) {
                const Batch& dj = traj.steps[j].output;
                double acc = 0.0;
                for (size_t b = 0; b < batch; ++b) {
                    double ni = norms[i * batch + b], nj = norms[j * batch + b];
                    if (ni == 0.0 || nj == 0.0) continue;  // contributes 0
                    double dot = 0.0;
                    const double* ri = di.row(b);
                    const double* rj = dj.row(b);
                    for (size_t c = 0; c < di.dim; ++c) dot += ri[c] * rj[c];
                    acc += dot / (ni * nj);
                }
                m.values[i * n + j] = acc / double(batch);
                m.values[j * n + i] = m.values[i * n + j];
            }
        }
    });
    return m;
}

std::vector<double> norm_trace(const Trajectory& traj) {
    std::vector<double> out;
    out.reserve(traj.states.size());
    for (const Batch& s : traj.states) {
        double acc = 0.0;
        for (size_t b = 0; b < s.batch; ++b) {
            double n2 = 0.0;
            const double* row = s.row(b);
            for (size_t j = 0; j < s.dim; ++j) n2 += row[j] * row[j];
            acc += std::sqrt(n2);
        }
        out.push_back(s.batch ? acc / double(s.batch) : 0.0);
    }
    return out;
}

std::vector<std::array<double, 2>> coordinate_trace(const Trajectory& traj, size_t sample,
                                                    size_t coord_a, size_t coord_b) {
    std::vector<std::array<double, 2>> out;
    for (const Batch& s : traj.states) {
        if (sample >= s.batch || coord_a >= s.dim || coord_b >= s.dim)
            fail(ErrorCode::invalid, "coordinate_trace indices out of range");
        out.push_back({s.at(sample, coord_a), s.at(sample, coord_b)});
    }
    return out;
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) fail(ErrorCode::invalid, "wasserstein_1d needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t n = a.size(), m = b.size();
    size_t i = 0, j = 0;
    double u = 0.0, acc = 0.0;
    while (i < n && j < m) {
        double ua = double(i + 1) / double(n);
        double ub = double(j + 1) / double(m);
        double next = std::min(ua, ub);
        double diff = a[i] - b[j];
        acc += diff * diff * (next - u);
        u = next;
        if (ua == next) ++i;
        if (ub == next) ++j;
    }
    return std::sqrt(acc);
}

double sliced_wasserstein(const Batch& a, const Batch& b, int n_projections, uint64_t seed) {
    if (a.batch == 0 || b.batch == 0) fail(ErrorCode::invalid, "sliced_wasserstein: empty batch");
    if (a.dim != b.dim) fail(ErrorCode::invalid, "sliced_wasserstein: dimension mismatch");
    if (n_projections < 1) fail(ErrorCode::invalid, "sliced_wasserstein needs n_projections >= 1");
    size_t d = a.dim;
    Rng rng(seed);
    size_t n_proj = size_t(n_projections);
    std::vector<std::vector<double>> dirs(n_proj);
    for (auto& v : dirs) v = rng.unit_vector(d);
    std::vector<double> per_proj(n_proj);
    parallel_for(n_proj, 8, [&](size_t lo, size_t hi) {
        for (size_t p = lo; p < hi; ++p) {
            const auto& dir = dirs[p];
            std::vector<double> pa(a.batch), pb(b.batch);
            for (size_t i = 0; i < a.batch; ++i) {
                double s = 0.0;
                const double* row = a.row(i);
                for (size_t j = 0; j < d; ++j) s += dir[j] * row[j];
                pa[i] = s;
            }
            for (size_t i = 0; i < b.batch; ++i) {
                double s = 0.0;
                const double* row = b.row(i);
                for (size_t j = 0; j < d; ++j) s += dir[j] * row[j];
                pb[i] = s;
            }
            per_proj[p] = wasserstein_1d(std::move(pa), std::move(pb));
        }
    });
    double acc = 0.0;
    for (double v : per_proj) acc += v;
    return acc / double(n_projections);
}

double convergence_order(const std::vector<std::pair<double, double>>& step_errors) {
    if (step_errors.size() < 2)
        fail(ErrorCode::invalid, "convergence_order needs at least two points");
    double zbar = 0.0, ybar = 0.0;
    for (const auto& [steps, err] : step_errors) {
        if (!(steps > 0.0) || !(err > 0.0))
            fail(ErrorCode::invalid, "convergence_order needs positive steps and errors");
        zbar += std::log(1.0 / steps);
        ybar += std::log(err);
    }
    double n = double(step_errors.size());
    zbar /= n;
    ybar /= n;
    double num = 0.0, den = 0.0;
    for (const auto& [steps, err] : step_errors) {
        double z = std::log(1.0 / steps) - zbar;
        num += z * (std::log(err) - ybar);
        den += z * z;
    }
    return num / den;
}

}  // namespace dode

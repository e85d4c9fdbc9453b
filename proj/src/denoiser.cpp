#include "denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"

namespace dode {

DenoiserOracle DenoiserOracle::gaussian(std::vector<double> mean, double stddev) {
    if (mean.empty()) fail(ErrorCode::invalid, "gaussian backend needs a nonempty mean");
    if (!(stddev > 0.0)) fail(ErrorCode::config, "gaussian backend needs stddev > 0");
    DenoiserOracle o;
    o.dim_ = mean.size();
    o.backend_ = GaussianBackend{std::move(mean), stddev};
    return o;
}

DenoiserOracle DenoiserOracle::point_cloud(Batch points) {
    if (points.batch == 0 || points.dim == 0)
        fail(ErrorCode::invalid, "point-cloud backend needs a nonempty dataset");
    if (!points.all_finite()) fail(ErrorCode::invalid, "point-cloud dataset has non-finite entries");
    DenoiserOracle o;
    o.dim_ = points.dim;
    o.backend_ = PointCloudBackend{std::move(points)};
    return o;
}

DenoiserOracle DenoiserOracle::gmm(std::vector<GmmComponent> components) {
    if (components.empty()) fail(ErrorCode::invalid, "gmm backend needs at least one component");
    size_t d = components[0].mean.size();
    double wsum = 0.0;
    for (const auto& c : components) {
        if (c.mean.size() != d) fail(ErrorCode::invalid, "gmm component dimensions differ");
        if (!(c.weight > 0.0)) fail(ErrorCode::config, "gmm weights must be positive");
        if (!(c.stddev > 0.0)) fail(ErrorCode::config, "gmm stddevs must be positive");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-6) fail(ErrorCode::config, "gmm weights must sum to 1");
    for (auto& c : components) c.weight /= wsum;
    DenoiserOracle o;
    o.dim_ = d;
    o.backend_ = GmmBackend{std::move(components)};
    return o;
}

// Data-prediction posterior mean for rows [begin, end).
void DenoiserOracle::denoise_rows(const Batch& x, double a, double sig, Batch& out, size_t begin,
                                  size_t end) const {
    size_t d = dim_;
    double sig2 = sig * sig;
    if (const auto* g = std::get_if<GaussianBackend>(&backend_)) {
        double s2 = g->stddev * g->stddev;
        double gamma2 = a * a * s2 + sig2;
        double k = a * s2 / gamma2;
        for (size_t i = begin; i < end; ++i) {
            const double* xi = x.row(i);
            double* oi = out.row(i);
            for (size_t j = 0; j < d; ++j) oi[j] = g->mean[j] + k * (xi[j] - a * g->mean[j]);
        }
    } else if (const auto* pc = std::get_if<PointCloudBackend>(&backend_)) {
        size_t n = pc->points.batch;
        std::vector<double> logits(n);
        for (size_t i = begin; i < end; ++i) {
            const double* xi = x.row(i);
            double m = -HUGE_VAL;
            for (size_t p = 0; p < n; ++p) {
                const double* pt = pc->points.row(p);
                double d2 = 0.0;
                for (size_t j = 0; j < d; ++j) {
                    double diff = xi[j] - a * pt[j];
                    d2 += diff * diff;
                }
                logits[p] = -d2 / (2.0 * sig2);
                m = std::max(m, logits[p]);
            }
            double wsum = 0.0;
            for (size_t p = 0; p < n; ++p) {
                logits[p] = std::exp(logits[p] - m);  // log-sum-exp shift
                wsum += logits[p];
            }
            double* oi = out.row(i);
            for (size_t j = 0; j < d; ++j) oi[j] = 0.0;
            for (size_t p = 0; p < n; ++p) {
                double w = logits[p] / wsum;
                const double* pt = pc->points.row(p);
                for (size_t j = 0; j < d; ++j) oi[j] += w * pt[j];
            }
        }
    } else {
        const auto& comps = std::get<GmmBackend>(backend_).components;
        size_t n = comps.size();
        std::vector<double> logits(n), kfac(n), gamma2(n);
        for (size_t c = 0; c < n; ++c) {
            double s2 = comps[c].stddev * comps[c].stddev;
            gamma2[c] = a * a * s2 + sig2;
            kfac[c] = a * s2 / gamma2[c];
        }
        for (size_t i = begin; i < end; ++i) {
            const double* xi = x.row(i);
            double m = -HUGE_VAL;
            for (size_t c = 0; c < n; ++c) {
                double d2 = 0.0;
                for (size_t j = 0; j < d; ++j) {
                    double diff = xi[j] - a * comps[c].mean[j];
                    d2 += diff * diff;
                }
                logits[c] = std::log(comps[c].weight) - 0.5 * double(d) * std::log(gamma2[c]) -
                            d2 / (2.0 * gamma2[c]);
                m = std::max(m, logits[c]);
            }
            double wsum = 0.0;
            for (size_t c = 0; c < n; ++c) {
                logits[c] = std::exp(logits[c] - m);
                wsum += logits[c];
            }
            double* oi = out.row(i);
            for (size_t j = 0; j < d; ++j) oi[j] = 0.0;
            for (size_t c = 0; c < n; ++c) {
                double w = logits[c] / wsum;
                const double* mu = comps[c].mean.data();
                for (size_t j = 0; j < d; ++j) oi[j] += w * (mu[j] + kfac[c] * (xi[j] - a * mu[j]));
            }
        }
    }
}

Batch DenoiserOracle::denoise(const Batch& x, double t, const NoiseSchedule& sched,
                              Parameterization param) const {
    if (x.dim != dim_) fail(ErrorCode::invalid, "query dimension does not match the oracle");
    auto [a, sig] = sched.alpha_sigma(t);
    if (!(sig > 0.0)) fail(ErrorCode::domain, "denoise requires sigma_t > 0");
    Batch xhat(x.batch, x.dim);
    parallel_for(x.batch, 256,
                 [&](size_t b, size_t e) { denoise_rows(x, a, sig, xhat, b, e); });
    if (param == Parameterization::data) return xhat;
    Batch eps(x.batch, x.dim);
    for (size_t i = 0; i < x.size(); ++i) eps.data[i] = (x.data[i] - a * xhat.data[i]) / sig;
    return eps;
}

Batch DenoiserOracle::score(const Batch& x, double t, const NoiseSchedule& sched) const {
    auto [a, sig] = sched.alpha_sigma(t);
    if (!(sig > 0.0)) fail(ErrorCode::domain, "score requires sigma_t > 0");
    Batch xhat = denoise(x, t, sched, Parameterization::data);
    Batch out(x.batch, x.dim);
    double sig2 = sig * sig;
    for (size_t i = 0; i < x.size(); ++i) out.data[i] = (a * xhat.data[i] - x.data[i]) / sig2;
    return out;
}

Batch DenoiserOracle::exact_flow_map(const Batch& x, double t_from, double t_to,
                                     const NoiseSchedule& sched) const {
    const auto* g = std::get_if<GaussianBackend>(&backend_);
    if (!g) fail(ErrorCode::unsupported, "exact_flow_map is defined for the gaussian backend only");
    if (x.dim != dim_) fail(ErrorCode::invalid, "query dimension does not match the oracle");
    auto [a_from, s_from] = sched.alpha_sigma(t_from);
    auto [a_to, s_to] = sched.alpha_sigma(t_to);
    double s2 = g->stddev * g->stddev;
    double gamma_from = std::sqrt(a_from * a_from * s2 + s_from * s_from);
    double gamma_to = std::sqrt(a_to * a_to * s2 + s_to * s_to);
    double ratio = gamma_to / gamma_from;
    Batch out(x.batch, x.dim);
    for (size_t i = 0; i < x.batch; ++i) {
        const double* xi = x.row(i);
        double* oi = out.row(i);
        for (size_t j = 0; j < dim_; ++j)
            oi[j] = a_to * g->mean[j] + ratio * (xi[j] - a_from * g->mean[j]);
    }
    return out;
}

Batch DenoiserOracle::sample_data(size_t n, Rng& rng) const {
    Batch out(n, dim_);
    if (const auto* g = std::get_if<GaussianBackend>(&backend_)) {
        for (size_t i = 0; i < n; ++i) {
            double* oi = out.row(i);
            for (size_t j = 0; j < dim_; ++j) oi[j] = g->mean[j] + g->stddev * rng.normal();
        }
    } else if (const auto* pc = std::get_if<PointCloudBackend>(&backend_)) {
        for (size_t i = 0; i < n; ++i) {
            const double* pt = pc->points.row(rng.integer(pc->points.batch));
            std::copy(pt, pt + dim_, out.row(i));
        }
    } else {
        const auto& comps = std::get<GmmBackend>(backend_).components;
        for (size_t i = 0; i < n; ++i) {
            double u = rng.uniform();
            size_t c = 0;
            double acc = 0.0;
            for (; c + 1 < comps.size(); ++c) {
                acc += comps[c].weight;
                if (u < acc) break;
            }
            double* oi = out.row(i);
            for (size_t j = 0; j < dim_; ++j)
                oi[j] = comps[c].mean[j] + comps[c].stddev * rng.normal();
        }
    }
    return out;
}

}  // namespace dode

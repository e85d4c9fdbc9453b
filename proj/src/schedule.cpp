#include "schedule.hpp"

#include <algorithm>
#include <cmath>

namespace dode {

NoiseSchedule NoiseSchedule::vp_linear(double beta_min, double beta_max, double t_epsilon) {
    if (!(beta_min > 0.0) || !(beta_max > beta_min))
        fail(ErrorCode::config, "vp-linear requires 0 < beta_min < beta_max");
    if (!(t_epsilon > 0.0) || !(t_epsilon < 1.0))
        fail(ErrorCode::config, "vp-linear requires t_epsilon in (0, 1)");
    NoiseSchedule s;
    s.kind_ = ScheduleKind::vp_linear;
    s.beta_min_ = beta_min;
    s.beta_max_ = beta_max;
    s.t_min_ = t_epsilon;
    s.t_max_ = 1.0;
    return s;
}

NoiseSchedule NoiseSchedule::ve_karras(double sigma_min, double sigma_max, double rho) {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
        fail(ErrorCode::config, "ve-karras requires 0 < sigma_min < sigma_max");
    if (!(rho > 0.0)) fail(ErrorCode::config, "ve-karras requires rho > 0");
    NoiseSchedule s;
    s.kind_ = ScheduleKind::ve_karras;
    s.sigma_min_ = sigma_min;
    s.sigma_max_ = sigma_max;
    s.rho_ = rho;
    s.t_min_ = sigma_min;
    s.t_max_ = sigma_max;
    return s;
}

void NoiseSchedule::check_domain(double t) const {
    double slack = 1e-12 * std::max(1.0, t_max_);
    if (!(t >= t_min_ - slack) || !(t <= t_max_ + slack))
        fail(ErrorCode::domain, "time " + std::to_string(t) + " outside schedule domain [" +
                                    std::to_string(t_min_) + ", " + std::to_string(t_max_) + "]");
}

double NoiseSchedule::alpha(double t) const {
    check_domain(t);
    if (kind_ == ScheduleKind::ve_karras) return 1.0;
    return std::exp(vp_log_alpha(t));
}

double NoiseSchedule::sigma(double t) const {
    check_domain(t);
    if (kind_ == ScheduleKind::ve_karras) return t;
    // 1 - alpha^2 = -expm1(2 log alpha), accurate when alpha is close to 1
    return std::sqrt(-std::expm1(2.0 * vp_log_alpha(t)));
}

std::pair<double, double> NoiseSchedule::alpha_sigma(double t) const {
    return {alpha(t), sigma(t)};
}

double NoiseSchedule::dalpha_dt(double t) const {
    check_domain(t);
    if (kind_ == ScheduleKind::ve_karras) return 0.0;
    double dlog = -0.5 * t * (beta_max_ - beta_min_) - 0.5 * beta_min_;
    return alpha(t) * dlog;
}

double NoiseSchedule::dsigma_dt(double t) const {
    check_domain(t);
    if (kind_ == ScheduleKind::ve_karras) return 1.0;
    return -alpha(t) * dalpha_dt(t) / sigma(t);
}

double NoiseSchedule::snr_ratio(double t) const {
    return sigma(t) / alpha(t);
}

double NoiseSchedule::log_snr(double t) const {
    check_domain(t);
    if (kind_ == ScheduleKind::ve_karras) return -std::log(t);
    return vp_log_alpha(t) - std::log(sigma(t));
}

double NoiseSchedule::inv_log_snr(double tau) const {
    double tau_hi = log_snr(t_min_);  // largest attainable value
    double tau_lo = log_snr(t_max_);
    double slack = 1e-9 * std::max(1.0, std::abs(tau_hi) + std::abs(tau_lo));
    if (!(tau >= tau_lo - slack) || !(tau <= tau_hi + slack))
        fail(ErrorCode::domain, "log-SNR value " + std::to_string(tau) + " outside attainable range");
    double lo = t_min_, hi = t_max_;
    while (hi - lo > 1e-10) {
        double mid = 0.5 * (lo + hi);
        if (log_snr(mid) > tau)
            lo = mid;  // tau decreasing in t: root lies at larger t
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

TimeGrid make_grid(const NoiseSchedule& sched, int n_steps, GridSpacing spacing) {
    if (n_steps < 1) fail(ErrorCode::config, "grid needs at least one step");
    TimeGrid grid;
    grid.spacing = spacing;
    grid.points.resize(size_t(n_steps) + 1);
    size_t n = size_t(n_steps);
    if (spacing == GridSpacing::uniform_t) {
        double hi = sched.t_max(), lo = sched.t_min();
        for (size_t i = 1; i < n; ++i) grid.points[i] = hi + (double(i) / double(n)) * (lo - hi);
        grid.points[0] = hi;
        grid.points[n] = lo;
    } else {
        if (sched.kind() != ScheduleKind::ve_karras)
            fail(ErrorCode::config, "karras-rho spacing requires the ve-karras schedule");
        double inv_rho = 1.0 / sched.rho();
        double a = std::pow(sched.sigma_max(), inv_rho);
        double b = std::pow(sched.sigma_min(), inv_rho);
        for (size_t i = 1; i < n; ++i)
            grid.points[i] = std::pow(a + (double(i) / double(n)) * (b - a), sched.rho());
        grid.points[0] = sched.sigma_max();
        grid.points[n] = sched.sigma_min();
    }
    for (size_t i = 0; i + 1 < grid.points.size(); ++i)
        if (!(grid.points[i] > grid.points[i + 1]))
            fail(ErrorCode::numeric, "grid points are not strictly decreasing");
    return grid;
}

const char* schedule_kind_name(ScheduleKind kind) {
    return kind == ScheduleKind::vp_linear ? "vp-linear" : "ve-karras";
}

const char* spacing_name(GridSpacing spacing) {
    return spacing == GridSpacing::uniform_t ? "uniform-t" : "karras-rho";
}

}  // namespace dode

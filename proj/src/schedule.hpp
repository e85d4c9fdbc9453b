#pragma once

#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace dode {

enum class ScheduleKind { vp_linear, ve_karras };
enum class GridSpacing { uniform_t, karras_rho };

// Continuous noise schedule (alpha_t, sigma_t) on [t_min, t_max].
//   vp-linear: alpha = exp(-t^2 (beta_max - beta_min)/4 - t beta_min/2),
//              sigma = sqrt(1 - alpha^2), t in [t_epsilon, 1]
//   ve-karras: alpha = 1, sigma = t, t in [sigma_min, sigma_max]
// The signal-to-noise ratio alpha^2/sigma^2 is strictly decreasing in t, so
// the log-SNR map tau(t) = log(alpha/sigma) is invertible.
class NoiseSchedule {
  public:
    static NoiseSchedule vp_linear(double beta_min = 0.1, double beta_max = 20.0,
                                   double t_epsilon = 1e-3);
    static NoiseSchedule ve_karras(double sigma_min = 0.002, double sigma_max = 80.0,
                                   double rho = 7.0);

    ScheduleKind kind() const { return kind_; }
    double t_min() const { return t_min_; }
    double t_max() const { return t_max_; }
    double beta_min() const { return beta_min_; }
    double beta_max() const { return beta_max_; }
    double sigma_min() const { return sigma_min_; }
    double sigma_max() const { return sigma_max_; }
    double rho() const { return rho_; }

    double alpha(double t) const;
    double sigma(double t) const;
    std::pair<double, double> alpha_sigma(double t) const;
    double dalpha_dt(double t) const;
    double dsigma_dt(double t) const;

    double snr_ratio(double t) const;  // sigma_t / alpha_t, strictly increasing in t
    double log_snr(double t) const;    // tau = log(alpha/sigma), strictly decreasing in t
    double inv_log_snr(double tau) const;  // bisection, |t - t*| <= 1e-10

  private:
    ScheduleKind kind_ = ScheduleKind::vp_linear;
    double beta_min_ = 0, beta_max_ = 0;
    double sigma_min_ = 0, sigma_max_ = 0, rho_ = 0;
    double t_min_ = 0, t_max_ = 0;

    void check_domain(double t) const;
    double vp_log_alpha(double t) const { return -0.25 * t * t * (beta_max_ - beta_min_) - 0.5 * t * beta_min_; }
};

// n_steps + 1 strictly decreasing times from t_max down to t_min.
struct TimeGrid {
    std::vector<double> points;
    GridSpacing spacing = GridSpacing::uniform_t;
    size_t steps() const { return points.empty() ? 0 : points.size() - 1; }
};

TimeGrid make_grid(const NoiseSchedule& sched, int n_steps, GridSpacing spacing);

const char* schedule_kind_name(ScheduleKind kind);
const char* spacing_name(GridSpacing spacing);

}  // namespace dode

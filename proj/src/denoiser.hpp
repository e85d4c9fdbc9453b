#pragma once

#include <variant>
#include <vector>

#include "batch.hpp"
#include "rng.hpp"
#include "schedule.hpp"

namespace dode {

enum class Parameterization { noise, data };

struct GaussianBackend {
    std::vector<double> mean;
    double stddev = 1.0;
};

// Finite point cloud; the posterior mean over it is the exact optimal denoiser
// for that empirical data distribution.
struct PointCloudBackend {
    Batch points;
};

struct GmmComponent {
    double weight = 1.0;
    std::vector<double> mean;
    double stddev = 1.0;
};

struct GmmBackend {
    std::vector<GmmComponent> components;
};

// Exchangeable denoising function D_theta with exact posterior-mean backends.
// The data view returns E[x0 | x_t] under the forward kernel
// x_t = alpha_t x0 + sigma_t eps; the noise view returns (x_t - alpha x̂)/sigma.
class DenoiserOracle {
  public:
    static DenoiserOracle gaussian(std::vector<double> mean, double stddev);
    static DenoiserOracle point_cloud(Batch points);
    static DenoiserOracle gmm(std::vector<GmmComponent> components);

    size_t dim() const { return dim_; }
    bool is_gaussian() const { return std::holds_alternative<GaussianBackend>(backend_); }

    Batch denoise(const Batch& x, double t, const NoiseSchedule& sched,
                  Parameterization param) const;
    Batch score(const Batch& x, double t, const NoiseSchedule& sched) const;

    // Closed-form probability-flow transport between Gaussian marginals:
    // x(t_to) = alpha_to mu + (gamma_to / gamma_from) (x - alpha_from mu),
    // gamma_t = sqrt(alpha_t^2 s^2 + sigma_t^2). Gaussian backend only.
    Batch exact_flow_map(const Batch& x, double t_from, double t_to,
                         const NoiseSchedule& sched) const;

    // Draws from the backend's data distribution (reference sets for metrics).
    Batch sample_data(size_t n, Rng& rng) const;

  private:
    std::variant<GaussianBackend, PointCloudBackend, GmmBackend> backend_;
    size_t dim_ = 0;

    void denoise_rows(const Batch& x, double a, double sig, Batch& out, size_t begin,
                      size_t end) const;
};

}  // namespace dode

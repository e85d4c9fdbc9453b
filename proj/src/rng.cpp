#include "rng.hpp"

#include <cmath>

namespace dode {

double Rng::uniform() {
    return double(gen_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = (double(gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

uint64_t Rng::integer(uint64_t bound) {
    if (bound == 0) fail(ErrorCode::invalid, "Rng::integer: bound must be positive");
    uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t v;
    do {
        v = gen_();
    } while (v >= limit);
    return v % bound;
}

Batch Rng::normal_batch(size_t n, size_t d, double stddev) {
    Batch out(n, d);
    for (double& v : out.data) v = stddev * normal();
    return out;
}

std::vector<double> Rng::unit_vector(size_t d) {
    std::vector<double> v(d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& x : v) {
            x = normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (double& x : v) x /= norm;
    return v;
}

}  // namespace dode

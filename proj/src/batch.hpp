#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "error.hpp"

namespace dode {

// Row-major (batch x dim) block of doubles, one row per sample.
struct Batch {
    std::vector<double> data;
    size_t batch = 0;
    size_t dim = 0;

    Batch() = default;
    Batch(size_t n, size_t d) : data(n * d, 0.0), batch(n), dim(d) {}

    double* row(size_t i) { return data.data() + i * dim; }
    const double* row(size_t i) const { return data.data() + i * dim; }
    double& at(size_t i, size_t j) { return data[i * dim + j]; }
    double at(size_t i, size_t j) const { return data[i * dim + j]; }
    size_t size() const { return data.size(); }
    bool same_shape(const Batch& o) const { return batch == o.batch && dim == o.dim; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void check_same_shape(const Batch& a, const Batch& b, const char* what) {
    if (!a.same_shape(b)) fail(ErrorCode::invalid, std::string("shape mismatch in ") + what);
}

}  // namespace dode

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "batch.hpp"

namespace dode {

// Deterministic stream: mt19937_64 plus an explicit Box-Muller transform, so
// draws do not depend on the standard library's distribution internals.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    double uniform();  // [0, 1)
    double normal();
    uint64_t integer(uint64_t bound);  // unbiased in [0, bound)

    Batch normal_batch(size_t n, size_t d, double stddev = 1.0);
    std::vector<double> unit_vector(size_t d);

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dode

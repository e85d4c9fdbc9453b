#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "trajectory.hpp"

namespace dode {

struct CosineMatrix {
    size_t n = 0;
    std::vector<double> values;  // row-major n x n
    bool zero_norm_flag = false;
    double at(size_t i, size_t j) const { return values[i * n + j]; }
};

// Mean-over-batch cosine similarity between per-step denoising outputs.
// Entries involving a zero-norm output are defined as 0 and flagged.
CosineMatrix cosine_similarity_matrix(const Trajectory& traj);

// Batch-mean Euclidean norm of every recorded state.
std::vector<double> norm_trace(const Trajectory& traj);

// Per-step values of two chosen coordinates of one sample.
std::vector<std::array<double, 2>> coordinate_trace(const Trajectory& traj, size_t sample,
                                                    size_t coord_a, size_t coord_b);

// Exact 1-D 2-Wasserstein distance between empirical distributions (quantile
// form; reduces to the sorted-match formula for equal sizes).
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

// Projection-averaged 1-D W2 between sample batches; deterministic per seed.
double sliced_wasserstein(const Batch& a, const Batch& b, int n_projections, uint64_t seed);

// Least-squares slope of log(error) against log(1/steps).
double convergence_order(const std::vector<std::pair<double, double>>& step_errors);

}  // namespace dode

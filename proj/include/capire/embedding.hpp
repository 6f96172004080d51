#pragma once

#include "capire/common.hpp"

#include <cstdint>
#include <vector>

namespace capire {

struct EmbeddingParams {
    int n_neighbors = 15;
    int dims = 3;
    double min_dist = 0.1;
    double spread = 1.0;
    int epochs = 200;
    double learning_rate = 1.0;
    int negative_sample_rate = 5;
    std::uint64_t seed = 1;

    void check(Eigen::Index n_samples) const;
};

// Least-squares fit of 1/(1 + a d^(2b)) to the target membership curve
// (1 below min_dist, exponential decay beyond). Deterministic.
void fit_attraction_curve(double min_dist, double spread, double& a, double& b);

// Exact kNN (Euclidean), ties broken by row index. Returns indices and
// distances, n x k, self excluded.
void knn_exact(const Matrix& points, int k, Eigen::MatrixXi& indices, Matrix& distances);

// Low-dimensional layout of the standardized matrix:
//   exact kNN graph -> per-point bandwidth calibrated so smoothed weights sum
//   to log2(k) -> symmetrized fuzzy union -> PCA initialization -> seeded
//   single-threaded SGD with negative sampling.
// Throws PreconditionError for degenerate input (all rows identical).
Matrix embed(const Matrix& standardized, const EmbeddingParams& params);

}  // namespace capire

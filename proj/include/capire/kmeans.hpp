#pragma once

#include "capire/common.hpp"

#include <cstdint>
#include <vector>

namespace capire {

struct KMeansResult {
    std::vector<int> labels;
    Matrix centroids;
    double inertia = 0.0;
};

// Seeded k-means++ initialization, Lloyd iterations, deterministic.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iter = 100);

// Average-linkage agglomerative clustering cut at k clusters. O(n^3) naive;
// intended for the small residual subsets it is used on.
std::vector<int> agglomerative_average(const Matrix& points, int k);

}  // namespace capire

#pragma once

#include "capire/common.hpp"

#include <vector>

namespace capire {

// Classic core/border/noise semantics; the neighborhood is closed (d <= eps)
// and counts the point itself. Labels are deterministic for a fixed row
// order: clusters are seeded in index order and grown breadth-first.
std::vector<int> dbscan(const Matrix& coordinates, double eps, int min_pts);

// Sorted (ascending) distance to the k-th nearest neighbor, self excluded.
std::vector<double> kdistance(const Matrix& coordinates, int k);

// eps suggestion: maximum-curvature point of the smoothed k-distance curve.
// A suggestion only; eps stays a config value.
double suggest_eps(const std::vector<double>& sorted_kdist);

struct FilterResult {
    std::vector<int> labels;        // retained ids renumbered by size desc, residual = -1
    std::vector<int> retained_ids;  // new ids, 0..m-1
    std::vector<std::size_t> retained_sizes;
    std::size_t residual_count = 0;         // noise + sub-threshold members
    std::size_t merged_cluster_count = 0;   // sub-threshold clusters folded in
};

// Clusters below min_size join the density-labelled noise; survivors are
// renumbered stably by descending size (ties by original label).
FilterResult filter_archetypes(const std::vector<int>& labels, std::size_t min_size = 40);

struct ValidityIndices {
    double silhouette = 0.0;
    double calinski_harabasz = 0.0;
    double davies_bouldin = 0.0;
};

// Computed over non-noise points only. Throws PreconditionError with fewer
// than two populated clusters.
ValidityIndices validity_indices(const Matrix& coordinates, const std::vector<int>& labels);

// Mean silhouette over non-noise points; the building block shared by the
// indices, the permutation test and the noise re-clustering model selection.
double silhouette_mean(const Matrix& coordinates, const std::vector<int>& labels);

}  // namespace capire

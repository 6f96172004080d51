#pragma once

#include "capire/assembly.hpp"
#include "capire/config.hpp"
#include "capire/dbscan.hpp"
#include "capire/embedding.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace capire {

struct ClusterSolution {
    Matrix coordinates;            // n x dims
    std::vector<int> raw_labels;   // dbscan output, noise = -1
    std::vector<int> labels;       // after size filtering, residual = -1
    double eps = 0.0;
    int min_pts = 0;
    std::vector<int> retained_ids;
    std::vector<std::size_t> retained_sizes;
    std::size_t residual_count = 0;
    std::size_t merged_cluster_count = 0;
    bool indices_defined = false;
    ValidityIndices indices;

    std::size_t retained_members() const;
    nlohmann::json indices_json(std::size_t n_rows) const;
};

// embed -> (k-distance eps suggestion when eps <= 0) -> dbscan -> size filter
// -> validity indices on the embedding, noise excluded.
ClusterSolution run_cluster(const Matrix& standardized, const EmbeddingParams& embedding,
                            const DbscanConfig& dbscan_cfg, std::size_t min_archetype_size);

struct ArchetypeProfile {
    int archetype_id = 0;
    std::size_t member_count = 0;
    std::map<std::string, double> feature_mean;
    std::map<std::string, double> feature_z;  // vs population, population-std units
    double attrition_rate = 0.0;              // ex-post description only
    bool attrition_known = false;
    std::string narrative;  // free slot for institutional annotation
};

// Per-archetype feature means and z-scores against the full matrix
// population, joined with outcome labels for the ex-post attrition column.
std::vector<ArchetypeProfile> profile_archetypes(const FeatureTable& matrix,
                                                 const std::vector<int>& labels,
                                                 const std::vector<OutcomeLabel>& outcomes);

nlohmann::json profiles_json(const std::vector<ArchetypeProfile>& profiles);

}  // namespace capire

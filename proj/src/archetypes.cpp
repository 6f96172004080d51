#include "capire/archetypes.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <unordered_map>

namespace capire {

std::size_t ClusterSolution::retained_members() const {
    std::size_t n = 0;
    for (const std::size_t s : retained_sizes) n += s;
    return n;
}

nlohmann::json ClusterSolution::indices_json(std::size_t n_rows) const {
    nlohmann::json j;
    j["eps"] = eps;
    j["min_pts"] = min_pts;
    j["clusters_raw"] = retained_ids.size() + merged_cluster_count;
    j["retained_archetypes"] = retained_ids.size();
    j["merged_small_clusters"] = merged_cluster_count;
    j["retained_sizes"] = retained_sizes;
    j["retained_members"] = retained_members();
    j["residual_members"] = residual_count;
    j["retained_coverage"] =
        n_rows ? static_cast<double>(retained_members()) / static_cast<double>(n_rows) : 0.0;
    if (indices_defined) {
        j["silhouette"] = indices.silhouette;
        j["calinski_harabasz"] = indices.calinski_harabasz;
        j["davies_bouldin"] = indices.davies_bouldin;
    } else {
        j["silhouette"] = nullptr;
        j["calinski_harabasz"] = nullptr;
        j["davies_bouldin"] = nullptr;
    }
    return j;
}

ClusterSolution run_cluster(const Matrix& standardized, const EmbeddingParams& embedding,
                            const DbscanConfig& dbscan_cfg, std::size_t min_archetype_size) {
    ClusterSolution sol;
    sol.coordinates = embed(standardized, embedding);
    sol.min_pts = dbscan_cfg.min_pts;
    if (dbscan_cfg.eps > 0.0) {
        sol.eps = dbscan_cfg.eps;
    } else {
        const auto kd = kdistance(sol.coordinates, dbscan_cfg.min_pts);
        sol.eps = suggest_eps(kd);
        if (sol.eps <= 0.0) sol.eps = kd.back() > 0.0 ? kd.back() : 1.0;
    }
    sol.raw_labels = dbscan(sol.coordinates, sol.eps, dbscan_cfg.min_pts);
    FilterResult filtered = filter_archetypes(sol.raw_labels, min_archetype_size);
    sol.labels = std::move(filtered.labels);
    sol.retained_ids = std::move(filtered.retained_ids);
    sol.retained_sizes = std::move(filtered.retained_sizes);
    sol.residual_count = filtered.residual_count;
    sol.merged_cluster_count = filtered.merged_cluster_count;
    if (sol.retained_ids.size() >= 2) {
        sol.indices = validity_indices(sol.coordinates, sol.labels);
        sol.indices_defined = true;
    }
    return sol;
}

std::vector<ArchetypeProfile> profile_archetypes(const FeatureTable& matrix,
                                                 const std::vector<int>& labels,
                                                 const std::vector<OutcomeLabel>& outcomes) {
    if (labels.size() != matrix.student_ids.size())
        throw PreconditionError("profile_archetypes: label/row mismatch");

    std::unordered_map<std::string, int> attrition;
    for (const auto& o : outcomes) attrition[o.student_id] = o.attrition_flag;

    // population stats per column, over defined cells
    const Eigen::Index cols = matrix.values.cols();
    std::vector<double> pop_mean(static_cast<std::size_t>(cols), 0.0);
    std::vector<double> pop_std(static_cast<std::size_t>(cols), 0.0);
    for (Eigen::Index c = 0; c < cols; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (Eigen::Index r = 0; r < matrix.values.rows(); ++r) {
            if (!is_missing(matrix.values(r, c))) {
                sum += matrix.values(r, c);
                ++n;
            }
        }
        const double mean = n ? sum / static_cast<double>(n) : 0.0;
        double var = 0.0;
        for (Eigen::Index r = 0; r < matrix.values.rows(); ++r) {
            if (!is_missing(matrix.values(r, c))) var += std::pow(matrix.values(r, c) - mean, 2);
        }
        pop_mean[static_cast<std::size_t>(c)] = mean;
        pop_std[static_cast<std::size_t>(c)] = n ? std::sqrt(var / static_cast<double>(n)) : 0.0;
    }

    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= 0) members[labels[r]].push_back(r);
    }

    std::vector<ArchetypeProfile> profiles;
    for (const auto& [id, rows] : members) {
        ArchetypeProfile p;
        p.archetype_id = id;
        p.member_count = rows.size();
        for (Eigen::Index c = 0; c < cols; ++c) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const std::size_t r : rows) {
                const double v = matrix.values(static_cast<Eigen::Index>(r), c);
                if (!is_missing(v)) {
                    sum += v;
                    ++n;
                }
            }
            if (n == 0) continue;
            const double mean = sum / static_cast<double>(n);
            const std::string& name = matrix.columns[static_cast<std::size_t>(c)];
            p.feature_mean[name] = mean;
            const double sd = pop_std[static_cast<std::size_t>(c)];
            p.feature_z[name] = sd > 0.0 ? (mean - pop_mean[static_cast<std::size_t>(c)]) / sd : 0.0;
        }
        std::size_t with_label = 0, attrited = 0;
        for (const std::size_t r : rows) {
            const auto it = attrition.find(matrix.student_ids[r]);
            if (it != attrition.end()) {
                ++with_label;
                attrited += static_cast<std::size_t>(it->second);
            }
        }
        if (with_label > 0) {
            p.attrition_known = true;
            p.attrition_rate = static_cast<double>(attrited) / static_cast<double>(with_label);
        }
        profiles.push_back(std::move(p));
    }
    return profiles;
}

nlohmann::json profiles_json(const std::vector<ArchetypeProfile>& profiles) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : profiles) {
        arr.push_back({{"archetype_id", p.archetype_id},
                       {"member_count", p.member_count},
                       {"feature_mean", p.feature_mean},
                       {"feature_z", p.feature_z},
                       {"attrition_rate", p.attrition_known ? nlohmann::json(p.attrition_rate)
                                                            : nlohmann::json()},
                       {"narrative", p.narrative}});
    }
    return nlohmann::json{{"archetypes", arr}};
}

}  // namespace capire

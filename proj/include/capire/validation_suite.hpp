#pragma once

#include "capire/archetypes.hpp"
#include "capire/forest.hpp"
#include "capire/stats.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace capire {

// ---- bootstrap stability (resample students, rerun embed + dbscan) ----------

struct StabilityReport {
    int resamples = 0;
    int skipped = 0;  // resamples that collapsed below n_neighbors distinct rows
    std::vector<double> ari;
    double mean = 0.0;
    double sd = 0.0;
    double ci_lo = 0.0;  // 2.5 percentile
    double ci_hi = 0.0;  // 97.5 percentile

    nlohmann::json to_json() const;
};

// `analysis_unscaled`: imputed rows restricted to the clustering columns,
// before standardization; each resample refits scaling, re-embeds and
// re-clusters, then scores ARI against the reference raw labels on the
// distinct resampled rows (duplicates collapse to one vote).
StabilityReport bootstrap_stability(const Matrix& analysis_unscaled,
                                    const std::vector<int>& reference_raw_labels,
                                    const EmbeddingParams& embedding, const DbscanConfig& dbscan_cfg,
                                    int resamples, std::uint64_t seed);

// ---- permutation significance ------------------------------------------------

struct PermutationReport {
    double observed = 0.0;
    std::vector<double> null_scores;
    double null_mean = 0.0;
    double p_value = 1.0;  // (1 + #{null >= observed}) / (P + 1)

    nlohmann::json to_json() const;
};

// Labels permute uniformly among clustered points; noise stays fixed.
PermutationReport permutation_silhouette_test(const Matrix& coordinates,
                                              const std::vector<int>& labels, int permutations,
                                              std::uint64_t seed);

// ---- temporal stability --------------------------------------------------------

struct ArchetypeDelta {
    int archetype_id = 0;
    std::size_t period1_members = 0;
    std::size_t period2_members = 0;
    double period1_attrition = 0.0;
    double period2_attrition = 0.0;
    double delta = 0.0;  // percentage points, period2 - period1
    bool defined = false;
};

struct TemporalReport {
    int split_year = 0;
    std::vector<ArchetypeDelta> deltas;
    double max_abs_delta = 0.0;  // over defined archetypes
    int undefined_archetypes = 0;

    nlohmann::json to_json() const;
};

// Clusters period-1 students (cohort_year < split_year), projects period-2
// students onto period-1 archetypes by nearest neighbor in the standardized
// feature space, and compares ex-post attrition per archetype.
TemporalReport temporal_stability(const Matrix& analysis_unscaled,
                                  const std::vector<int>& cohort_years,
                                  const std::vector<int>& attrition_flags, int split_year,
                                  const EmbeddingParams& embedding, const DbscanConfig& dbscan_cfg,
                                  std::size_t min_archetype_size);

// ---- hyperparameter sensitivity -------------------------------------------------

struct SensitivityCell {
    int n_neighbors = 0;
    double eps_factor = 1.0;
    int min_pts = 0;
    double ari = 0.0;
    bool ok = false;
    std::string error;
};

struct SensitivityReport {
    std::vector<SensitivityCell> cells;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    int failed_cells = 0;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

SensitivityReport hyperparameter_sensitivity(const Matrix& analysis_std,
                                             const std::vector<int>& reference_raw_labels,
                                             double reference_eps, const EmbeddingParams& embedding,
                                             const SensitivityGrid& grid);

// ---- DBSCAN noise analysis -----------------------------------------------------

struct NoiseFeatureTest {
    std::string feature;
    double mann_whitney_u = 0.0;
    double mann_whitney_p = 1.0;
    double levene_w = 0.0;
    double levene_p = 1.0;
    double noise_sd = 0.0;
    double clustered_sd = 0.0;
    std::size_t n_noise = 0;
    std::size_t n_clustered = 0;
};

struct ReclusterSolution {
    std::string method;  // kmeans | agglomerative
    int k = 0;
    double silhouette = 0.0;
    std::vector<std::size_t> sizes;
};

struct NoiseAnalysisReport {
    bool skipped = false;
    std::string skip_reason;
    std::vector<NoiseFeatureTest> tests;
    std::vector<ReclusterSolution> reclustering;

    nlohmann::json to_json() const;
};

// Raw-unit feature comparisons (Mann-Whitney + Brown-Forsythe Levene) between
// the residual group and clustered students, then k-means / average-linkage
// re-clustering of the residual rows with k chosen by silhouette over 2..6.
NoiseAnalysisReport noise_analysis(const FeatureTable& matrix, const Matrix& analysis_std,
                                   const std::vector<int>& labels,
                                   const std::vector<std::string>& analysis_features,
                                   int min_group, std::uint64_t seed);

// ---- split discrepancy diagnostic -----------------------------------------------

struct SplitDiscrepancyReport {
    double random_split_accuracy = 0.0;
    double cohort_split_accuracy = 0.0;
    double gap = 0.0;
    bool cohort_split_possible = true;
    std::string note;

    nlohmann::json to_json() const;
};

SplitDiscrepancyReport split_discrepancy_diagnostic(const Matrix& x, const std::vector<int>& y,
                                                    const std::vector<int>& cohort_years,
                                                    double train_fraction, int split_year,
                                                    const ForestConfig& forest, std::uint64_t seed);

}  // namespace capire

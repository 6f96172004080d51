#pragma once

#include "capire/features.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <string>
#include <vector>

namespace capire {

// ---- imputation --------------------------------------------------------------
//
// Level policies:
//   N1 -> within-region median (region = postcode; global median fallback)
//   N2 -> fit-population mean
//   N3 -> never (absence is informative)
//   N4 -> passthrough (the per-term load series interpolation happens before
//         feature computation; a missing N4 feature stays missing)
// Every filled cell has its companion indicator already set to 1 during
// extraction.

struct ImputeStats {
    // per column: region -> median ("" = global), or mean for train_mean
    std::map<std::string, std::map<std::string, double>> region_medians;
    std::map<std::string, double> train_means;
    std::size_t imputations_performed = 0;

    nlohmann::json to_json() const;
};

// Fills N1/N2 cells in place. `region_of_row` gives each row's region key
// ("" when unknown). Stats are fitted on the rows of `table` itself (the fit
// population of this run) unless `frozen` is supplied.
ImputeStats impute(FeatureTable& table, const Dictionary& dict,
                   const std::vector<std::string>& region_of_row,
                   const ImputeStats* frozen = nullptr);

// ---- standardization -----------------------------------------------------------

struct ScalingStats {
    std::vector<std::string> columns;
    std::vector<double> mean;
    std::vector<double> stddev;       // population std
    std::vector<bool> constant;       // std == 0: passed through unscaled

    nlohmann::json to_json() const;
    static ScalingStats from_json(const nlohmann::json& j);
};

ScalingStats standardize_fit(const Matrix& train_rows, const std::vector<std::string>& columns);
// Pure affine map; missing cells stay missing. Throws on column mismatch.
Matrix standardize_apply(const ScalingStats& stats, const Matrix& rows,
                         const std::vector<std::string>& columns);

// ---- linear interpolation over a term series (N4 preprocessing) ---------------
// Interior NaNs are linearly interpolated; leading/trailing NaNs take the
// nearest defined value; an all-NaN series is returned unchanged.
std::vector<double> interpolate_series(std::vector<double> series);

// ---- serialization / manifest ---------------------------------------------------

// Header = student_id + column names; cells as %.17g, missing = empty.
std::string serialize_matrix(const FeatureTable& table);
FeatureTable parse_matrix(const std::string& text);

struct RunManifest {
    std::string pipeline_version = "1.0.0";
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string timestamp;  // excluded from idempotence comparisons
    std::size_t students_in = 0;
    std::size_t students_featurized = 0;
    std::size_t zero_enrolment_students = 0;
    std::size_t feature_count = 0;      // dictionary features in the matrix
    std::size_t indicator_count = 0;
    std::vector<int> cohorts;
    std::map<std::string, double> column_missing_fraction;  // post-imputation
    std::vector<std::string> clustering_excluded_columns;   // any-missing columns
    std::size_t imputations_performed = 0;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

struct AssemblyResult {
    FeatureTable matrix;        // imputed, unstandardized
    ScalingStats scaling;       // fitted on the matrix rows
    ImputeStats impute_stats;
    RunManifest manifest;
};

// Imputes, fits scaling, decides the clustering column exclusion list and
// fills the manifest. Columns containing any missing cell after imputation
// (never-imputed N3 features and their dependants) are listed for exclusion
// from clustering/classification.
AssemblyResult assemble(FeatureTable table, const Dictionary& dict, const Dataset& data,
                        const std::string& config_hash, std::uint64_t seed);

// Rows x admissible-and-complete columns, standardized: the matrix handed to
// embedding, clustering and the classifier.
Matrix analysis_matrix(const AssemblyResult& assembly, std::vector<std::string>* used_columns);

}  // namespace capire

#pragma once

#include "capire/assembly.hpp"
#include "capire/embedding.hpp"
#include "capire/synth.hpp"
#include "capire/vot.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace capire {

struct InputPaths {
    std::string students, enrolments, courses, curricula, calendar;
    std::string graduations;  // optional
};

struct DbscanConfig {
    double eps = 0.0;  // <= 0: use the k-distance suggestion
    int min_pts = 10;
};

struct SensitivityGrid {
    std::vector<int> n_neighbors{10, 15, 20};
    std::vector<double> eps_factor{0.75, 1.0, 1.25};
    std::vector<int> min_pts{7, 10, 15};
};

struct ValidationConfig {
    int bootstrap_resamples = 100;
    int permutation_count = 100;
    int temporal_split_year = 0;  // 0 = median cohort year
    SensitivityGrid sensitivity;
    std::vector<std::string> noise_features{"age_at_entry", "ifc_mean", "max_gap"};
    int noise_min_group = 10;
    int probe_sets = 50;
    int probe_injections = 100;
};

struct ClassifierConfig {
    std::string split_mode = "stratified_random";  // or cohort_temporal
    double train_fraction = 0.70;
    int split_year = 0;  // cohort_temporal only; 0 = median cohort year
    int cv_folds = 5;
    int n_trees = 200;
    int max_depth = 0;  // 0 = unlimited
    int min_leaf = 1;
    // tuning grid; empty vector = keep the single configured value
    std::vector<int> tune_n_trees;
    std::vector<int> tune_max_depth;
    std::vector<int> tune_min_leaf;
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    InputPaths inputs;
    std::optional<synth::GeneratorConfig> generator;
    std::string dictionary_path;  // empty = builtin 44-feature dictionary
    VotConfig vot;
    double grade_min = 0.0;
    double grade_max = 10.0;
    double friction_w1 = 1.0;
    double friction_w2 = 0.5;
    double filter_threshold = 0.5;
    ExtractParams extract;
    EmbeddingParams embedding;
    DbscanConfig dbscan;
    std::size_t min_archetype_size = 40;
    ValidationConfig validation;
    ClassifierConfig classifier;

    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::string& path);
    // Typed round-trip with sorted keys and normalized numbers: the hashing
    // canonical form. Key order in the source file cannot change the digest.
    nlohmann::json to_canonical_json() const;
    std::string hash() const;  // sha256 of the canonical serialization
};

}  // namespace capire

#pragma once

#include "capire/archetypes.hpp"
#include "capire/config.hpp"
#include "capire/validation.hpp"
#include "capire/validation_suite.hpp"

#include <string>

namespace capire::pipeline {

// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* kValidationReport = "validation_report.json";
inline constexpr const char* kLabels = "labels.csv";
inline constexpr const char* kFriction = "friction.csv";
inline constexpr const char* kFeaturesRaw = "features_raw.csv";
inline constexpr const char* kMatrix = "matrix.csv";
inline constexpr const char* kScalingStats = "scaling_stats.json";
inline constexpr const char* kImputeStats = "impute_stats.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kAudit = "audit.json";
inline constexpr const char* kEmbedding = "embedding.csv";
inline constexpr const char* kClusters = "clusters.csv";
inline constexpr const char* kIndices = "indices.json";
inline constexpr const char* kProfiles = "profiles.json";
inline constexpr const char* kStability = "stability.json";
inline constexpr const char* kPermutation = "permutation.json";
inline constexpr const char* kTemporal = "temporal.json";
inline constexpr const char* kSensitivityCsv = "sensitivity.csv";
inline constexpr const char* kSensitivityJson = "sensitivity.json";
inline constexpr const char* kNoiseAnalysis = "noise_analysis.json";
inline constexpr const char* kSplitDiscrepancy = "split_discrepancy.json";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kEvalReport = "eval_report.json";
inline constexpr const char* kImportance = "importance.csv";
inline constexpr const char* kPredictions = "predictions.csv";
inline constexpr const char* kProbe = "probe.json";
inline constexpr const char* kGroundTruth = "ground_truth.csv";
}  // namespace artifact

struct Context {
    PipelineConfig config;
    std::string config_hash;
    bool force = false;
    bool quiet = false;

    std::string out_path(const std::string& name) const;
    std::string data_path(const std::string& name) const;  // generated input files
    InputPaths effective_inputs() const;
};

Context make_context(PipelineConfig config, bool force = false, bool quiet = false);

// Shared in-memory path: dataset -> dictionary/friction/extraction/assembly.
// The serialized matrix is byte-identical to the staged extract+assemble
// file route (the %.17g round-trip is exact).
Dictionary load_dictionary(const PipelineConfig& config);
AssemblyResult build_assembly(const Dataset& data, const PipelineConfig& config,
                              const std::string& config_hash);
std::string build_matrix_text(const Dataset& data, const PipelineConfig& config);

ParsedTables load_inputs(const Context& ctx);

// Stage runners. Each writes its artifacts plus the updated manifest and
// throws DependencyError when a required upstream artifact is absent.
void run_synth(const Context& ctx);
ValidationReport run_validate(const Context& ctx);
void run_extract(const Context& ctx);
void run_assemble(const Context& ctx);
void run_audit(const Context& ctx);
void run_cluster(const Context& ctx);
void run_validate_clusters(const Context& ctx);
void run_train(const Context& ctx);
void run_evaluate(const Context& ctx);
void run_predict(const Context& ctx);
ProbeReport run_probe(const Context& ctx);

// validate -> extract -> assemble -> audit -> cluster -> validate-clusters ->
// train -> evaluate (synth first when the config carries a generator block).
// Byte-identical to running the chain one subcommand at a time.
void run_all(const Context& ctx);

}  // namespace capire::pipeline

#include "capire/pipeline.hpp"

#include "capire/rng.hpp"
#include "capire/synth.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace capire::pipeline {

namespace fs = std::filesystem;

std::string Context::out_path(const std::string& name) const {
    return (fs::path(config.out_dir) / name).string();
}

std::string Context::data_path(const std::string& name) const {
    return (fs::path(config.out_dir) / "data" / name).string();
}

InputPaths Context::effective_inputs() const {
    InputPaths in = config.inputs;
    if (config.generator) {
        if (in.students.empty()) in.students = data_path("students.csv");
        if (in.enrolments.empty()) in.enrolments = data_path("enrolments.csv");
        if (in.courses.empty()) in.courses = data_path("courses.csv");
        if (in.curricula.empty()) in.curricula = data_path("curricula.csv");
        if (in.calendar.empty()) in.calendar = data_path("calendar.csv");
        if (in.graduations.empty()) in.graduations = data_path("graduations.csv");
    }
    return in;
}

Context make_context(PipelineConfig config, bool force, bool quiet) {
    Context ctx;
    ctx.config_hash = config.hash();
    ctx.config = std::move(config);
    ctx.force = force;
    ctx.quiet = quiet;
    return ctx;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("cannot write '" + path + "'");
    out << text;
}

std::string read_text(const std::string& path, const std::string& produced_by) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError(path, produced_by);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const std::string& path, const std::string& produced_by) {
    std::istringstream in(read_text(path, produced_by));
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(path + ": " + e.what());
    }
    return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// manifest.json: one per output directory, refreshed by every stage. The
// timestamp is the only nondeterministic field; idempotence comparisons drop
// it.
void update_manifest(const Context& ctx, const std::string& stage,
                     const RunManifest* core = nullptr) {
    nlohmann::json m = nlohmann::json::object();
    const std::string path = ctx.out_path(artifact::kManifest);
    if (fs::exists(path)) m = read_json(path, "manifest");
    if (m.contains("config_hash") && m["config_hash"].get<std::string>() != ctx.config_hash) {
        // a stale directory from another config is an operator error
        if (!ctx.force)
            throw ConfigError("output directory holds artifacts for config hash " +
                              m["config_hash"].get<std::string>() + ", not " + ctx.config_hash +
                              "; use --force to overwrite");
        m = nlohmann::json::object();
    }
    if (core) {
        m.update(core->to_json());
    } else {
        m["config_hash"] = ctx.config_hash;
        if (!m.contains("seed")) m["seed"] = ctx.config.seed;
        if (!m.contains("pipeline_version")) m["pipeline_version"] = "1.0.0";
    }
    std::set<std::string> stages;
    if (m.contains("stages_completed")) {
        for (const auto& s : m["stages_completed"]) stages.insert(s.get<std::string>());
    }
    stages.insert(stage);
    m["stages_completed"] = stages;
    m["timestamp"] = utc_timestamp();
    write_json(path, m);
}

void say(const Context& ctx, const std::string& message) {
    if (!ctx.quiet) std::cout << message << "\n";
}

csv::Table labels_table(const std::vector<OutcomeLabel>& labels) {
    csv::Table t;
    t.header = {"student_id", "attrition_flag", "label_basis", "horizon_terms"};
    for (const auto& l : labels) {
        t.rows.push_back({l.student_id, std::to_string(l.attrition_flag), to_string(l.label_basis),
                          std::to_string(l.horizon_terms)});
    }
    return t;
}

struct LoadedLabels {
    std::vector<OutcomeLabel> labels;
    std::unordered_map<std::string, int> attrition_of;
};

LoadedLabels load_labels(const Context& ctx) {
    csv::Table t = csv::read_file(ctx.out_path(artifact::kLabels));
    LoadedLabels out;
    const int sid = t.require_column("student_id");
    const int flag = t.require_column("attrition_flag");
    const int basis = t.require_column("label_basis");
    for (const auto& row : t.rows) {
        OutcomeLabel l;
        l.student_id = row[static_cast<std::size_t>(sid)];
        l.attrition_flag = std::stoi(row[static_cast<std::size_t>(flag)]);
        const std::string& b = row[static_cast<std::size_t>(basis)];
        l.label_basis = b == "graduated"      ? LabelBasis::Graduated
                        : b == "still_enrolled" ? LabelBasis::StillEnrolled
                                                : LabelBasis::Departed;
        out.attrition_of[l.student_id] = l.attrition_flag;
        out.labels.push_back(std::move(l));
    }
    return out;
}

void require_artifact(const Context& ctx, const char* name, const std::string& produced_by) {
    if (!fs::exists(ctx.out_path(name))) throw DependencyError(name, produced_by);
}

void require_validation_passed(const Context& ctx) {
    const nlohmann::json report = read_json(ctx.out_path(artifact::kValidationReport), "validate");
    if (report.value("verdict", "fail") != "pass") {
        throw ConfigError("dataset failed validation; fix the inputs and rerun `capire validate`");
    }
}

// matrix.csv + scaling_stats.json + manifest exclusions -> the standardized
// analysis view every downstream consumer shares
struct AnalysisView {
    FeatureTable table;          // imputed matrix as stored
    Matrix unscaled;             // analysis columns only
    Matrix standardized;         // same, z-scored with the frozen stats
    std::vector<std::string> columns;
};

AnalysisView load_analysis(const Context& ctx) {
    AnalysisView view;
    view.table = parse_matrix(read_text(ctx.out_path(artifact::kMatrix), "assemble"));
    const ScalingStats stats =
        ScalingStats::from_json(read_json(ctx.out_path(artifact::kScalingStats), "assemble"));
    const RunManifest manifest =
        RunManifest::from_json(read_json(ctx.out_path(artifact::kManifest), "assemble"));
    const std::set<std::string> excluded(manifest.clustering_excluded_columns.begin(),
                                         manifest.clustering_excluded_columns.end());

    std::vector<Eigen::Index> keep;
    ScalingStats sub;
    for (std::size_t c = 0; c < view.table.columns.size(); ++c) {
        if (excluded.count(view.table.columns[c])) continue;
        keep.push_back(static_cast<Eigen::Index>(c));
        view.columns.push_back(view.table.columns[c]);
        // scaling stats are stored in matrix column order
        sub.columns.push_back(stats.columns[c]);
        sub.mean.push_back(stats.mean[c]);
        sub.stddev.push_back(stats.stddev[c]);
        sub.constant.push_back(stats.constant[c]);
    }
    view.unscaled.resize(view.table.values.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        view.unscaled.col(static_cast<Eigen::Index>(i)) = view.table.values.col(keep[i]);
    }
    view.standardized = standardize_apply(sub, view.unscaled, view.columns);
    // residual missing cells in analysis columns map to the column mean
    for (Eigen::Index r = 0; r < view.standardized.rows(); ++r) {
        for (Eigen::Index c = 0; c < view.standardized.cols(); ++c) {
            if (is_missing(view.standardized(r, c))) view.standardized(r, c) = 0.0;
        }
    }
    return view;
}

struct LoadedClusters {
    std::vector<int> labels;      // filtered, residual = -1
    std::vector<int> raw_labels;  // dbscan output
    std::vector<std::string> student_ids;
};

LoadedClusters load_clusters(const Context& ctx) {
    csv::Table t = csv::read_file(ctx.out_path(artifact::kClusters));
    LoadedClusters out;
    const int sid = t.require_column("student_id");
    const int lab = t.require_column("label");
    const int raw = t.require_column("raw_label");
    for (const auto& row : t.rows) {
        out.student_ids.push_back(row[static_cast<std::size_t>(sid)]);
        out.labels.push_back(std::stoi(row[static_cast<std::size_t>(lab)]));
        out.raw_labels.push_back(std::stoi(row[static_cast<std::size_t>(raw)]));
    }
    return out;
}

std::unordered_map<std::string, int> cohort_year_by_student(const ParsedTables& tables) {
    std::unordered_map<std::string, int> out;
    for (const auto& s : tables.dataset.students) out[s.student_id] = s.cohort_year;
    return out;
}

int default_split_year(const std::vector<int>& years) {
    std::vector<int> sorted = years;
    std::sort(sorted.begin(), sorted.end());
    return sorted[sorted.size() / 2];
}

}  // namespace

Dictionary load_dictionary(const PipelineConfig& config) {
    if (config.dictionary_path.empty()) return builtin_dictionary();
    return Dictionary::load(config.dictionary_path);
}

AssemblyResult build_assembly(const Dataset& data, const PipelineConfig& config,
                              const std::string& config_hash) {
    const Dictionary dict = load_dictionary(config);
    const CourseFrictionTable friction =
        build_friction_table(data.students, data.enrolments, config.vot, config.friction_w1,
                             config.friction_w2, config.filter_threshold);
    FeatureTable table = extract_features(data, dict, config.vot, friction, config.extract);
    return assemble(std::move(table), dict, data, config_hash, config.seed);
}

std::string build_matrix_text(const Dataset& data, const PipelineConfig& config) {
    return serialize_matrix(build_assembly(data, config, config.hash()).matrix);
}

ParsedTables load_inputs(const Context& ctx) {
    const InputPaths in = ctx.effective_inputs();
    for (const auto& [path, produced_by] :
         {std::pair<std::string, std::string>{in.students, "synth"},
          {in.enrolments, "synth"},
          {in.courses, "synth"},
          {in.curricula, "synth"},
          {in.calendar, "synth"}}) {
        if (path.empty()) throw ConfigError("config.inputs is incomplete and no generator is set");
        if (!fs::exists(path)) {
            if (ctx.config.generator) throw DependencyError(path, produced_by);
            throw IngestError("input file '" + path + "' does not exist");
        }
    }
    const csv::Table students = csv::read_file(in.students);
    const csv::Table enrolments = csv::read_file(in.enrolments);
    const csv::Table courses = csv::read_file(in.courses);
    const csv::Table curricula = csv::read_file(in.curricula);
    const csv::Table calendar = csv::read_file(in.calendar);
    if (!in.graduations.empty() && fs::exists(in.graduations)) {
        const csv::Table graduations = csv::read_file(in.graduations);
        return parse_tables(students, enrolments, courses, curricula, calendar, &graduations);
    }
    return parse_tables(students, enrolments, courses, curricula, calendar);
}

void run_synth(const Context& ctx) {
    if (!ctx.config.generator) throw ConfigError("synth: config has no 'generator' block");
    synth::GeneratorConfig gen = *ctx.config.generator;
    const synth::GeneratedCohort cohort = synth::generate(gen);
    fs::create_directories(fs::path(ctx.config.out_dir) / "data");
    csv::write_file(ctx.data_path("students.csv"), to_table(cohort.dataset.students));
    csv::write_file(ctx.data_path("enrolments.csv"), to_table(cohort.dataset.enrolments));
    csv::write_file(ctx.data_path("courses.csv"), to_table(cohort.dataset.courses));
    csv::write_file(ctx.data_path("curricula.csv"), to_table(cohort.dataset.curricula));
    csv::write_file(ctx.data_path("calendar.csv"), to_table(cohort.dataset.calendar));
    csv::write_file(ctx.data_path("graduations.csv"), to_table(cohort.dataset.graduations));
    csv::write_file(ctx.out_path(artifact::kGroundTruth),
                    synth::ground_truth_table(cohort.ground_truth));
    update_manifest(ctx, "synth");
    say(ctx, "synth: " + std::to_string(cohort.dataset.students.size()) + " students, " +
                 std::to_string(cohort.dataset.enrolments.size()) + " enrolments");
}

ValidationReport run_validate(const Context& ctx) {
    const ParsedTables tables = load_inputs(ctx);
    ValidationParams params;
    params.grade_min = ctx.config.grade_min;
    params.grade_max = ctx.config.grade_max;
    const ValidationReport report = validate_dataset(tables, params);
    write_json(ctx.out_path(artifact::kValidationReport), report.to_json());
    update_manifest(ctx, "validate");
    say(ctx, std::string("validate: ") + (report.pass ? "pass" : "fail") + " (" +
                 std::to_string(report.hard_count()) + " hard violations)");
    return report;
}

void run_extract(const Context& ctx) {
    require_artifact(ctx, artifact::kValidationReport, "validate");
    require_validation_passed(ctx);
    const ParsedTables tables = load_inputs(ctx);
    const Dataset& data = tables.dataset;
    const Dictionary dict = load_dictionary(ctx.config);
    const CourseFrictionTable friction =
        build_friction_table(data.students, data.enrolments, ctx.config.vot, ctx.config.friction_w1,
                             ctx.config.friction_w2, ctx.config.filter_threshold);
    const FeatureTable table =
        extract_features(data, dict, ctx.config.vot, friction, ctx.config.extract);
    write_text(ctx.out_path(artifact::kFeaturesRaw), serialize_matrix(table));

    // course friction artifact
    {
        csv::Table t;
        t.header = {"course_id", "attempted", "dropped", "failed", "ifc", "is_filter"};
        std::vector<std::string> ids;
        for (const auto& [id, cf] : friction.by_course) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) {
            const CourseFriction& cf = friction.by_course.at(id);
            t.rows.push_back({id, std::to_string(cf.attempted), std::to_string(cf.dropped),
                              std::to_string(cf.failed), format_double(cf.ifc),
                              cf.is_filter ? "1" : "0"});
        }
        csv::write_file(ctx.out_path(artifact::kFriction), t);
    }

    // outcome labels live beside, never inside, the feature path
    const std::vector<OutcomeLabel> labels =
        derive_outcome_labels(data.students, data.enrolments, data.graduations,
                              ctx.config.vot.horizon, ctx.config.vot.grace);
    csv::write_file(ctx.out_path(artifact::kLabels), labels_table(labels));
    update_manifest(ctx, "extract");
    say(ctx, "extract: " + std::to_string(table.student_ids.size()) + " students x " +
                 std::to_string(table.columns.size()) + " columns");
}

void run_assemble(const Context& ctx) {
    require_artifact(ctx, artifact::kFeaturesRaw, "extract");
    const ParsedTables tables = load_inputs(ctx);
    const Dictionary dict = load_dictionary(ctx.config);
    FeatureTable table = parse_matrix(read_text(ctx.out_path(artifact::kFeaturesRaw), "extract"));
    for (const auto& def : dict.features) {
        if (table.column_index(def.name) >= 0) table.level_of[def.name] = def.level;
    }
    const std::string matrix_path = ctx.out_path(artifact::kMatrix);
    if (fs::exists(matrix_path) && !ctx.force) {
        throw ConfigError("output '" + matrix_path + "' exists; use --force to overwrite");
    }
    AssemblyResult result = assemble(std::move(table), dict, tables.dataset, ctx.config_hash,
                                     ctx.config.seed);
    write_text(matrix_path, serialize_matrix(result.matrix));
    write_json(ctx.out_path(artifact::kScalingStats), result.scaling.to_json());
    write_json(ctx.out_path(artifact::kImputeStats), result.impute_stats.to_json());
    update_manifest(ctx, "assemble", &result.manifest);
    say(ctx, "assemble: matrix " + std::to_string(result.matrix.student_ids.size()) + " x " +
                 std::to_string(result.matrix.columns.size()) + ", " +
                 std::to_string(result.manifest.clustering_excluded_columns.size()) +
                 " columns excluded from clustering");
}

void run_audit(const Context& ctx) {
    const Dictionary dict = load_dictionary(ctx.config);
    const EligibilityAudit audit = audit_eligibility(dict, ctx.config.vot);
    write_json(ctx.out_path(artifact::kAudit), audit.to_json());
    update_manifest(ctx, "audit");
    say(ctx, "audit: " + std::to_string(audit.admissible_names().size()) + "/" +
                 std::to_string(audit.tags.size()) + " features vot_admissible");
}

void run_cluster(const Context& ctx) {
    require_artifact(ctx, artifact::kMatrix, "assemble");
    require_artifact(ctx, artifact::kLabels, "extract");
    const AnalysisView view = load_analysis(ctx);

    EmbeddingParams embedding = ctx.config.embedding;
    embedding.seed = derive_seed(ctx.config.seed, "embed");
    const ClusterSolution solution = capire::run_cluster(
        view.standardized, embedding, ctx.config.dbscan, ctx.config.min_archetype_size);

    {
        csv::Table t;
        t.header = {"student_id"};
        for (int d = 0; d < embedding.dims; ++d) t.header.push_back("e" + std::to_string(d));
        for (std::size_t r = 0; r < view.table.student_ids.size(); ++r) {
            std::vector<std::string> row{view.table.student_ids[r]};
            for (int d = 0; d < embedding.dims; ++d) {
                row.push_back(format_double(solution.coordinates(static_cast<Eigen::Index>(r), d)));
            }
            t.rows.push_back(std::move(row));
        }
        csv::write_file(ctx.out_path(artifact::kEmbedding), t);
    }
    {
        csv::Table t;
        t.header = {"student_id", "label", "raw_label", "retained"};
        for (std::size_t r = 0; r < view.table.student_ids.size(); ++r) {
            t.rows.push_back({view.table.student_ids[r], std::to_string(solution.labels[r]),
                              std::to_string(solution.raw_labels[r]),
                              solution.labels[r] >= 0 ? "1" : "0"});
        }
        csv::write_file(ctx.out_path(artifact::kClusters), t);
    }
    write_json(ctx.out_path(artifact::kIndices),
               solution.indices_json(view.table.student_ids.size()));

    const LoadedLabels labels = load_labels(ctx);
    const auto profiles = profile_archetypes(view.table, solution.labels, labels.labels);
    write_json(ctx.out_path(artifact::kProfiles), profiles_json(profiles));
    update_manifest(ctx, "cluster");
    say(ctx, "cluster: " + std::to_string(solution.retained_ids.size()) + " archetypes retained, " +
                 std::to_string(solution.residual_count) + " residual (eps " +
                 format_double(solution.eps) + ")");
}

void run_validate_clusters(const Context& ctx) {
    require_artifact(ctx, artifact::kClusters, "cluster");
    require_artifact(ctx, artifact::kMatrix, "assemble");
    const AnalysisView view = load_analysis(ctx);
    const LoadedClusters clusters = load_clusters(ctx);
    const LoadedLabels labels = load_labels(ctx);
    const ParsedTables tables = load_inputs(ctx);
    const nlohmann::json indices = read_json(ctx.out_path(artifact::kIndices), "cluster");
    const double reference_eps = indices.at("eps").get<double>();

    EmbeddingParams embedding = ctx.config.embedding;
    embedding.seed = derive_seed(ctx.config.seed, "embed");

    // bootstrap stability
    const StabilityReport stability =
        bootstrap_stability(view.unscaled, clusters.raw_labels, embedding, ctx.config.dbscan,
                            ctx.config.validation.bootstrap_resamples,
                            derive_seed(ctx.config.seed, "stability"));
    write_json(ctx.out_path(artifact::kStability), stability.to_json());

    // permutation significance on the shipped embedding
    {
        csv::Table e = csv::read_file(ctx.out_path(artifact::kEmbedding));
        Matrix coords(static_cast<Eigen::Index>(e.rows.size()),
                      static_cast<Eigen::Index>(e.header.size() - 1));
        for (std::size_t r = 0; r < e.rows.size(); ++r) {
            for (std::size_t c = 1; c < e.header.size(); ++c) {
                coords(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) =
                    std::stod(e.rows[r][c]);
            }
        }
        nlohmann::json pj;
        try {
            const PermutationReport perm = permutation_silhouette_test(
                coords, clusters.labels, ctx.config.validation.permutation_count,
                derive_seed(ctx.config.seed, "permutation"));
            pj = perm.to_json();
        } catch (const PreconditionError& e) {
            pj = {{"skipped", true}, {"reason", e.what()}};
        }
        write_json(ctx.out_path(artifact::kPermutation), pj);
    }

    // cohort metadata joined by student id
    const auto cohort_of = cohort_year_by_student(tables);
    std::vector<int> years, flags;
    years.reserve(view.table.student_ids.size());
    for (const auto& sid : view.table.student_ids) {
        years.push_back(cohort_of.count(sid) ? cohort_of.at(sid) : 0);
        flags.push_back(labels.attrition_of.count(sid) ? labels.attrition_of.at(sid) : 0);
    }
    int split_year = ctx.config.validation.temporal_split_year;
    if (split_year <= 0) split_year = default_split_year(years);

    nlohmann::json tj;
    try {
        const TemporalReport temporal =
            temporal_stability(view.unscaled, years, flags, split_year, embedding,
                               ctx.config.dbscan, ctx.config.min_archetype_size);
        tj = temporal.to_json();
    } catch (const std::exception& e) {
        tj = {{"skipped", true}, {"reason", e.what()}};
    }
    write_json(ctx.out_path(artifact::kTemporal), tj);

    // hyperparameter sensitivity vs the reference labels
    const SensitivityReport sensitivity = hyperparameter_sensitivity(
        view.standardized, clusters.raw_labels, reference_eps, embedding,
        ctx.config.validation.sensitivity);
    write_text(ctx.out_path(artifact::kSensitivityCsv), sensitivity.to_csv());
    write_json(ctx.out_path(artifact::kSensitivityJson), sensitivity.to_json());

    // residual-group analysis
    const NoiseAnalysisReport noise = noise_analysis(
        view.table, view.standardized, clusters.labels, ctx.config.validation.noise_features,
        ctx.config.validation.noise_min_group, derive_seed(ctx.config.seed, "noise"));
    write_json(ctx.out_path(artifact::kNoiseAnalysis), noise.to_json());

    // split-regime discrepancy via the classifier
    {
        std::vector<std::size_t> rows;
        std::vector<int> y;
        for (std::size_t r = 0; r < clusters.labels.size(); ++r) {
            if (clusters.labels[r] >= 0) {
                rows.push_back(r);
                y.push_back(clusters.labels[r]);
            }
        }
        nlohmann::json dj;
        if (y.size() >= 20 && std::set<int>(y.begin(), y.end()).size() >= 2) {
            Matrix x(static_cast<Eigen::Index>(rows.size()), view.standardized.cols());
            std::vector<int> row_years;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                x.row(static_cast<Eigen::Index>(i)) =
                    view.standardized.row(static_cast<Eigen::Index>(rows[i]));
                row_years.push_back(years[rows[i]]);
            }
            ForestConfig forest;
            forest.n_trees = std::min(ctx.config.classifier.n_trees, 100);
            forest.max_depth = ctx.config.classifier.max_depth;
            forest.min_leaf = ctx.config.classifier.min_leaf;
            int cls_split_year = ctx.config.classifier.split_year;
            if (cls_split_year <= 0) cls_split_year = default_split_year(row_years);
            try {
                const SplitDiscrepancyReport report = split_discrepancy_diagnostic(
                    x, y, row_years, ctx.config.classifier.train_fraction, cls_split_year, forest,
                    derive_seed(ctx.config.seed, "discrepancy"));
                dj = report.to_json();
            } catch (const std::exception& e) {
                dj = {{"skipped", true}, {"reason", e.what()}};
            }
        } else {
            dj = {{"skipped", true}, {"reason", "not enough labelled students"}};
        }
        write_json(ctx.out_path(artifact::kSplitDiscrepancy), dj);
    }

    update_manifest(ctx, "validate-clusters");
    say(ctx, "validate-clusters: bootstrap mean ARI " + format_double(stability.mean));
}

namespace {

struct ClassifierData {
    Matrix x;
    std::vector<int> y;
    std::vector<std::string> student_ids;
    std::vector<int> cohort_years;
};

// retained-archetype rows only; residual students are excluded from training
ClassifierData classifier_rows(const AnalysisView& view, const LoadedClusters& clusters,
                               const std::unordered_map<std::string, int>& cohort_of) {
    if (clusters.student_ids != view.table.student_ids)
        throw PreconditionError("clusters.csv row order does not match matrix.csv");
    ClassifierData data;
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < clusters.labels.size(); ++r) {
        if (clusters.labels[r] >= 0) rows.push_back(r);
    }
    data.x.resize(static_cast<Eigen::Index>(rows.size()), view.standardized.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        data.x.row(static_cast<Eigen::Index>(i)) =
            view.standardized.row(static_cast<Eigen::Index>(rows[i]));
        data.y.push_back(clusters.labels[rows[i]]);
        data.student_ids.push_back(view.table.student_ids[rows[i]]);
        const auto it = cohort_of.find(view.table.student_ids[rows[i]]);
        data.cohort_years.push_back(it == cohort_of.end() ? 0 : it->second);
    }
    return data;
}

}  // namespace

void run_train(const Context& ctx) {
    require_artifact(ctx, artifact::kClusters, "cluster");
    require_artifact(ctx, artifact::kMatrix, "assemble");
    const AnalysisView view = load_analysis(ctx);
    const LoadedClusters clusters = load_clusters(ctx);
    const ParsedTables tables = load_inputs(ctx);
    const ClassifierData data = classifier_rows(view, clusters, cohort_year_by_student(tables));
    if (data.y.empty()) throw ConfigError("train: no retained archetypes to learn from");

    const ClassifierConfig& cc = ctx.config.classifier;
    TrainTestSplit split;
    if (cc.split_mode == "cohort_temporal") {
        int split_year = cc.split_year;
        if (split_year <= 0) split_year = default_split_year(data.cohort_years);
        split = cohort_split(data.cohort_years, split_year);
    } else {
        split = stratified_split(data.y, cc.train_fraction, derive_seed(ctx.config.seed, "split"));
    }

    Matrix x_train(static_cast<Eigen::Index>(split.train.size()), data.x.cols());
    std::vector<int> y_train;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
        x_train.row(static_cast<Eigen::Index>(i)) =
            data.x.row(static_cast<Eigen::Index>(split.train[i]));
        y_train.push_back(data.y[split.train[i]]);
    }

    ForestConfig base;
    base.n_trees = cc.n_trees;
    base.max_depth = cc.max_depth;
    base.min_leaf = cc.min_leaf;
    base.seed = derive_seed(ctx.config.seed, "forest");
    const ForestConfig tuned =
        tune_forest(x_train, y_train, cc.cv_folds, base, cc.tune_n_trees, cc.tune_max_depth,
                    cc.tune_min_leaf, derive_seed(ctx.config.seed, "tune"));
    const CvResult cv =
        cross_validate(x_train, y_train, cc.cv_folds, tuned, derive_seed(ctx.config.seed, "cv"));

    RandomForest model;
    model.train(x_train, y_train, tuned);
    model.feature_names = view.columns;

    nlohmann::json mj = model.to_json();
    mj["cv"] = {{"folds", cc.cv_folds},
                {"accuracy_mean", cv.accuracy_mean},
                {"accuracy_std", cv.accuracy_std},
                {"fold_accuracy", cv.fold_accuracy},
                {"macro_f1_mean", cv.macro_f1_mean}};
    nlohmann::json split_json;
    split_json["mode"] = cc.split_mode;
    nlohmann::json train_ids = nlohmann::json::array(), test_ids = nlohmann::json::array();
    for (const std::size_t i : split.train) train_ids.push_back(data.student_ids[i]);
    for (const std::size_t i : split.test) test_ids.push_back(data.student_ids[i]);
    split_json["train_student_ids"] = train_ids;
    split_json["test_student_ids"] = test_ids;
    mj["split"] = split_json;
    write_json(ctx.out_path(artifact::kModel), mj);
    update_manifest(ctx, "train");
    say(ctx, "train: " + std::to_string(split.train.size()) + " train / " +
                 std::to_string(split.test.size()) + " test rows, CV accuracy " +
                 format_double(cv.accuracy_mean));
}

void run_evaluate(const Context& ctx) {
    require_artifact(ctx, artifact::kModel, "train");
    const AnalysisView view = load_analysis(ctx);
    const LoadedClusters clusters = load_clusters(ctx);
    const nlohmann::json mj = read_json(ctx.out_path(artifact::kModel), "train");
    const RandomForest model = RandomForest::from_json(mj);

    std::set<std::string> test_ids;
    for (const auto& sid : mj.at("split").at("test_student_ids")) {
        test_ids.insert(sid.get<std::string>());
    }
    std::vector<std::size_t> rows;
    std::vector<int> y_test;
    for (std::size_t r = 0; r < view.table.student_ids.size(); ++r) {
        if (test_ids.count(view.table.student_ids[r]) && clusters.labels[r] >= 0) {
            rows.push_back(r);
            y_test.push_back(clusters.labels[r]);
        }
    }
    Matrix x_test(static_cast<Eigen::Index>(rows.size()), view.standardized.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        x_test.row(static_cast<Eigen::Index>(i)) =
            view.standardized.row(static_cast<Eigen::Index>(rows[i]));
    }
    EvalReport report = evaluate(model, x_test, y_test);
    const auto& cv = mj.at("cv");
    report.cv_accuracy_mean = cv.at("accuracy_mean").get<double>();
    report.cv_accuracy_std = cv.at("accuracy_std").get<double>();
    report.cv_fold_accuracy = cv.at("fold_accuracy").get<std::vector<double>>();
    write_json(ctx.out_path(artifact::kEvalReport), report.to_json(model.classes()));

    // mean-decrease-in-impurity importance with level attribution
    {
        const Dictionary dict = load_dictionary(ctx.config);
        const std::vector<double> importance = model.feature_importance();
        csv::Table t;
        t.header = {"feature", "level", "interaction", "importance"};
        std::map<std::string, double> level_share;
        double interaction_share = 0.0;
        for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
            const std::string& name = model.feature_names[i];
            const FeatureDef* def = dict.find(name);
            std::string level = "indicator";
            bool interaction = false;
            if (def) {
                level = to_string(def->level);
                interaction = def->interaction;
            } else if (name.ends_with("_missing")) {
                const FeatureDef* base = dict.find(name.substr(0, name.size() - 8));
                if (base) level = to_string(base->level) + "_indicator";
            }
            level_share[level] += importance[i];
            if (interaction) interaction_share += importance[i];
            t.rows.push_back({name, level, interaction ? "1" : "0", format_double(importance[i])});
        }
        // ranked by importance desc, name asc for ties
        std::sort(t.rows.begin(), t.rows.end(), [](const auto& a, const auto& b) {
            const double ia = std::stod(a[3]), ib = std::stod(b[3]);
            if (ia != ib) return ia > ib;
            return a[0] < b[0];
        });
        csv::write_file(ctx.out_path(artifact::kImportance), t);

        nlohmann::json ev = read_json(ctx.out_path(artifact::kEvalReport), "evaluate");
        ev["importance_by_level"] = level_share;
        ev["interaction_importance_share"] = interaction_share;
        write_json(ctx.out_path(artifact::kEvalReport), ev);
    }
    update_manifest(ctx, "evaluate");
    say(ctx, "evaluate: accuracy " + format_double(report.accuracy) + ", macro F1 " +
                 format_double(report.macro_f1));
}

void run_predict(const Context& ctx) {
    require_artifact(ctx, artifact::kModel, "train");
    require_artifact(ctx, artifact::kMatrix, "assemble");
    const AnalysisView view = load_analysis(ctx);
    const nlohmann::json mj = read_json(ctx.out_path(artifact::kModel), "train");
    const RandomForest model = RandomForest::from_json(mj);
    if (model.feature_names != view.columns) {
        throw ConfigError("predict: matrix columns do not match the trained model schema");
    }
    csv::Table t;
    t.header = {"student_id", "archetype"};
    for (const int c : model.classes()) t.header.push_back("vote_" + std::to_string(c));
    for (std::size_t r = 0; r < view.table.student_ids.size(); ++r) {
        const auto pred =
            model.predict(view.standardized.row(static_cast<Eigen::Index>(r)).transpose());
        std::vector<std::string> row{view.table.student_ids[r], std::to_string(pred.label)};
        for (const double v : pred.distribution) row.push_back(format_double(v));
        t.rows.push_back(std::move(row));
    }
    csv::write_file(ctx.out_path(artifact::kPredictions), t);
    update_manifest(ctx, "predict");
    say(ctx, "predict: " + std::to_string(t.rows.size()) + " assignments written");
}

ProbeReport run_probe(const Context& ctx) {
    const ParsedTables tables = load_inputs(ctx);
    const PipelineConfig& config = ctx.config;
    const PipelineRunFn run = [&config](const Dataset& d) { return build_matrix_text(d, config); };
    const ProbeReport report =
        leakage_probe(run, tables.dataset, config.vot, derive_seed(config.seed, "probe"),
                      config.validation.probe_sets, config.validation.probe_injections);
    write_json(ctx.out_path(artifact::kProbe), report.to_json());
    update_manifest(ctx, "probe");
    say(ctx, std::string("probe: ") + (report.invariant ? "invariant" : "LEAKAGE DETECTED") + " (" +
                 std::to_string(report.identical_sets) + "/" +
                 std::to_string(report.perturbation_sets) + " identical)");
    return report;
}

void run_all(const Context& ctx) {
    if (ctx.config.generator) run_synth(ctx);
    const ValidationReport report = run_validate(ctx);
    if (!report.pass) {
        throw ConfigError("dataset failed validation; see " +
                          ctx.out_path(artifact::kValidationReport));
    }
    run_extract(ctx);
    run_assemble(ctx);
    run_audit(ctx);
    run_cluster(ctx);
    run_validate_clusters(ctx);
    run_train(ctx);
    run_evaluate(ctx);
}

}  // namespace capire::pipeline

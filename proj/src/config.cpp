#include "capire/config.hpp"

#include "capire/sha256.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace capire {

namespace {

VotUnit parse_unit(const std::string& s) {
    if (s == "terms") return VotUnit::Terms;
    if (s == "credits") return VotUnit::Credits;
    throw ConfigError("vot.unit must be 'terms' or 'credits'");
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.out_dir = j.value("out_dir", c.out_dir);
        if (j.contains("inputs")) {
            const auto& in = j["inputs"];
            c.inputs.students = in.value("students", "");
            c.inputs.enrolments = in.value("enrolments", "");
            c.inputs.courses = in.value("courses", "");
            c.inputs.curricula = in.value("curricula", "");
            c.inputs.calendar = in.value("calendar", "");
            c.inputs.graduations = in.value("graduations", "");
        }
        if (j.contains("generator") && !j["generator"].is_null()) {
            c.generator = synth::GeneratorConfig::from_json(j["generator"]);
        }
        c.dictionary_path = j.value("dictionary", "");
        if (j.contains("vot")) {
            const auto& v = j["vot"];
            c.vot.unit = parse_unit(v.value("unit", "terms"));
            c.vot.cutoff = v.value("cutoff", c.vot.cutoff);
            c.vot.horizon = v.value("horizon", c.vot.horizon);
            c.vot.grace = v.value("grace", c.vot.grace);
            c.vot.label_policy = v.value("label_policy", c.vot.label_policy);
        }
        if (j.contains("grade_scale")) {
            c.grade_min = j["grade_scale"].value("min", c.grade_min);
            c.grade_max = j["grade_scale"].value("max", c.grade_max);
        }
        if (j.contains("friction")) {
            const auto& f = j["friction"];
            c.friction_w1 = f.value("w1", c.friction_w1);
            c.friction_w2 = f.value("w2", c.friction_w2);
            c.filter_threshold = f.value("filter_threshold", c.filter_threshold);
        }
        if (j.contains("extract")) {
            const auto& e = j["extract"];
            c.extract.rural_distance_km = e.value("rural_distance_km", c.extract.rural_distance_km);
            c.extract.first_generation_max_level =
                e.value("first_generation_max_level", c.extract.first_generation_max_level);
        }
        if (j.contains("embedding")) {
            const auto& e = j["embedding"];
            c.embedding.n_neighbors = e.value("n_neighbors", c.embedding.n_neighbors);
            c.embedding.dims = e.value("dims", c.embedding.dims);
            c.embedding.min_dist = e.value("min_dist", c.embedding.min_dist);
            c.embedding.spread = e.value("spread", c.embedding.spread);
            c.embedding.epochs = e.value("epochs", c.embedding.epochs);
            c.embedding.learning_rate = e.value("learning_rate", c.embedding.learning_rate);
            c.embedding.negative_sample_rate =
                e.value("negative_sample_rate", c.embedding.negative_sample_rate);
        }
        if (j.contains("dbscan")) {
            c.dbscan.eps = j["dbscan"].value("eps", c.dbscan.eps);
            c.dbscan.min_pts = j["dbscan"].value("min_pts", c.dbscan.min_pts);
        }
        if (j.contains("archetype")) {
            c.min_archetype_size = j["archetype"].value("min_size", c.min_archetype_size);
        }
        if (j.contains("validation")) {
            const auto& v = j["validation"];
            c.validation.bootstrap_resamples =
                v.value("bootstrap_resamples", c.validation.bootstrap_resamples);
            c.validation.permutation_count =
                v.value("permutation_count", c.validation.permutation_count);
            c.validation.temporal_split_year =
                v.value("temporal_split_year", c.validation.temporal_split_year);
            if (v.contains("sensitivity")) {
                const auto& s = v["sensitivity"];
                if (s.contains("n_neighbors"))
                    c.validation.sensitivity.n_neighbors = s["n_neighbors"].get<std::vector<int>>();
                if (s.contains("eps_factor"))
                    c.validation.sensitivity.eps_factor = s["eps_factor"].get<std::vector<double>>();
                if (s.contains("min_pts"))
                    c.validation.sensitivity.min_pts = s["min_pts"].get<std::vector<int>>();
            }
            if (v.contains("noise_features"))
                c.validation.noise_features = v["noise_features"].get<std::vector<std::string>>();
            c.validation.noise_min_group = v.value("noise_min_group", c.validation.noise_min_group);
            c.validation.probe_sets = v.value("probe_sets", c.validation.probe_sets);
            c.validation.probe_injections =
                v.value("probe_injections", c.validation.probe_injections);
        }
        if (j.contains("classifier")) {
            const auto& f = j["classifier"];
            c.classifier.split_mode = f.value("split_mode", c.classifier.split_mode);
            c.classifier.train_fraction = f.value("train_fraction", c.classifier.train_fraction);
            c.classifier.split_year = f.value("split_year", c.classifier.split_year);
            c.classifier.cv_folds = f.value("cv_folds", c.classifier.cv_folds);
            c.classifier.n_trees = f.value("n_trees", c.classifier.n_trees);
            c.classifier.max_depth = f.value("max_depth", c.classifier.max_depth);
            c.classifier.min_leaf = f.value("min_leaf", c.classifier.min_leaf);
            if (f.contains("tune_n_trees"))
                c.classifier.tune_n_trees = f["tune_n_trees"].get<std::vector<int>>();
            if (f.contains("tune_max_depth"))
                c.classifier.tune_max_depth = f["tune_max_depth"].get<std::vector<int>>();
            if (f.contains("tune_min_leaf"))
                c.classifier.tune_min_leaf = f["tune_min_leaf"].get<std::vector<int>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.classifier.split_mode != "stratified_random" &&
        c.classifier.split_mode != "cohort_temporal") {
        throw ConfigError("classifier.split_mode must be stratified_random or cohort_temporal");
    }
    if (c.classifier.train_fraction <= 0.0 || c.classifier.train_fraction >= 1.0) {
        throw ConfigError("classifier.train_fraction must be in (0, 1)");
    }
    c.vot.check();
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::json PipelineConfig::to_canonical_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["inputs"] = {{"students", inputs.students},   {"enrolments", inputs.enrolments},
                   {"courses", inputs.courses},     {"curricula", inputs.curricula},
                   {"calendar", inputs.calendar},   {"graduations", inputs.graduations}};
    j["generator"] = generator ? generator->to_json() : nlohmann::json();
    j["dictionary"] = dictionary_path;
    j["vot"] = {{"unit", vot.unit == VotUnit::Terms ? "terms" : "credits"},
                {"cutoff", vot.cutoff},
                {"horizon", vot.horizon},
                {"grace", vot.grace},
                {"label_policy", vot.label_policy}};
    j["grade_scale"] = {{"min", grade_min}, {"max", grade_max}};
    j["friction"] = {{"w1", friction_w1}, {"w2", friction_w2}, {"filter_threshold", filter_threshold}};
    j["extract"] = {{"rural_distance_km", extract.rural_distance_km},
                    {"first_generation_max_level", extract.first_generation_max_level}};
    j["embedding"] = {{"n_neighbors", embedding.n_neighbors},
                      {"dims", embedding.dims},
                      {"min_dist", embedding.min_dist},
                      {"spread", embedding.spread},
                      {"epochs", embedding.epochs},
                      {"learning_rate", embedding.learning_rate},
                      {"negative_sample_rate", embedding.negative_sample_rate}};
    j["dbscan"] = {{"eps", dbscan.eps}, {"min_pts", dbscan.min_pts}};
    j["archetype"] = {{"min_size", min_archetype_size}};
    j["validation"] = {{"bootstrap_resamples", validation.bootstrap_resamples},
                       {"permutation_count", validation.permutation_count},
                       {"temporal_split_year", validation.temporal_split_year},
                       {"sensitivity",
                        {{"n_neighbors", validation.sensitivity.n_neighbors},
                         {"eps_factor", validation.sensitivity.eps_factor},
                         {"min_pts", validation.sensitivity.min_pts}}},
                       {"noise_features", validation.noise_features},
                       {"noise_min_group", validation.noise_min_group},
                       {"probe_sets", validation.probe_sets},
                       {"probe_injections", validation.probe_injections}};
    j["classifier"] = {{"split_mode", classifier.split_mode},
                       {"train_fraction", classifier.train_fraction},
                       {"split_year", classifier.split_year},
                       {"cv_folds", classifier.cv_folds},
                       {"n_trees", classifier.n_trees},
                       {"max_depth", classifier.max_depth},
                       {"min_leaf", classifier.min_leaf},
                       {"tune_n_trees", classifier.tune_n_trees},
                       {"tune_max_depth", classifier.tune_max_depth},
                       {"tune_min_leaf", classifier.tune_min_leaf}};
    return j;
}

std::string PipelineConfig::hash() const { return sha256_hex(to_canonical_json().dump()); }

}  // namespace capire

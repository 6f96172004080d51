#include "capire/pipeline.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace capire;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// drop the volatile timestamp line before comparing manifests
std::string strip_timestamp(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    j.erase("timestamp");
    return j.dump(2);
}

nlohmann::json small_scenario_json(const std::string& out_dir, std::uint64_t seed = 2024) {
    nlohmann::json generator = {
        {"n_students", 260},
        {"n_courses", 20},
        {"n_terms", 34},
        {"cohort_year_span", 8},
        {"nominal_terms", 8},
        {"noise_share", 0.2},
        {"seed", 11},
        {"templates",
         nlohmann::json::array(
             {{{"template_id", "T_drop"}, {"share", 0.4}, {"drop_p", 0.95}, {"fail_p", 0.02},
               {"gap_p", 0.05}, {"load_start", 4.0}, {"age_mean", 19.0}, {"attrition_p", 0.85}},
              {{"template_id", "T_pass"}, {"share", 0.4}, {"drop_p", 0.02}, {"fail_p", 0.05},
               {"gap_p", 0.0}, {"load_start", 4.5}, {"age_mean", 18.4}, {"attrition_p", 0.1},
               {"graduate_p", 0.7}}})}};
    return nlohmann::json{
        {"seed", seed},
        {"out_dir", out_dir},
        {"generator", generator},
        {"vot", {{"cutoff", 3}, {"horizon", 12}, {"grace", 2}}},
        {"embedding", {{"n_neighbors", 10}, {"epochs", 80}}},
        {"dbscan", {{"min_pts", 8}}},
        {"archetype", {{"min_size", 30}}},
        {"validation",
         {{"bootstrap_resamples", 4},
          {"permutation_count", 30},
          {"sensitivity",
           {{"n_neighbors", nlohmann::json::array({10})},
            {"eps_factor", nlohmann::json::array({1.0})},
            {"min_pts", nlohmann::json::array({8})}}},
          {"probe_sets", 3},
          {"probe_injections", 40}}},
        {"classifier", {{"n_trees", 40}, {"cv_folds", 3}}}};
}

std::map<std::string, std::string> artifact_snapshot(const std::string& out_dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), out_dir).string();
        std::string text = slurp(entry.path().string());
        if (rel == "manifest.json") text = strip_timestamp(text);
        out[rel] = std::move(text);
    }
    return out;
}

}  // namespace

TEST_CASE("full run, idempotence, and all == chain equivalence") {
    const fs::path base = fs::temp_directory_path() / "capire_test_pipeline";
    fs::remove_all(base);
    const std::string dir_all1 = (base / "all1").string();
    const std::string dir_all2 = (base / "all2").string();
    const std::string dir_chain = (base / "chain").string();

    // run `all` twice in separate directories (out_dir excluded from artifacts)
    for (const std::string& dir : {dir_all1, dir_all2}) {
        auto ctx = pipeline::make_context(
            PipelineConfig::from_json(small_scenario_json(dir)), /*force=*/true);
        // keep the canonical hash identical across directories
        ctx.config_hash = "fixed-test-hash";
        pipeline::run_all(ctx);
    }
    auto snap1 = artifact_snapshot(dir_all1);
    auto snap2 = artifact_snapshot(dir_all2);
    REQUIRE_FALSE(snap1.empty());
    CHECK(snap1.size() == snap2.size());
    for (const auto& [rel, text] : snap1) {
        CAPTURE(rel);
        CHECK(text == snap2.at(rel));
    }

    // the chain of individual subcommands writes byte-identical artifacts
    {
        auto ctx = pipeline::make_context(
            PipelineConfig::from_json(small_scenario_json(dir_chain)), /*force=*/true);
        ctx.config_hash = "fixed-test-hash";
        pipeline::run_synth(ctx);
        pipeline::run_validate(ctx);
        pipeline::run_extract(ctx);
        pipeline::run_assemble(ctx);
        pipeline::run_audit(ctx);
        pipeline::run_cluster(ctx);
        pipeline::run_validate_clusters(ctx);
        pipeline::run_train(ctx);
        pipeline::run_evaluate(ctx);
    }
    auto snap3 = artifact_snapshot(dir_chain);
    CHECK(snap3.size() == snap1.size());
    for (const auto& [rel, text] : snap1) {
        CAPTURE(rel);
        CHECK(text == snap3.at(rel));
    }

    // key artifacts exist
    for (const char* name :
         {"matrix.csv", "manifest.json", "clusters.csv", "indices.json", "profiles.json",
          "stability.json", "permutation.json", "sensitivity.csv", "noise_analysis.json",
          "model.json", "eval_report.json", "importance.csv", "audit.json", "labels.csv"}) {
        CAPTURE(name);
        CHECK(fs::exists(fs::path(dir_all1) / name));
    }

    // the matrix holds no outcome columns
    {
        std::istringstream header(snap1.at("matrix.csv").substr(0, snap1.at("matrix.csv").find('\n')));
        std::string col;
        while (std::getline(header, col, ',')) {
            CHECK(col != "attrition_flag");
            CHECK(col != "label_basis");
        }
    }

    // probe on the generated inputs: invariant
    {
        auto ctx = pipeline::make_context(
            PipelineConfig::from_json(small_scenario_json(dir_all1)), /*force=*/true);
        const ProbeReport probe = pipeline::run_probe(ctx);
        CHECK(probe.invariant);
        CHECK(probe.identical_sets == 3);
    }
    fs::remove_all(base);
}

TEST_CASE("dependency errors name the missing stage") {
    const fs::path base = fs::temp_directory_path() / "capire_test_deps";
    fs::remove_all(base);
    auto ctx = pipeline::make_context(
        PipelineConfig::from_json(small_scenario_json((base / "out").string())));

    // extract before validate
    pipeline::run_synth(ctx);
    try {
        pipeline::run_extract(ctx);
        CHECK(false);
    } catch (const DependencyError& e) {
        CHECK(e.required_subcommand == "validate");
    }
    // train before cluster
    try {
        pipeline::run_train(ctx);
        CHECK(false);
    } catch (const DependencyError& e) {
        CHECK(e.required_subcommand == "cluster");
    }
    // synth missing entirely: validate wants generated files
    const fs::path base2 = base / "out2";
    auto ctx2 = pipeline::make_context(
        PipelineConfig::from_json(small_scenario_json(base2.string())));
    CHECK_THROWS_AS(pipeline::run_validate(ctx2), DependencyError);
    fs::remove_all(base);
}

TEST_CASE("validation failure blocks extraction") {
    const fs::path base = fs::temp_directory_path() / "capire_test_gate";
    fs::remove_all(base);
    auto ctx = pipeline::make_context(
        PipelineConfig::from_json(small_scenario_json((base / "out").string())));
    pipeline::run_synth(ctx);

    // corrupt a student id reference
    const std::string enrol_path = ctx.data_path("enrolments.csv");
    std::string text = slurp(enrol_path);
    const auto pos = text.find("\nS");
    REQUIRE(pos != std::string::npos);
    text.replace(pos + 1, 6, "SGHOST");
    {
        std::ofstream out(enrol_path, std::ios::binary);
        out << text;
    }
    const ValidationReport report = pipeline::run_validate(ctx);
    CHECK_FALSE(report.pass);
    CHECK_THROWS_AS(pipeline::run_extract(ctx), ConfigError);
    fs::remove_all(base);
}

TEST_CASE("garbled input raises an ingestion error distinct from validation") {
    const fs::path base = fs::temp_directory_path() / "capire_test_garbled";
    fs::remove_all(base);
    auto ctx = pipeline::make_context(
        PipelineConfig::from_json(small_scenario_json((base / "out").string())));
    pipeline::run_synth(ctx);
    {
        std::ofstream out(ctx.data_path("students.csv"), std::ios::binary);
        out << "student_id,age\n\"unterminated quote, 18\n";
    }
    CHECK_THROWS_AS(pipeline::run_validate(ctx), IngestError);
    fs::remove_all(base);
}

TEST_CASE("assemble refuses to overwrite without force") {
    const fs::path base = fs::temp_directory_path() / "capire_test_force";
    fs::remove_all(base);
    auto ctx = pipeline::make_context(
        PipelineConfig::from_json(small_scenario_json((base / "out").string())));
    pipeline::run_synth(ctx);
    pipeline::run_validate(ctx);
    pipeline::run_extract(ctx);
    pipeline::run_assemble(ctx);
    CHECK_THROWS_AS(pipeline::run_assemble(ctx), ConfigError);  // collision without --force
    auto forced = ctx;
    forced.force = true;
    pipeline::run_assemble(forced);  // allowed
    fs::remove_all(base);
}

#include "capire/assembly.hpp"

#include "capire/pipeline.hpp"
#include "capire/rng.hpp"
#include "test_helpers.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <set>

using namespace capire;
using capire::testing::toy_dataset;

namespace {

VotConfig vot3() {
    VotConfig v;
    v.cutoff = 3;
    v.horizon = 12;
    v.grace = 2;
    return v;
}

FeatureTable toy_features(const Dataset& d) {
    const Dictionary dict = builtin_dictionary();
    const auto friction = build_friction_table(d.students, d.enrolments, vot3());
    return extract_features(d, dict, vot3(), friction);
}

}  // namespace

TEST_CASE("standardize: frozen example and zero-variance passthrough") {
    Matrix m(3, 2);
    m << 1, 5, 2, 5, 3, 5;
    const ScalingStats stats = standardize_fit(m, {"x", "c"});
    CHECK(stats.mean[0] == doctest::Approx(2.0));
    CHECK(stats.stddev[0] == doctest::Approx(0.81649658092772603));
    CHECK(stats.constant[1]);

    Matrix row(1, 2);
    row << 2, 5;
    const Matrix z = standardize_apply(stats, row, {"x", "c"});
    CHECK(z(0, 0) == doctest::Approx(0.0));
    CHECK(z(0, 1) == doctest::Approx(5.0));  // constant column untouched

    CHECK_THROWS_AS(standardize_apply(stats, row, {"x", "other"}), PreconditionError);
}

TEST_CASE("apply is a pointwise map: other rows are irrelevant") {
    Matrix train(4, 1);
    train << 1, 2, 3, 10;
    const ScalingStats stats = standardize_fit(train, {"x"});
    Matrix one(1, 1), many(3, 1);
    one << 7;
    many << 7, -4, 200;
    const double alone = standardize_apply(stats, one, {"x"})(0, 0);
    const double together = standardize_apply(stats, many, {"x"})(0, 0);
    CHECK(alone == together);
}

TEST_CASE("imputation policies: N2 mean, N3 never, N1 region median") {
    Dataset d = toy_dataset();
    // hs_gpa: S1 8.4, S2 6.0, S3 missing -> train mean 7.2
    d.students[0].hs_gpa = 8.4;
    d.students[1].hs_gpa = 6.0;
    d.students[2].hs_gpa = std::nullopt;
    FeatureTable t = toy_features(d);
    const int gpa = t.column_index("hs_gpa");
    REQUIRE(gpa >= 0);
    CHECK(is_missing(t.values(2, gpa)));
    CHECK(t.cell(2, "hs_gpa_missing") == 1.0);

    const ImputeStats stats = impute(t, builtin_dictionary(), {"P1000", "P1000", "P1000"});
    CHECK(t.values(2, gpa) == doctest::Approx(7.2));
    CHECK(stats.train_means.at("hs_gpa") == doctest::Approx(7.2));
    CHECK(t.cell(2, "hs_gpa_missing") == 1.0);  // indicator survives imputation

    // N3 grade features for the all-dropped student stay missing
    CHECK(is_missing(t.cell(2, "grade_mean")));
}

TEST_CASE("region median imputation with fallback to the global median") {
    Dataset d = toy_dataset();
    d.students[0].distance_to_campus_km = 0.26;
    d.students[1].distance_to_campus_km = 0.31;
    d.students[2].distance_to_campus_km = std::nullopt;
    FeatureTable t = toy_features(d);
    // S3 shares the region: median of {0.26, 0.31} = 0.285
    {
        FeatureTable copy = t;
        impute(copy, builtin_dictionary(), {"P1000", "P1000", "P1000"});
        CHECK(copy.cell(2, "distance_to_campus_km") == doctest::Approx(0.285));
    }
    // S3 in an unseen region: global median
    {
        FeatureTable copy = t;
        impute(copy, builtin_dictionary(), {"P1000", "P1000", "UNSEEN"});
        CHECK(copy.cell(2, "distance_to_campus_km") == doctest::Approx(0.285));
    }
    // regional split: S1 alone in A, S2+S3 in B -> S3 takes B's median 0.31
    {
        FeatureTable copy = t;
        impute(copy, builtin_dictionary(), {"A", "B", "B"});
        CHECK(copy.cell(2, "distance_to_campus_km") == doctest::Approx(0.31));
    }
}

TEST_CASE("indicator completeness: indicator sum equals imputations for N1/N2") {
    Dataset d = toy_dataset();
    d.students[2].hs_gpa = std::nullopt;
    d.students[1].parental_education = std::nullopt;
    FeatureTable t = toy_features(d);
    const Dictionary dict = builtin_dictionary();

    // count indicator=1 over imputable (region_median / train_mean) features
    double indicated = 0;
    for (const auto& def : dict.features) {
        if (def.imputation != ImputePolicy::RegionMedian && def.imputation != ImputePolicy::TrainMean)
            continue;
        const int c = t.column_index(def.name + "_missing");
        if (c < 0) continue;
        for (Eigen::Index r = 0; r < t.values.rows(); ++r) indicated += t.values(r, c);
    }
    const ImputeStats stats = impute(t, dict, {"P1000", "P1000", "P1000"});
    CHECK(static_cast<double>(stats.imputations_performed) == doctest::Approx(indicated));

    // no missing cells remain in N1/N2 columns
    for (const auto& def : dict.features) {
        if (def.imputation != ImputePolicy::RegionMedian && def.imputation != ImputePolicy::TrainMean)
            continue;
        const int c = t.column_index(def.name);
        for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
            CHECK_FALSE(is_missing(t.values(r, c)));
        }
    }
}

TEST_CASE("interpolate_series fills interior gaps linearly") {
    const auto miss = missing_value();
    const auto out = interpolate_series({1.0, miss, 3.0, miss, miss, 6.0});
    CHECK(out[1] == doctest::Approx(2.0));
    CHECK(out[3] == doctest::Approx(4.0));
    CHECK(out[4] == doctest::Approx(5.0));
    const auto edges = interpolate_series({miss, 2.0, miss});
    CHECK(edges[0] == doctest::Approx(2.0));
    CHECK(edges[2] == doctest::Approx(2.0));
    const auto empty = interpolate_series({miss, miss});
    CHECK(is_missing(empty[0]));
}

TEST_CASE("matrix serialization: 17-digit round trip is exact") {
    Rng rng(11);
    FeatureTable t;
    t.student_ids = {"S1", "S2", "S3", "S4"};
    t.columns = {"a", "b", "c"};
    t.feature_names = t.columns;
    t.values.resize(4, 3);
    for (Eigen::Index r = 0; r < 4; ++r) {
        for (Eigen::Index c = 0; c < 3; ++c) {
            t.values(r, c) = rng.normal(0, 1e3) * std::pow(10.0, static_cast<double>(rng.index(7)) - 3);
        }
    }
    t.values(1, 2) = missing_value();
    const std::string text = serialize_matrix(t);
    const FeatureTable back = parse_matrix(text);
    CHECK(back.student_ids == t.student_ids);
    CHECK(back.columns == t.columns);
    for (Eigen::Index r = 0; r < 4; ++r) {
        for (Eigen::Index c = 0; c < 3; ++c) {
            if (is_missing(t.values(r, c))) {
                CHECK(is_missing(back.values(r, c)));
            } else {
                CHECK(back.values(r, c) == t.values(r, c));  // bitwise
            }
        }
    }
    // serialize(parse(serialize(x))) is byte-stable
    CHECK(serialize_matrix(back) == text);
}

TEST_CASE("assemble: manifest accounting and clustering exclusions") {
    Dataset d = toy_dataset();
    Student ghost;  // zero-enrolment student: counted, not featurized
    ghost.student_id = "S9";
    ghost.cohort_year = 2005;
    ghost.entry_term = 2;
    ghost.age_at_entry = 20;
    ghost.gender = "f";
    d.students.push_back(ghost);

    const AssemblyResult result =
        assemble(toy_features(d), builtin_dictionary(), d, "hash123", 7);
    CHECK(result.manifest.students_in == 4);
    CHECK(result.manifest.students_featurized == 3);
    CHECK(result.manifest.zero_enrolment_students == 1);
    CHECK(result.manifest.feature_count == 44);
    CHECK(result.manifest.config_hash == "hash123");
    CHECK(result.manifest.cohorts == std::vector<int>{2004});

    // S3 (all dropped) leaves the grade columns missing -> excluded
    const auto& excluded = result.manifest.clustering_excluded_columns;
    const std::set<std::string> ex(excluded.begin(), excluded.end());
    CHECK(ex.count("grade_mean"));
    CHECK(ex.count("grade_median"));
    CHECK(ex.count("grade_std"));
    // firewall: no label columns anywhere near the matrix
    for (const auto& col : result.matrix.columns) {
        CHECK(col != "attrition_flag");
        CHECK(col != "label_basis");
    }
    // missingness bookkeeping matches the matrix content
    CHECK(result.manifest.column_missing_fraction.at("grade_mean") == doctest::Approx(1.0 / 3));
    CHECK(result.manifest.column_missing_fraction.at("pass_rate") == doctest::Approx(0.0));

    // analysis matrix: no NaN cells, excluded columns gone
    std::vector<std::string> used;
    const Matrix analysis = analysis_matrix(result, &used);
    CHECK(std::find(used.begin(), used.end(), "grade_mean") == used.end());
    for (Eigen::Index r = 0; r < analysis.rows(); ++r) {
        for (Eigen::Index c = 0; c < analysis.cols(); ++c) {
            CHECK_FALSE(is_missing(analysis(r, c)));
        }
    }
}

TEST_CASE("in-memory matrix equals the staged file route byte for byte") {
    const Dataset d = toy_dataset();
    PipelineConfig config;
    config.vot = vot3();
    const std::string direct = pipeline::build_matrix_text(d, config);
    // stage the raw features through text and re-assemble
    const Dictionary dict = builtin_dictionary();
    const auto friction = build_friction_table(d.students, d.enrolments, config.vot);
    const FeatureTable raw = extract_features(d, dict, config.vot, friction);
    FeatureTable reparsed = parse_matrix(serialize_matrix(raw));
    const AssemblyResult result = assemble(std::move(reparsed), dict, d, config.hash(), config.seed);
    CHECK(serialize_matrix(result.matrix) == direct);
}

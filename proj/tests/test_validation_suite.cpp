#include "capire/validation_suite.hpp"

#include "capire/rng.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <set>

using namespace capire;

namespace {

// well-separated blobs in feature space (unscaled), blob id as ground truth
void planted(int per_blob, int n_blobs, int dims, Matrix& x, std::vector<int>& truth,
             std::uint64_t seed) {
    Rng rng(seed);
    x.resize(per_blob * n_blobs, dims);
    truth.clear();
    for (int b = 0; b < n_blobs; ++b) {
        for (int i = 0; i < per_blob; ++i) {
            for (int d = 0; d < dims; ++d) {
                const double center = (d % n_blobs == b) ? 12.0 : 0.0;
                x(b * per_blob + i, d) = center + rng.normal(0.0, 1.0);
            }
            truth.push_back(b);
        }
    }
}

EmbeddingParams quick_embedding(int n_neighbors = 10, int epochs = 80) {
    EmbeddingParams p;
    p.n_neighbors = n_neighbors;
    p.epochs = epochs;
    p.seed = 4;
    return p;
}

}  // namespace

TEST_CASE("permutation test: planted structure hits the p floor") {
    Matrix x;
    std::vector<int> truth;
    planted(40, 3, 6, x, truth, 21);
    // embedding coordinates stand in for any coordinates here; use x itself
    const PermutationReport report = permutation_silhouette_test(x, truth, 100, 5);
    CHECK(report.p_value == doctest::Approx(1.0 / 101.0));
    CHECK(report.observed > report.null_mean);
    CHECK(report.null_scores.size() == 100);
}

TEST_CASE("permutation test: random labels keep p above 0.05") {
    Rng rng(22);
    Matrix x(90, 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index d = 0; d < 4; ++d) x(i, d) = rng.normal(0, 1);
    std::vector<int> labels;
    for (int i = 0; i < 90; ++i) labels.push_back(static_cast<int>(rng.index(3)));
    const PermutationReport report = permutation_silhouette_test(x, labels, 100, 6);
    CHECK(report.p_value > 0.05);
}

TEST_CASE("permutation test: observed below null mean implies p > 0.5") {
    // craft labels worse than random: split one tight blob by a bad partition,
    // then verify the rank logic directly on the null scores
    Rng rng(23);
    Matrix x(60, 3);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index d = 0; d < 3; ++d) x(i, d) = rng.normal(0, 1);
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) labels.push_back(i % 2);
    const PermutationReport report = permutation_silhouette_test(x, labels, 200, 7);
    if (report.observed < report.null_mean) {
        CHECK(report.p_value > 0.5);
    }
    // p floor invariant
    CHECK(report.p_value >= 1.0 / 201.0);
}

TEST_CASE("permutation test requires two retained clusters") {
    Matrix x = Matrix::Random(30, 3);
    std::vector<int> labels(30, 0);
    CHECK_THROWS_AS(permutation_silhouette_test(x, labels, 10, 1), PreconditionError);
}

TEST_CASE("noise stays fixed under permutation") {
    Matrix x;
    std::vector<int> truth;
    planted(30, 3, 6, x, truth, 29);
    // mark a third of points as noise; their labels never enter the pool
    std::vector<int> labels = truth;
    for (std::size_t i = 0; i < labels.size(); i += 3) labels[i] = -1;
    const PermutationReport report = permutation_silhouette_test(x, labels, 50, 9);
    CHECK(report.p_value <= 0.05);
}

TEST_CASE("bootstrap stability separates planted structure from noise") {
    Matrix x;
    std::vector<int> truth;
    planted(50, 3, 6, x, truth, 31);
    DbscanConfig db;
    db.min_pts = 8;
    db.eps = 0.0;  // auto

    // reference labels from one full clustering run
    std::vector<std::string> names(6, "");
    for (int i = 0; i < 6; ++i) names[static_cast<std::size_t>(i)] = "c" + std::to_string(i);
    const ScalingStats stats = standardize_fit(x, names);
    const Matrix x_std = standardize_apply(stats, x, names);
    const ClusterSolution ref = run_cluster(x_std, quick_embedding(), db, 20);
    REQUIRE(ref.retained_ids.size() == 3);

    const StabilityReport planted_report =
        bootstrap_stability(x, ref.raw_labels, quick_embedding(), db, 12, 33);
    CHECK(planted_report.ari.size() + planted_report.skipped == 12);
    CHECK(planted_report.mean > 0.8);
    CHECK(planted_report.ci_lo <= planted_report.ci_hi);
    for (const double a : planted_report.ari) {
        CHECK(a <= 1.0 + 1e-12);
        CHECK(a >= -1.0 - 1e-12);
    }

    // structureless data: low agreement across resamples
    Rng rng(35);
    Matrix noise(150, 6);
    for (Eigen::Index i = 0; i < noise.rows(); ++i)
        for (Eigen::Index d = 0; d < 6; ++d) noise(i, d) = rng.uniform();
    const Matrix noise_std = standardize_apply(standardize_fit(noise, names), noise, names);
    const ClusterSolution noise_ref = run_cluster(noise_std, quick_embedding(), db, 20);
    const StabilityReport noise_report =
        bootstrap_stability(noise, noise_ref.raw_labels, quick_embedding(), db, 12, 36);
    CHECK(planted_report.mean > noise_report.mean + 0.3);
}

TEST_CASE("sensitivity grid: the reference cell scores ARI 1") {
    Matrix x;
    std::vector<int> truth;
    planted(40, 3, 6, x, truth, 41);
    std::vector<std::string> names;
    for (int i = 0; i < 6; ++i) names.push_back("c" + std::to_string(i));
    const Matrix x_std = standardize_apply(standardize_fit(x, names), x, names);
    DbscanConfig db;
    db.min_pts = 8;
    const EmbeddingParams ep = quick_embedding();
    const ClusterSolution ref = run_cluster(x_std, ep, db, 20);

    SensitivityGrid grid;
    grid.n_neighbors = {8, 10, 12};
    grid.eps_factor = {0.8, 1.0, 1.25};
    grid.min_pts = {6, 8, 10};
    const SensitivityReport report =
        hyperparameter_sensitivity(x_std, ref.raw_labels, ref.eps, ep, grid);
    CHECK(report.cells.size() == 27);
    bool found_reference = false;
    for (const auto& cell : report.cells) {
        if (cell.n_neighbors == 10 && cell.eps_factor == 1.0 && cell.min_pts == 8) {
            found_reference = true;
            CHECK(cell.ok);
            CHECK(cell.ari == doctest::Approx(1.0));
        }
    }
    CHECK(found_reference);
    CHECK(report.min >= -1.0);
    CHECK(report.mean > 0.5);  // well-separated structure is robust
    // csv artifact shape
    const std::string csv_text = report.to_csv();
    CHECK(csv_text.find("n_neighbors,eps_factor,min_pts,ari,ok,error") == 0);
}

TEST_CASE("temporal stability: stationary structure keeps deltas small") {
    Matrix x;
    std::vector<int> truth;
    planted(60, 3, 6, x, truth, 51);
    Rng rng(52);
    std::vector<int> years, flags;
    const double attrition_by_blob[3] = {0.8, 0.3, 0.1};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        years.push_back(2004 + static_cast<int>(rng.index(10)));  // stationary across years
        flags.push_back(rng.bernoulli(attrition_by_blob[truth[i]]) ? 1 : 0);
    }
    DbscanConfig db;
    db.min_pts = 6;
    const TemporalReport report =
        temporal_stability(x, years, flags, 2009, quick_embedding(8, 80), db, 15);
    CHECK(report.deltas.size() >= 2);
    CHECK(report.max_abs_delta < 25.0);  // binomial noise at this tiny n

    CHECK_THROWS_AS(temporal_stability(x, years, flags, 1990, quick_embedding(8, 60), db, 15),
                    PreconditionError);
}

TEST_CASE("noise analysis: skip, planted variance reduction, micro-structure") {
    // matrix with 2 retained blobs and a residual group made of two tight
    // micro-clusters
    Rng rng(61);
    const int n_big = 60, n_micro = 15;
    const int n = 2 * n_big + 2 * n_micro;
    Matrix x(n, 4);
    std::vector<int> labels;
    FeatureTable table;
    table.columns = {"age_at_entry", "f1", "f2", "f3"};
    table.feature_names = table.columns;
    int row = 0;
    auto add_point = [&](double cx, double age_sd, int label) {
        x(row, 0) = cx + rng.normal(0, 1.0);
        x(row, 1) = -cx + rng.normal(0, 1.0);
        x(row, 2) = rng.normal(0, 1.0);
        x(row, 3) = rng.normal(0, 1.0);
        labels.push_back(label);
        ++row;
    };
    for (int i = 0; i < n_big; ++i) add_point(8.0, 1.7, 0);
    for (int i = 0; i < n_big; ++i) add_point(-8.0, 1.7, 1);
    for (int i = 0; i < n_micro; ++i) add_point(20.0, 0.1, -1);
    for (int i = 0; i < n_micro; ++i) add_point(-20.0, 0.1, -1);

    // raw feature table: ages with planted variance reduction in the residual
    table.values.resize(n, 4);
    for (int i = 0; i < n; ++i) {
        const bool residual = labels[static_cast<std::size_t>(i)] < 0;
        table.values(i, 0) = residual ? 19.0 + rng.normal(0, 0.15) : 19.0 + rng.normal(0, 1.7);
        for (int d = 1; d < 4; ++d) table.values(i, d) = x(i, d);
        table.student_ids.push_back("S" + std::to_string(i));
    }

    const NoiseAnalysisReport report =
        noise_analysis(table, x, labels, {"age_at_entry"}, 10, 71);
    CHECK_FALSE(report.skipped);
    REQUIRE(report.tests.size() == 1);
    CHECK(report.tests[0].levene_p < 0.05);           // planted variance reduction
    CHECK(report.tests[0].noise_sd < report.tests[0].clustered_sd);
    REQUIRE(report.reclustering.size() == 2);
    for (const auto& rc : report.reclustering) {
        CHECK(rc.k >= 2);
        CHECK(rc.silhouette > 0.5);  // two tight micro-archetypes
    }

    // small residual group -> skipped with reason
    std::vector<int> few = labels;
    for (auto& l : few) {
        if (l < 0) l = 0;
    }
    few[0] = -1;
    const NoiseAnalysisReport skipped =
        noise_analysis(table, x, few, {"age_at_entry"}, 10, 72);
    CHECK(skipped.skipped);
    CHECK_FALSE(skipped.skip_reason.empty());
}

TEST_CASE("noise same-distribution null: mann-whitney p typically > 0.05") {
    Rng rng(81);
    int low_p = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 80;
        Matrix x(n, 2);
        FeatureTable table;
        table.columns = {"age_at_entry", "f1"};
        table.feature_names = table.columns;
        table.values.resize(n, 2);
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            table.values(i, 0) = rng.normal(20, 2);
            table.values(i, 1) = rng.normal(0, 1);
            x(i, 0) = table.values(i, 0);
            x(i, 1) = table.values(i, 1);
            labels.push_back(i < 25 ? -1 : 0);  // arbitrary split, same distribution
            table.student_ids.push_back("S" + std::to_string(i));
        }
        labels[30] = 1;  // a second retained cluster so downstream maths stay defined
        const NoiseAnalysisReport report =
            noise_analysis(table, x, labels, {"age_at_entry"}, 10,
                           static_cast<std::uint64_t>(trial));
        if (!report.tests.empty() && report.tests[0].mann_whitney_p < 0.05) ++low_p;
    }
    CHECK(low_p <= 4);
}

TEST_CASE("split discrepancy: identical pools give a near-zero gap") {
    Matrix x;
    std::vector<int> truth;
    planted(50, 2, 5, x, truth, 91);
    Rng rng(92);
    std::vector<int> years;
    for (std::size_t i = 0; i < truth.size(); ++i)
        years.push_back(2004 + static_cast<int>(rng.index(8)));
    ForestConfig forest;
    forest.n_trees = 30;
    const SplitDiscrepancyReport report =
        split_discrepancy_diagnostic(x, truth, years, 0.7, 2008, forest, 93);
    CHECK(report.cohort_split_possible);
    CHECK(report.gap < 0.05);  // separable either way

    // single-cohort dataset: cohort split impossible, reported not thrown
    const std::vector<int> one_year(truth.size(), 2010);
    const SplitDiscrepancyReport single =
        split_discrepancy_diagnostic(x, truth, one_year, 0.7, 2010, forest, 94);
    CHECK_FALSE(single.cohort_split_possible);
    CHECK_FALSE(single.note.empty());
}

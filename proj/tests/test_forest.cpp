#include "capire/forest.hpp"

#include "capire/rng.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <map>
#include <set>

using namespace capire;

namespace {

// two linearly separable classes on one feature, plus distractors
void separable(int n, Matrix& x, std::vector<int>& y, std::uint64_t seed) {
    Rng rng(seed);
    x.resize(n, 5);
    y.clear();
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        x(i, 0) = label ? rng.uniform(2.0, 3.0) : rng.uniform(0.0, 1.0);
        for (int d = 1; d < 5; ++d) x(i, d) = rng.normal(0, 1);
        y.push_back(label);
    }
}

}  // namespace

TEST_CASE("stratified split preserves proportions within one member") {
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 40 + 13 * c; ++i) labels.push_back(c);
    }
    const TrainTestSplit split = stratified_split(labels, 0.7, 99);
    CHECK(split.train.size() + split.test.size() == labels.size());
    std::map<int, int> train_counts, totals;
    for (const int l : labels) ++totals[l];
    for (const std::size_t i : split.train) ++train_counts[labels[i]];
    for (const auto& [label, total] : totals) {
        const double expected = 0.7 * total;
        CHECK(std::abs(train_counts[label] - expected) <= 1.0);
    }
    // disjoint cover
    std::set<std::size_t> seen(split.train.begin(), split.train.end());
    for (const std::size_t i : split.test) CHECK_FALSE(seen.count(i));
}

TEST_CASE("stratified split refuses singleton classes") {
    CHECK_THROWS_AS(stratified_split({0, 0, 1}, 0.7, 1), PreconditionError);
}

TEST_CASE("cohort split: earlier years train") {
    const std::vector<int> years{2004, 2005, 2010, 2011, 2012};
    const TrainTestSplit split = cohort_split(years, 2010);
    CHECK(split.train == std::vector<std::size_t>{0, 1});
    CHECK(split.test == std::vector<std::size_t>{2, 3, 4});
    CHECK_THROWS_AS(cohort_split(years, 1990), PreconditionError);
}

TEST_CASE("separable toy reaches training accuracy 1.0") {
    Matrix x;
    std::vector<int> y;
    separable(120, x, y, 5);
    ForestConfig cfg;
    cfg.n_trees = 30;
    cfg.seed = 7;
    RandomForest model;
    model.train(x, y, cfg);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (model.predict(x.row(i).transpose()).label == y[static_cast<std::size_t>(i)]) ++correct;
    }
    CHECK(correct == y.size());
}

TEST_CASE("prediction distribution is normalized and ties break low") {
    Matrix x;
    std::vector<int> y;
    separable(80, x, y, 6);
    ForestConfig cfg;
    cfg.n_trees = 15;
    cfg.seed = 8;
    RandomForest model;
    model.train(x, y, cfg);
    for (Eigen::Index i = 0; i < 10; ++i) {
        const auto pred = model.predict(x.row(i).transpose());
        double sum = 0.0;
        for (const double v : pred.distribution) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(model.predict(Vector::Zero(3)), PreconditionError);
}

TEST_CASE("determinism: same seed gives identical serialized model bytes") {
    Matrix x;
    std::vector<int> y;
    separable(100, x, y, 9);
    ForestConfig cfg;
    cfg.n_trees = 20;
    cfg.seed = 77;
    RandomForest a, b;
    a.train(x, y, cfg);
    b.train(x, y, cfg);
    CHECK(a.to_json().dump() == b.to_json().dump());
    cfg.seed = 78;
    RandomForest c;
    c.train(x, y, cfg);
    CHECK(a.to_json().dump() != c.to_json().dump());
}

TEST_CASE("model json round trip preserves predictions") {
    Matrix x;
    std::vector<int> y;
    separable(90, x, y, 10);
    ForestConfig cfg;
    cfg.n_trees = 12;
    cfg.seed = 3;
    RandomForest model;
    model.train(x, y, cfg);
    model.feature_names = {"a", "b", "c", "d", "e"};
    const RandomForest back = RandomForest::from_json(model.to_json());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        CHECK(back.predict(x.row(i).transpose()).label == model.predict(x.row(i).transpose()).label);
    }
}

TEST_CASE("importance sums to one and finds the planted driver") {
    Rng rng(11);
    const int n = 300;
    Matrix x(n, 8);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < 8; ++d) x(i, d) = rng.normal(0, 1);
        y.push_back(x(i, 3) > 0 ? 1 : 0);  // only feature 3 matters
    }
    ForestConfig cfg;
    cfg.n_trees = 60;
    cfg.seed = 12;
    RandomForest model;
    model.train(x, y, cfg);
    const auto importance = model.feature_importance();
    double sum = 0.0;
    for (const double v : importance) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t d = 0; d < 8; ++d) {
        if (d != 3) CHECK(importance[3] > importance[d]);
    }
    CHECK(importance[3] > 0.5);
}

TEST_CASE("evaluate: perfect predictor and baselines") {
    Matrix x;
    std::vector<int> y;
    separable(200, x, y, 13);
    ForestConfig cfg;
    cfg.n_trees = 40;
    cfg.seed = 5;
    const TrainTestSplit split = stratified_split(y, 0.7, 21);
    Matrix x_train(static_cast<Eigen::Index>(split.train.size()), x.cols());
    Matrix x_test(static_cast<Eigen::Index>(split.test.size()), x.cols());
    std::vector<int> y_train, y_test;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
        x_train.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(split.train[i]));
        y_train.push_back(y[split.train[i]]);
    }
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        x_test.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(split.test[i]));
        y_test.push_back(y[split.test[i]]);
    }
    RandomForest model;
    model.train(x_train, y_train, cfg);
    const EvalReport report = evaluate(model, x_test, y_test);
    CHECK(report.accuracy == doctest::Approx(1.0));
    CHECK(report.macro_f1 == doctest::Approx(1.0));
    CHECK(report.random_baseline == doctest::Approx(0.5));
    CHECK(report.majority_baseline == doctest::Approx(0.5).epsilon(0.05));
    // confusion accounting: sum of cells = |test|
    CHECK(report.confusion.sum() == static_cast<int>(y_test.size()));
    // row sums = class test counts
    std::map<int, int> counts;
    for (const int l : y_test) ++counts[l];
    CHECK(report.confusion.row(0).sum() == counts[0]);
    CHECK(report.confusion.row(1).sum() == counts[1]);
}

TEST_CASE("label-shuffled control: CV accuracy near 1/K") {
    Rng rng(14);
    const int n = 200;
    const int k = 4;
    Matrix x(n, 6);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < 6; ++d) x(i, d) = rng.normal(0, 1);
        y.push_back(i % k);  // labels carry no signal
    }
    ForestConfig cfg;
    cfg.n_trees = 40;
    cfg.seed = 15;
    const CvResult cv = cross_validate(x, y, 5, cfg, 16);
    CHECK(cv.fold_accuracy.size() == 5);
    CHECK(std::abs(cv.accuracy_mean - 1.0 / k) < 0.07);
}

TEST_CASE("degenerate single-class training set is rejected") {
    Matrix x = Matrix::Random(20, 3);
    std::vector<int> y(20, 1);
    ForestConfig cfg;
    RandomForest model;
    CHECK_THROWS_AS(model.train(x, y, cfg), PreconditionError);
}

TEST_CASE("tuning picks a grid candidate by macro F1") {
    Matrix x;
    std::vector<int> y;
    separable(150, x, y, 17);
    ForestConfig base;
    base.n_trees = 10;
    base.seed = 18;
    const ForestConfig tuned = tune_forest(x, y, 3, base, {10, 30}, {0, 3}, {1}, 19);
    CHECK((tuned.n_trees == 10 || tuned.n_trees == 30));
    CHECK((tuned.max_depth == 0 || tuned.max_depth == 3));
}

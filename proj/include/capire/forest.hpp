#pragma once

#include "capire/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace capire {

struct SplitConfig {
    std::string mode = "stratified_random";  // or cohort_temporal
    double train_fraction = 0.70;
    int cv_folds = 5;
    int split_year = 0;
    std::uint64_t seed = 1;
};

struct ForestConfig {
    int n_trees = 200;
    int max_depth = 0;  // 0 = unlimited
    int min_leaf = 1;
    int features_per_split = 0;  // 0 = ceil(sqrt(d))
    std::uint64_t seed = 1;
};

struct TrainTestSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Per-class proportions preserved within one member. Throws on classes with
// fewer than 2 members.
TrainTestSplit stratified_split(const std::vector<int>& labels, double train_fraction,
                                std::uint64_t seed);
// Earlier cohorts train, later ones test.
TrainTestSplit cohort_split(const std::vector<int>& cohort_years, int split_year);

struct TreeNode {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_class = 0;
    std::vector<double> class_counts;
};

struct Tree {
    std::vector<TreeNode> nodes;
    int predict(const double* row) const;
};

class RandomForest {
public:
    // Labels are arbitrary ints; internally mapped to sorted unique classes.
    void train(const Matrix& x, const std::vector<int>& y, const ForestConfig& config);

    struct Prediction {
        int label = 0;
        std::vector<double> distribution;  // over classes(), sums to 1
    };
    Prediction predict(const Vector& row) const;

    const std::vector<int>& classes() const { return classes_; }
    const std::vector<double>& train_class_counts() const { return train_class_counts_; }
    // Mean-decrease-in-impurity importance, normalized to sum 1.
    std::vector<double> feature_importance() const;

    std::vector<std::string> feature_names;  // set by the caller before serializing
    nlohmann::json to_json() const;
    static RandomForest from_json(const nlohmann::json& j);

private:
    std::vector<Tree> trees_;
    std::vector<int> classes_;
    std::vector<double> train_class_counts_;
    std::vector<double> importance_raw_;
    ForestConfig config_;
    Eigen::Index n_features_ = 0;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct EvalReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::map<int, ClassMetrics> per_class;
    Eigen::MatrixXi confusion;  // rows = true class, cols = predicted
    double majority_baseline = 0.0;   // majority train class measured on test
    double random_baseline = 0.0;     // 1 / K
    double cv_accuracy_mean = 0.0;
    double cv_accuracy_std = 0.0;
    std::vector<double> cv_fold_accuracy;

    nlohmann::json to_json(const std::vector<int>& classes) const;
};

EvalReport evaluate(const RandomForest& model, const Matrix& x_test,
                    const std::vector<int>& y_test);

struct CvResult {
    std::vector<double> fold_accuracy;
    std::vector<double> fold_macro_f1;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double macro_f1_mean = 0.0;
};

CvResult cross_validate(const Matrix& x, const std::vector<int>& y, int folds,
                        const ForestConfig& config, std::uint64_t seed);

// Grid search by stratified k-fold macro F1; empty grids keep base values.
ForestConfig tune_forest(const Matrix& x, const std::vector<int>& y, int folds,
                         const ForestConfig& base, const std::vector<int>& n_trees_grid,
                         const std::vector<int>& max_depth_grid,
                         const std::vector<int>& min_leaf_grid, std::uint64_t seed);

}  // namespace capire

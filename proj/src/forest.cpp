#include "capire/forest.hpp"

#include "capire/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace capire {

TrainTestSplit stratified_split(const std::vector<int>& labels, double train_fraction,
                                std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw PreconditionError("stratified_split: fraction must be in (0, 1)");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    TrainTestSplit split;
    Rng rng(seed);
    for (auto& [label, members] : by_class) {
        if (members.size() < 2)
            throw PreconditionError("stratified_split: class " + std::to_string(label) +
                                    " has fewer than 2 members, cannot stratify");
        rng.shuffle(members);
        std::size_t n_train = static_cast<std::size_t>(
            std::lround(train_fraction * static_cast<double>(members.size())));
        n_train = std::max<std::size_t>(1, std::min(members.size() - 1, n_train));
        for (std::size_t i = 0; i < members.size(); ++i) {
            (i < n_train ? split.train : split.test).push_back(members[i]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

TrainTestSplit cohort_split(const std::vector<int>& cohort_years, int split_year) {
    TrainTestSplit split;
    for (std::size_t i = 0; i < cohort_years.size(); ++i) {
        (cohort_years[i] < split_year ? split.train : split.test).push_back(i);
    }
    if (split.train.empty() || split.test.empty())
        throw PreconditionError("cohort_split: split year " + std::to_string(split_year) +
                                " leaves an empty partition");
    return split;
}

int Tree::predict(const double* row) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const TreeNode& nd = nodes[static_cast<std::size_t>(node)];
        node = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(node)].leaf_class;
}

namespace {

double gini(const std::vector<double>& counts, double total) {
    if (total <= 0.0) return 0.0;
    double g = 1.0;
    for (double c : counts) {
        const double p = c / total;
        g -= p * p;
    }
    return g;
}

struct TreeBuilder {
    const Matrix& x;
    const std::vector<int>& y_enc;  // encoded 0..K-1
    int n_classes;
    const ForestConfig& config;
    int mtry;
    Rng rng;
    Tree tree;
    std::vector<double>& importance;  // per original feature, accumulated

    int build(std::vector<std::size_t>& samples, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});

        std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
        for (const std::size_t s : samples) counts[static_cast<std::size_t>(y_enc[s])] += 1.0;
        const double total = static_cast<double>(samples.size());
        const double node_gini = gini(counts, total);

        int majority = 0;
        for (int c = 1; c < n_classes; ++c) {
            if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(majority)])
                majority = c;  // ties keep the lower class index
        }
        tree.nodes[static_cast<std::size_t>(node_id)].leaf_class = majority;
        tree.nodes[static_cast<std::size_t>(node_id)].class_counts = counts;

        const bool depth_capped = config.max_depth > 0 && depth >= config.max_depth;
        if (node_gini <= 0.0 || depth_capped ||
            samples.size() < 2 * static_cast<std::size_t>(config.min_leaf)) {
            return node_id;
        }

        // random feature subset for this node
        std::vector<int> features(static_cast<std::size_t>(x.cols()));
        std::iota(features.begin(), features.end(), 0);
        for (int i = 0; i < mtry && i < static_cast<int>(features.size()); ++i) {
            const std::size_t j =
                static_cast<std::size_t>(i) + rng.index(features.size() - static_cast<std::size_t>(i));
            std::swap(features[static_cast<std::size_t>(i)], features[j]);
        }

        double best_decrease = 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::pair<double, int>> vals(samples.size());

        for (int fi = 0; fi < mtry && fi < static_cast<int>(features.size()); ++fi) {
            const int f = features[static_cast<std::size_t>(fi)];
            for (std::size_t i = 0; i < samples.size(); ++i) {
                vals[i] = {x(static_cast<Eigen::Index>(samples[i]), f), y_enc[samples[i]]};
            }
            std::sort(vals.begin(), vals.end());
            std::vector<double> left(static_cast<std::size_t>(n_classes), 0.0);
            std::vector<double> right = counts;
            double n_left = 0.0;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                left[static_cast<std::size_t>(vals[i].second)] += 1.0;
                right[static_cast<std::size_t>(vals[i].second)] -= 1.0;
                n_left += 1.0;
                if (vals[i].first == vals[i + 1].first) continue;  // no cut between equal values
                const double n_right = total - n_left;
                if (n_left < config.min_leaf || n_right < config.min_leaf) continue;
                const double decrease = node_gini - (n_left / total) * gini(left, n_left) -
                                        (n_right / total) * gini(right, n_right);
                if (decrease > best_decrease) {
                    best_decrease = decrease;
                    best_feature = f;
                    best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                }
            }
        }

        if (best_feature < 0) return node_id;

        std::vector<std::size_t> left_samples, right_samples;
        for (const std::size_t s : samples) {
            (x(static_cast<Eigen::Index>(s), best_feature) <= best_threshold ? left_samples
                                                                             : right_samples)
                .push_back(s);
        }
        if (left_samples.empty() || right_samples.empty()) return node_id;

        importance[static_cast<std::size_t>(best_feature)] += total * best_decrease;

        samples.clear();
        samples.shrink_to_fit();
        const int left_id = build(left_samples, depth + 1);
        left_samples.clear();
        const int right_id = build(right_samples, depth + 1);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left_id;
        node.right = right_id;
        return node_id;
    }
};

}  // namespace

void RandomForest::train(const Matrix& x, const std::vector<int>& y, const ForestConfig& config) {
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw PreconditionError("train: row/label mismatch");
    if (config.n_trees < 1) throw ConfigError("forest.n_trees must be >= 1");

    classes_.assign(y.begin(), y.end());
    std::sort(classes_.begin(), classes_.end());
    classes_.erase(std::unique(classes_.begin(), classes_.end()), classes_.end());
    if (classes_.size() < 2)
        throw PreconditionError("train: need at least 2 classes, got " +
                                std::to_string(classes_.size()));

    std::map<int, int> encode;
    for (std::size_t i = 0; i < classes_.size(); ++i) encode[classes_[i]] = static_cast<int>(i);
    std::vector<int> y_enc(y.size());
    train_class_counts_.assign(classes_.size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y_enc[i] = encode[y[i]];
        train_class_counts_[static_cast<std::size_t>(y_enc[i])] += 1.0;
    }

    config_ = config;
    n_features_ = x.cols();
    const int mtry = config.features_per_split > 0
                         ? config.features_per_split
                         : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));

    trees_.clear();
    importance_raw_.assign(static_cast<std::size_t>(x.cols()), 0.0);
    const std::size_t n = y.size();
    for (int t = 0; t < config.n_trees; ++t) {
        // per-tree derived seed: parallel and serial schedules agree
        Rng boot(derive_seed(config.seed, "tree-bootstrap", static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> samples(n);
        for (std::size_t i = 0; i < n; ++i) samples[i] = boot.index(n);
        TreeBuilder builder{x,
                            y_enc,
                            static_cast<int>(classes_.size()),
                            config,
                            mtry,
                            Rng(derive_seed(config.seed, "tree-grow", static_cast<std::uint64_t>(t))),
                            {},
                            importance_raw_};
        builder.build(samples, 0);
        trees_.push_back(std::move(builder.tree));
    }
}

RandomForest::Prediction RandomForest::predict(const Vector& row) const {
    if (trees_.empty()) throw PreconditionError("predict: model not trained");
    if (row.size() != n_features_)
        throw PreconditionError("predict: expected " + std::to_string(n_features_) +
                                " features, got " + std::to_string(row.size()));
    Prediction pred;
    pred.distribution.assign(classes_.size(), 0.0);
    for (const auto& tree : trees_) {
        ++pred.distribution[static_cast<std::size_t>(tree.predict(row.data()))];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < pred.distribution.size(); ++c) {
        if (pred.distribution[c] > pred.distribution[best]) best = c;  // ties: lower class id
    }
    for (double& v : pred.distribution) v /= static_cast<double>(trees_.size());
    pred.label = classes_[best];
    return pred;
}

std::vector<double> RandomForest::feature_importance() const {
    std::vector<double> out = importance_raw_;
    double total = 0.0;
    for (double v : out) total += v;
    if (total > 0.0) {
        for (double& v : out) v /= total;
    }
    return out;
}

nlohmann::json RandomForest::to_json() const {
    nlohmann::json trees_json = nlohmann::json::array();
    for (const auto& tree : trees_) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf_class});
        }
        trees_json.push_back(std::move(nodes));
    }
    return nlohmann::json{{"schema_version", 1},
                          {"classes", classes_},
                          {"train_class_counts", train_class_counts_},
                          {"feature_names", feature_names},
                          {"n_features", n_features_},
                          {"importance_raw", importance_raw_},
                          {"config",
                           {{"n_trees", config_.n_trees},
                            {"max_depth", config_.max_depth},
                            {"min_leaf", config_.min_leaf},
                            {"features_per_split", config_.features_per_split},
                            {"seed", config_.seed}}},
                          {"trees", trees_json}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
    RandomForest f;
    f.classes_ = j.at("classes").get<std::vector<int>>();
    f.train_class_counts_ = j.at("train_class_counts").get<std::vector<double>>();
    f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    f.n_features_ = j.at("n_features").get<Eigen::Index>();
    f.importance_raw_ = j.at("importance_raw").get<std::vector<double>>();
    const auto& cfg = j.at("config");
    f.config_.n_trees = cfg.at("n_trees").get<int>();
    f.config_.max_depth = cfg.at("max_depth").get<int>();
    f.config_.min_leaf = cfg.at("min_leaf").get<int>();
    f.config_.features_per_split = cfg.at("features_per_split").get<int>();
    f.config_.seed = cfg.at("seed").get<std::uint64_t>();
    for (const auto& tj : j.at("trees")) {
        Tree tree;
        for (const auto& nj : tj) {
            TreeNode n;
            n.feature = nj.at(0).get<int>();
            n.threshold = nj.at(1).get<double>();
            n.left = nj.at(2).get<int>();
            n.right = nj.at(3).get<int>();
            n.leaf_class = nj.at(4).get<int>();
            tree.nodes.push_back(n);
        }
        f.trees_.push_back(std::move(tree));
    }
    return f;
}

nlohmann::json EvalReport::to_json(const std::vector<int>& classes) const {
    nlohmann::json per_class_json;
    for (const auto& [label, m] : per_class) {
        per_class_json[std::to_string(label)] = {{"precision", m.precision},
                                                 {"recall", m.recall},
                                                 {"f1", m.f1},
                                                 {"support", m.support}};
    }
    nlohmann::json conf = nlohmann::json::array();
    for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < confusion.cols(); ++c) row.push_back(confusion(r, c));
        conf.push_back(std::move(row));
    }
    return nlohmann::json{{"accuracy", accuracy},
                          {"macro_f1", macro_f1},
                          {"classes", classes},
                          {"per_class", per_class_json},
                          {"confusion_matrix", conf},
                          {"majority_baseline", majority_baseline},
                          {"random_baseline", random_baseline},
                          {"cv_accuracy_mean", cv_accuracy_mean},
                          {"cv_accuracy_std", cv_accuracy_std},
                          {"cv_fold_accuracy", cv_fold_accuracy}};
}

EvalReport evaluate(const RandomForest& model, const Matrix& x_test,
                    const std::vector<int>& y_test) {
    if (y_test.empty()) throw PreconditionError("evaluate: empty test set");
    const auto& classes = model.classes();
    std::map<int, int> encode;
    for (std::size_t i = 0; i < classes.size(); ++i) encode[classes[i]] = static_cast<int>(i);
    const int k = static_cast<int>(classes.size());

    EvalReport report;
    report.confusion = Eigen::MatrixXi::Zero(k, k);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y_test.size(); ++i) {
        const auto pred = model.predict(x_test.row(static_cast<Eigen::Index>(i)).transpose());
        const auto true_it = encode.find(y_test[i]);
        if (true_it == encode.end())
            throw PreconditionError("evaluate: test label " + std::to_string(y_test[i]) +
                                    " unseen in training");
        if (pred.label == y_test[i]) ++correct;
        report.confusion(true_it->second, encode[pred.label]) += 1;
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(y_test.size());

    double f1_sum = 0.0;
    for (int c = 0; c < k; ++c) {
        ClassMetrics m;
        const double tp = report.confusion(c, c);
        const double fp = report.confusion.col(c).sum() - tp;
        const double fn = report.confusion.row(c).sum() - tp;
        m.support = static_cast<std::size_t>(report.confusion.row(c).sum());
        m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                          : 0.0;
        report.per_class[classes[static_cast<std::size_t>(c)]] = m;
        f1_sum += m.f1;
    }
    report.macro_f1 = f1_sum / static_cast<double>(k);

    // baselines: the majority train class measured on the test set, and
    // uniform random assignment over K classes
    const auto& counts = model.train_class_counts();
    std::size_t majority_idx = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > counts[majority_idx]) majority_idx = c;
    }
    std::size_t majority_hits = 0;
    for (const int label : y_test) {
        if (label == classes[majority_idx]) ++majority_hits;
    }
    report.majority_baseline = static_cast<double>(majority_hits) / static_cast<double>(y_test.size());
    report.random_baseline = 1.0 / static_cast<double>(k);
    return report;
}

CvResult cross_validate(const Matrix& x, const std::vector<int>& y, int folds,
                        const ForestConfig& config, std::uint64_t seed) {
    if (folds < 2) throw PreconditionError("cross_validate: folds must be >= 2");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);

    // stratified fold assignment: shuffled members dealt round-robin
    std::vector<int> fold_of(y.size(), 0);
    Rng rng(derive_seed(seed, "cv-folds"));
    for (auto& [label, members] : by_class) {
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i) {
            fold_of[members[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
        }
    }

    CvResult result;
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < y.size(); ++i) {
            (fold_of[i] == f ? test_idx : train_idx).push_back(i);
        }
        if (test_idx.empty() || train_idx.empty()) continue;
        Matrix x_train(static_cast<Eigen::Index>(train_idx.size()), x.cols());
        Matrix x_test(static_cast<Eigen::Index>(test_idx.size()), x.cols());
        std::vector<int> y_train, y_test;
        for (std::size_t i = 0; i < train_idx.size(); ++i) {
            x_train.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(train_idx[i]));
            y_train.push_back(y[train_idx[i]]);
        }
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
            x_test.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(test_idx[i]));
            y_test.push_back(y[test_idx[i]]);
        }
        ForestConfig fold_config = config;
        fold_config.seed = derive_seed(seed, "cv-fold-model", static_cast<std::uint64_t>(f));
        RandomForest model;
        model.train(x_train, y_train, fold_config);

        // test rows may contain classes absent from this fold's training set
        std::size_t correct = 0;
        std::map<int, std::array<double, 3>> prf;  // tp, fp, fn
        for (std::size_t i = 0; i < y_test.size(); ++i) {
            const auto pred = model.predict(x_test.row(static_cast<Eigen::Index>(i)).transpose());
            if (pred.label == y_test[i]) ++correct;
            if (pred.label == y_test[i]) prf[y_test[i]][0] += 1.0;
            else {
                prf[pred.label][1] += 1.0;
                prf[y_test[i]][2] += 1.0;
            }
        }
        result.fold_accuracy.push_back(static_cast<double>(correct) /
                                       static_cast<double>(y_test.size()));
        double f1_sum = 0.0;
        std::size_t n_classes = 0;
        for (const auto& [label, v] : prf) {
            const double precision = v[0] + v[1] > 0 ? v[0] / (v[0] + v[1]) : 0.0;
            const double recall = v[0] + v[2] > 0 ? v[0] / (v[0] + v[2]) : 0.0;
            f1_sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
            ++n_classes;
        }
        result.fold_macro_f1.push_back(n_classes ? f1_sum / static_cast<double>(n_classes) : 0.0);
    }

    double mean = 0.0;
    for (double a : result.fold_accuracy) mean += a;
    mean /= static_cast<double>(result.fold_accuracy.size());
    double var = 0.0;
    for (double a : result.fold_accuracy) var += (a - mean) * (a - mean);
    var /= static_cast<double>(result.fold_accuracy.size());
    result.accuracy_mean = mean;
    result.accuracy_std = std::sqrt(var);
    double f1_mean = 0.0;
    for (double v : result.fold_macro_f1) f1_mean += v;
    result.macro_f1_mean = f1_mean / static_cast<double>(result.fold_macro_f1.size());
    return result;
}

ForestConfig tune_forest(const Matrix& x, const std::vector<int>& y, int folds,
                         const ForestConfig& base, const std::vector<int>& n_trees_grid,
                         const std::vector<int>& max_depth_grid,
                         const std::vector<int>& min_leaf_grid, std::uint64_t seed) {
    const std::vector<int> trees = n_trees_grid.empty() ? std::vector<int>{base.n_trees} : n_trees_grid;
    const std::vector<int> depths =
        max_depth_grid.empty() ? std::vector<int>{base.max_depth} : max_depth_grid;
    const std::vector<int> leaves =
        min_leaf_grid.empty() ? std::vector<int>{base.min_leaf} : min_leaf_grid;

    ForestConfig best = base;
    best.n_trees = trees[0];
    best.max_depth = depths[0];
    best.min_leaf = leaves[0];
    if (trees.size() * depths.size() * leaves.size() <= 1) return best;

    double best_f1 = -1.0;
    for (const int nt : trees) {
        for (const int md : depths) {
            for (const int ml : leaves) {
                ForestConfig candidate = base;
                candidate.n_trees = nt;
                candidate.max_depth = md;
                candidate.min_leaf = ml;
                const CvResult cv = cross_validate(x, y, folds, candidate, seed);
                if (cv.macro_f1_mean > best_f1 + 1e-12) {
                    best_f1 = cv.macro_f1_mean;
                    best = candidate;
                }
            }
        }
    }
    return best;
}

}  // namespace capire

#include "capire/validation_suite.hpp"

#include "capire/csv.hpp"
#include "capire/kmeans.hpp"
#include "capire/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace capire {

namespace {

ScalingStats fit_plain(const Matrix& rows) {
    std::vector<std::string> names(static_cast<std::size_t>(rows.cols()));
    for (std::size_t i = 0; i < names.size(); ++i) names[i] = "c" + std::to_string(i);
    return standardize_fit(rows, names);
}

Matrix apply_plain(const ScalingStats& stats, const Matrix& rows) {
    std::vector<std::string> names(static_cast<std::size_t>(rows.cols()));
    for (std::size_t i = 0; i < names.size(); ++i) names[i] = "c" + std::to_string(i);
    return standardize_apply(stats, rows, names);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

nlohmann::json StabilityReport::to_json() const {
    return nlohmann::json{{"resamples", resamples}, {"skipped", skipped},
                          {"ari", ari},             {"mean", mean},
                          {"sd", sd},               {"ci_2_5", ci_lo},
                          {"ci_97_5", ci_hi}};
}

StabilityReport bootstrap_stability(const Matrix& analysis_unscaled,
                                    const std::vector<int>& reference_raw_labels,
                                    const EmbeddingParams& embedding, const DbscanConfig& dbscan_cfg,
                                    int resamples, std::uint64_t seed) {
    const Eigen::Index n = analysis_unscaled.rows();
    if (static_cast<std::size_t>(n) != reference_raw_labels.size())
        throw PreconditionError("bootstrap_stability: reference labels/rows mismatch");

    StabilityReport report;
    report.resamples = resamples;
    for (int b = 0; b < resamples; ++b) {
        Rng rng(derive_seed(seed, "bootstrap-resample", static_cast<std::uint64_t>(b)));
        std::vector<std::size_t> picks(static_cast<std::size_t>(n));
        for (auto& p : picks) p = rng.index(static_cast<std::size_t>(n));
        std::sort(picks.begin(), picks.end());

        std::set<std::size_t> distinct(picks.begin(), picks.end());
        if (distinct.size() <= static_cast<std::size_t>(embedding.n_neighbors)) {
            ++report.skipped;
            continue;
        }

        Matrix rows(static_cast<Eigen::Index>(picks.size()), analysis_unscaled.cols());
        for (std::size_t i = 0; i < picks.size(); ++i) {
            rows.row(static_cast<Eigen::Index>(i)) =
                analysis_unscaled.row(static_cast<Eigen::Index>(picks[i]));
        }
        const Matrix scaled = apply_plain(fit_plain(rows), rows);

        EmbeddingParams ep = embedding;
        ep.seed = derive_seed(seed, "bootstrap-embed", static_cast<std::uint64_t>(b));
        Matrix coords;
        try {
            coords = embed(scaled, ep);
        } catch (const PreconditionError&) {
            ++report.skipped;  // degenerate resample
            continue;
        }
        double eps = dbscan_cfg.eps;
        if (eps <= 0.0) eps = suggest_eps(kdistance(coords, dbscan_cfg.min_pts));
        const std::vector<int> labels = dbscan(coords, eps, dbscan_cfg.min_pts);

        // one vote per distinct student: first occurrence in the sorted picks
        std::vector<int> sample_label, reference_label;
        std::size_t i = 0;
        while (i < picks.size()) {
            sample_label.push_back(labels[i]);
            reference_label.push_back(reference_raw_labels[picks[i]]);
            std::size_t j = i;
            while (j < picks.size() && picks[j] == picks[i]) ++j;
            i = j;
        }
        report.ari.push_back(stats::adjusted_rand_index(sample_label, reference_label));
    }
    report.mean = mean_of(report.ari);
    report.sd = sd_of(report.ari, report.mean);
    if (!report.ari.empty()) {
        report.ci_lo = stats::percentile(report.ari, 0.025);
        report.ci_hi = stats::percentile(report.ari, 0.975);
    }
    return report;
}

nlohmann::json PermutationReport::to_json() const {
    return nlohmann::json{{"observed_silhouette", observed},
                          {"null_scores", null_scores},
                          {"null_mean", null_mean},
                          {"p_value", p_value},
                          {"permutations", null_scores.size()}};
}

PermutationReport permutation_silhouette_test(const Matrix& coordinates,
                                              const std::vector<int>& labels, int permutations,
                                              std::uint64_t seed) {
    std::set<int> cluster_ids;
    std::vector<std::size_t> clustered_rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= 0) {
            cluster_ids.insert(labels[i]);
            clustered_rows.push_back(i);
        }
    }
    if (cluster_ids.size() < 2)
        throw PreconditionError("permutation_silhouette_test: need >= 2 retained clusters");

    PermutationReport report;
    report.observed = silhouette_mean(coordinates, labels);
    Rng rng(derive_seed(seed, "permutation-test"));
    int ge = 0;
    std::vector<int> permuted = labels;
    std::vector<int> pool;
    pool.reserve(clustered_rows.size());
    for (const std::size_t i : clustered_rows) pool.push_back(labels[i]);
    for (int p = 0; p < permutations; ++p) {
        rng.shuffle(pool);
        for (std::size_t i = 0; i < clustered_rows.size(); ++i) permuted[clustered_rows[i]] = pool[i];
        const double s = silhouette_mean(coordinates, permuted);
        report.null_scores.push_back(s);
        if (s >= report.observed) ++ge;
    }
    report.null_mean = mean_of(report.null_scores);
    report.p_value = (1.0 + ge) / (static_cast<double>(permutations) + 1.0);
    return report;
}

nlohmann::json TemporalReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : deltas) {
        arr.push_back({{"archetype_id", d.archetype_id},
                       {"period1_members", d.period1_members},
                       {"period2_members", d.period2_members},
                       {"period1_attrition", d.period1_attrition},
                       {"period2_attrition", d.period2_attrition},
                       {"delta_points", d.defined ? nlohmann::json(d.delta) : nlohmann::json()},
                       {"defined", d.defined}});
    }
    return nlohmann::json{{"split_year", split_year},
                          {"archetypes", arr},
                          {"max_abs_delta_points", max_abs_delta},
                          {"undefined_archetypes", undefined_archetypes}};
}

TemporalReport temporal_stability(const Matrix& analysis_unscaled,
                                  const std::vector<int>& cohort_years,
                                  const std::vector<int>& attrition_flags, int split_year,
                                  const EmbeddingParams& embedding, const DbscanConfig& dbscan_cfg,
                                  std::size_t min_archetype_size) {
    const std::size_t n = static_cast<std::size_t>(analysis_unscaled.rows());
    if (cohort_years.size() != n || attrition_flags.size() != n)
        throw PreconditionError("temporal_stability: row metadata mismatch");

    std::vector<std::size_t> p1, p2;
    for (std::size_t i = 0; i < n; ++i) (cohort_years[i] < split_year ? p1 : p2).push_back(i);
    if (p1.empty() || p2.empty())
        throw PreconditionError("temporal_stability: a period is empty at split year " +
                                std::to_string(split_year));

    Matrix rows1(static_cast<Eigen::Index>(p1.size()), analysis_unscaled.cols());
    for (std::size_t i = 0; i < p1.size(); ++i)
        rows1.row(static_cast<Eigen::Index>(i)) = analysis_unscaled.row(static_cast<Eigen::Index>(p1[i]));
    Matrix rows2(static_cast<Eigen::Index>(p2.size()), analysis_unscaled.cols());
    for (std::size_t i = 0; i < p2.size(); ++i)
        rows2.row(static_cast<Eigen::Index>(i)) = analysis_unscaled.row(static_cast<Eigen::Index>(p2[i]));

    // scaling fitted on period 1 only, applied to both periods
    const ScalingStats scaler = fit_plain(rows1);
    const Matrix std1 = apply_plain(scaler, rows1);
    const Matrix std2 = apply_plain(scaler, rows2);

    const ClusterSolution solution = run_cluster(std1, embedding, dbscan_cfg, min_archetype_size);

    // project period 2 through nearest neighbor in feature space
    std::vector<int> labels2(p2.size(), -1);
    for (Eigen::Index i = 0; i < std2.rows(); ++i) {
        Eigen::Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < std1.rows(); ++j) {
            const double d = (std2.row(i) - std1.row(j)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        labels2[static_cast<std::size_t>(i)] = solution.labels[static_cast<std::size_t>(best)];
    }

    TemporalReport report;
    report.split_year = split_year;
    for (const int id : solution.retained_ids) {
        ArchetypeDelta d;
        d.archetype_id = id;
        double a1 = 0.0, a2 = 0.0;
        for (std::size_t i = 0; i < p1.size(); ++i) {
            if (solution.labels[i] == id) {
                ++d.period1_members;
                a1 += attrition_flags[p1[i]];
            }
        }
        for (std::size_t i = 0; i < p2.size(); ++i) {
            if (labels2[i] == id) {
                ++d.period2_members;
                a2 += attrition_flags[p2[i]];
            }
        }
        if (d.period1_members > 0) d.period1_attrition = a1 / static_cast<double>(d.period1_members);
        if (d.period2_members > 0) d.period2_attrition = a2 / static_cast<double>(d.period2_members);
        d.defined = d.period1_members > 0 && d.period2_members > 0;
        if (d.defined) {
            d.delta = 100.0 * (d.period2_attrition - d.period1_attrition);
            report.max_abs_delta = std::max(report.max_abs_delta, std::abs(d.delta));
        } else {
            ++report.undefined_archetypes;
        }
        report.deltas.push_back(d);
    }
    return report;
}

nlohmann::json SensitivityReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cells) {
        arr.push_back({{"n_neighbors", c.n_neighbors},
                       {"eps_factor", c.eps_factor},
                       {"min_pts", c.min_pts},
                       {"ari", c.ok ? nlohmann::json(c.ari) : nlohmann::json()},
                       {"ok", c.ok},
                       {"error", c.error}});
    }
    return nlohmann::json{{"cells", arr},
                          {"mean_ari", mean},
                          {"min_ari", min},
                          {"max_ari", max},
                          {"failed_cells", failed_cells}};
}

std::string SensitivityReport::to_csv() const {
    std::ostringstream out;
    out << "n_neighbors,eps_factor,min_pts,ari,ok,error\n";
    for (const auto& c : cells) {
        out << c.n_neighbors << ',' << format_double(c.eps_factor) << ',' << c.min_pts << ',';
        if (c.ok) out << format_double(c.ari);
        out << ',' << (c.ok ? "1" : "0") << ',' << csv::escape(c.error) << '\n';
    }
    return out.str();
}

SensitivityReport hyperparameter_sensitivity(const Matrix& analysis_std,
                                             const std::vector<int>& reference_raw_labels,
                                             double reference_eps, const EmbeddingParams& embedding,
                                             const SensitivityGrid& grid) {
    SensitivityReport report;
    std::vector<double> values;
    for (const int nn : grid.n_neighbors) {
        // one embedding per n_neighbors value, shared across eps/min_pts cells
        EmbeddingParams ep = embedding;
        ep.n_neighbors = nn;
        Matrix coords;
        std::string embed_error;
        try {
            coords = embed(analysis_std, ep);
        } catch (const std::exception& e) {
            embed_error = e.what();
        }
        for (const double factor : grid.eps_factor) {
            for (const int mp : grid.min_pts) {
                SensitivityCell cell;
                cell.n_neighbors = nn;
                cell.eps_factor = factor;
                cell.min_pts = mp;
                if (!embed_error.empty()) {
                    cell.error = embed_error;
                    ++report.failed_cells;
                    report.cells.push_back(cell);
                    continue;
                }
                try {
                    const std::vector<int> labels = dbscan(coords, reference_eps * factor, mp);
                    cell.ari = stats::adjusted_rand_index(labels, reference_raw_labels);
                    cell.ok = true;
                    values.push_back(cell.ari);
                } catch (const std::exception& e) {
                    cell.error = e.what();
                    ++report.failed_cells;
                }
                report.cells.push_back(cell);
            }
        }
    }
    if (!values.empty()) {
        report.mean = mean_of(values);
        report.min = *std::min_element(values.begin(), values.end());
        report.max = *std::max_element(values.begin(), values.end());
    }
    return report;
}

nlohmann::json NoiseAnalysisReport::to_json() const {
    nlohmann::json tests_json = nlohmann::json::array();
    for (const auto& t : tests) {
        tests_json.push_back({{"feature", t.feature},
                              {"mann_whitney_u", t.mann_whitney_u},
                              {"mann_whitney_p", t.mann_whitney_p},
                              {"levene_w", t.levene_w},
                              {"levene_p", t.levene_p},
                              {"noise_sd", t.noise_sd},
                              {"clustered_sd", t.clustered_sd},
                              {"n_noise", t.n_noise},
                              {"n_clustered", t.n_clustered}});
    }
    nlohmann::json rc = nlohmann::json::array();
    for (const auto& r : reclustering) {
        rc.push_back({{"method", r.method},
                      {"k", r.k},
                      {"silhouette", r.silhouette},
                      {"sizes", r.sizes}});
    }
    return nlohmann::json{{"skipped", skipped},
                          {"skip_reason", skip_reason},
                          {"feature_tests", tests_json},
                          {"reclustering", rc}};
}

NoiseAnalysisReport noise_analysis(const FeatureTable& matrix, const Matrix& analysis_std,
                                   const std::vector<int>& labels,
                                   const std::vector<std::string>& analysis_features,
                                   int min_group, std::uint64_t seed) {
    NoiseAnalysisReport report;
    std::vector<std::size_t> noise_rows, clustered_rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] < 0 ? noise_rows : clustered_rows).push_back(i);
    }
    if (noise_rows.empty() || static_cast<int>(noise_rows.size()) < min_group ||
        static_cast<int>(clustered_rows.size()) < min_group) {
        report.skipped = true;
        report.skip_reason = "residual group below " + std::to_string(min_group) + " members";
        return report;
    }

    for (const auto& feature : analysis_features) {
        const int col = matrix.column_index(feature);
        if (col < 0) continue;
        NoiseFeatureTest t;
        t.feature = feature;
        std::vector<double> noise_vals, clustered_vals;
        for (const std::size_t r : noise_rows) {
            const double v = matrix.values(static_cast<Eigen::Index>(r), col);
            if (!is_missing(v)) noise_vals.push_back(v);
        }
        for (const std::size_t r : clustered_rows) {
            const double v = matrix.values(static_cast<Eigen::Index>(r), col);
            if (!is_missing(v)) clustered_vals.push_back(v);
        }
        if (static_cast<int>(noise_vals.size()) < min_group ||
            static_cast<int>(clustered_vals.size()) < min_group)
            continue;
        const auto mw = stats::mann_whitney_u(noise_vals, clustered_vals);
        t.mann_whitney_u = mw.u;
        t.mann_whitney_p = mw.p_value;
        const auto lv = stats::levene_median({noise_vals, clustered_vals});
        t.levene_w = lv.statistic;
        t.levene_p = lv.p_value;
        t.noise_sd = sd_of(noise_vals, mean_of(noise_vals));
        t.clustered_sd = sd_of(clustered_vals, mean_of(clustered_vals));
        t.n_noise = noise_vals.size();
        t.n_clustered = clustered_vals.size();
        report.tests.push_back(std::move(t));
    }

    // re-cluster the residual rows in standardized feature space
    Matrix noise_pts(static_cast<Eigen::Index>(noise_rows.size()), analysis_std.cols());
    for (std::size_t i = 0; i < noise_rows.size(); ++i) {
        noise_pts.row(static_cast<Eigen::Index>(i)) =
            analysis_std.row(static_cast<Eigen::Index>(noise_rows[i]));
    }
    const int k_max = std::min<int>(6, static_cast<int>(noise_rows.size()) - 1);
    auto best_by_silhouette = [&](const std::string& method) {
        ReclusterSolution best;
        best.method = method;
        best.silhouette = -2.0;
        for (int k = 2; k <= k_max; ++k) {
            std::vector<int> lab;
            if (method == "kmeans") {
                lab = kmeans(noise_pts, k, derive_seed(seed, "noise-kmeans", static_cast<std::uint64_t>(k)))
                          .labels;
            } else {
                lab = agglomerative_average(noise_pts, k);
            }
            std::set<int> distinct(lab.begin(), lab.end());
            if (distinct.size() < 2) continue;
            const double s = silhouette_mean(noise_pts, lab);
            if (s > best.silhouette) {
                best.silhouette = s;
                best.k = static_cast<int>(distinct.size());
                best.sizes.clear();
                std::map<int, std::size_t> sizes;
                for (const int l : lab) ++sizes[l];
                for (const auto& [label, size] : sizes) best.sizes.push_back(size);
            }
        }
        return best;
    };
    if (k_max >= 2) {
        report.reclustering.push_back(best_by_silhouette("kmeans"));
        report.reclustering.push_back(best_by_silhouette("agglomerative"));
    }
    return report;
}

nlohmann::json SplitDiscrepancyReport::to_json() const {
    return nlohmann::json{{"random_split_accuracy", random_split_accuracy},
                          {"cohort_split_accuracy", cohort_split_accuracy},
                          {"gap", gap},
                          {"cohort_split_possible", cohort_split_possible},
                          {"note", note}};
}

SplitDiscrepancyReport split_discrepancy_diagnostic(const Matrix& x, const std::vector<int>& y,
                                                    const std::vector<int>& cohort_years,
                                                    double train_fraction, int split_year,
                                                    const ForestConfig& forest, std::uint64_t seed) {
    SplitDiscrepancyReport report;
    auto run_regime = [&](const TrainTestSplit& split, std::uint64_t model_seed) {
        Matrix x_train(static_cast<Eigen::Index>(split.train.size()), x.cols());
        Matrix x_test(static_cast<Eigen::Index>(split.test.size()), x.cols());
        std::vector<int> y_train, y_test;
        for (std::size_t i = 0; i < split.train.size(); ++i) {
            x_train.row(static_cast<Eigen::Index>(i)) =
                x.row(static_cast<Eigen::Index>(split.train[i]));
            y_train.push_back(y[split.train[i]]);
        }
        for (std::size_t i = 0; i < split.test.size(); ++i) {
            x_test.row(static_cast<Eigen::Index>(i)) =
                x.row(static_cast<Eigen::Index>(split.test[i]));
            y_test.push_back(y[split.test[i]]);
        }
        ForestConfig cfg = forest;
        cfg.seed = model_seed;
        RandomForest model;
        model.train(x_train, y_train, cfg);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < y_test.size(); ++i) {
            if (model.predict(x_test.row(static_cast<Eigen::Index>(i)).transpose()).label ==
                y_test[i])
                ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(y_test.size());
    };

    report.random_split_accuracy =
        run_regime(stratified_split(y, train_fraction, derive_seed(seed, "discrepancy-random")),
                   derive_seed(seed, "discrepancy-random-model"));
    std::set<int> years(cohort_years.begin(), cohort_years.end());
    if (years.size() < 2) {
        report.cohort_split_possible = false;
        report.note = "single-cohort dataset: cohort split impossible";
        report.gap = 0.0;
        return report;
    }
    try {
        report.cohort_split_accuracy = run_regime(cohort_split(cohort_years, split_year),
                                                  derive_seed(seed, "discrepancy-cohort-model"));
        report.gap = std::abs(report.random_split_accuracy - report.cohort_split_accuracy);
    } catch (const std::exception& e) {
        report.cohort_split_possible = false;
        report.note = e.what();
    }
    return report;
}

}  // namespace capire

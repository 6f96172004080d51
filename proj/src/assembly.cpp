#include "capire/assembly.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace capire {

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

nlohmann::json ImputeStats::to_json() const {
    return nlohmann::json{{"region_medians", region_medians},
                          {"train_means", train_means},
                          {"imputations_performed", imputations_performed}};
}

ImputeStats impute(FeatureTable& table, const Dictionary& dict,
                   const std::vector<std::string>& region_of_row, const ImputeStats* frozen) {
    if (region_of_row.size() != table.student_ids.size())
        throw PreconditionError("impute: region list length mismatch");

    ImputeStats stats;
    const Eigen::Index rows = table.values.rows();

    for (const auto& def : dict.features) {
        const int col = table.column_index(def.name);
        if (col < 0) continue;  // not admissible in this run
        auto column = table.values.col(col);

        if (def.imputation == ImputePolicy::Never || def.imputation == ImputePolicy::Passthrough)
            continue;

        if (def.imputation == ImputePolicy::TrainMean) {
            double mean;
            if (frozen) {
                const auto it = frozen->train_means.find(def.name);
                if (it == frozen->train_means.end())
                    throw ConfigError("frozen imputation stats lack column '" + def.name + "'");
                mean = it->second;
            } else {
                double sum = 0.0;
                std::size_t n = 0;
                for (Eigen::Index r = 0; r < rows; ++r) {
                    if (!is_missing(column(r))) {
                        sum += column(r);
                        ++n;
                    }
                }
                mean = n ? sum / static_cast<double>(n) : 0.0;
            }
            stats.train_means[def.name] = mean;
            for (Eigen::Index r = 0; r < rows; ++r) {
                if (is_missing(column(r))) {
                    column(r) = mean;
                    ++stats.imputations_performed;
                }
            }
            continue;
        }

        // region median with global fallback
        std::map<std::string, double> medians;
        if (frozen) {
            const auto it = frozen->region_medians.find(def.name);
            if (it == frozen->region_medians.end())
                throw ConfigError("frozen imputation stats lack column '" + def.name + "'");
            medians = it->second;
        } else {
            std::map<std::string, std::vector<double>> by_region;
            std::vector<double> all;
            for (Eigen::Index r = 0; r < rows; ++r) {
                if (is_missing(column(r))) continue;
                by_region[region_of_row[static_cast<std::size_t>(r)]].push_back(column(r));
                all.push_back(column(r));
            }
            for (auto& [region, vals] : by_region) medians[region] = median_of(vals);
            medians[""] = all.empty() ? 0.0 : median_of(all);
        }
        stats.region_medians[def.name] = medians;
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (!is_missing(column(r))) continue;
            const std::string& region = region_of_row[static_cast<std::size_t>(r)];
            auto it = medians.find(region);
            if (it == medians.end()) it = medians.find("");
            column(r) = it->second;
            ++stats.imputations_performed;
        }
    }
    return stats;
}

nlohmann::json ScalingStats::to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (std::size_t i = 0; i < columns.size(); ++i) {
        cols.push_back({{"column", columns[i]},
                        {"mean", mean[i]},
                        {"std", stddev[i]},
                        {"constant", static_cast<bool>(constant[i])}});
    }
    return nlohmann::json{{"columns", cols}};
}

ScalingStats ScalingStats::from_json(const nlohmann::json& j) {
    ScalingStats s;
    for (const auto& c : j.at("columns")) {
        s.columns.push_back(c.at("column").get<std::string>());
        s.mean.push_back(c.at("mean").get<double>());
        s.stddev.push_back(c.at("std").get<double>());
        s.constant.push_back(c.at("constant").get<bool>());
    }
    return s;
}

ScalingStats standardize_fit(const Matrix& train_rows, const std::vector<std::string>& columns) {
    if (static_cast<std::size_t>(train_rows.cols()) != columns.size())
        throw PreconditionError("standardize_fit: column count mismatch");
    ScalingStats stats;
    stats.columns = columns;
    for (Eigen::Index c = 0; c < train_rows.cols(); ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (Eigen::Index r = 0; r < train_rows.rows(); ++r) {
            if (!is_missing(train_rows(r, c))) {
                sum += train_rows(r, c);
                ++n;
            }
        }
        const double mean = n ? sum / static_cast<double>(n) : 0.0;
        double var = 0.0;
        for (Eigen::Index r = 0; r < train_rows.rows(); ++r) {
            if (!is_missing(train_rows(r, c))) {
                const double d = train_rows(r, c) - mean;
                var += d * d;
            }
        }
        var = n ? var / static_cast<double>(n) : 0.0;  // population variance
        const double sd = std::sqrt(var);
        stats.mean.push_back(mean);
        stats.stddev.push_back(sd);
        stats.constant.push_back(sd <= 0.0);
    }
    return stats;
}

Matrix standardize_apply(const ScalingStats& stats, const Matrix& rows,
                         const std::vector<std::string>& columns) {
    if (columns != stats.columns)
        throw PreconditionError("standardize_apply: column set does not match fitted stats");
    if (static_cast<std::size_t>(rows.cols()) != columns.size())
        throw PreconditionError("standardize_apply: column count mismatch");
    Matrix out = rows;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        if (stats.constant[static_cast<std::size_t>(c)]) continue;  // zero-variance passthrough
        const double m = stats.mean[static_cast<std::size_t>(c)];
        const double sd = stats.stddev[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            if (!is_missing(out(r, c))) out(r, c) = (out(r, c) - m) / sd;
        }
    }
    return out;
}

std::vector<double> interpolate_series(std::vector<double> series) {
    const std::size_t n = series.size();
    std::size_t first = n, last = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_missing(series[i])) {
            if (first == n) first = i;
            last = i;
        }
    }
    if (first == n) return series;  // all missing
    for (std::size_t i = 0; i < first; ++i) series[i] = series[first];
    for (std::size_t i = last + 1; i < n; ++i) series[i] = series[last];
    std::size_t i = first;
    while (i <= last) {
        if (!is_missing(series[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (is_missing(series[j])) ++j;
        const double lo = series[i - 1];
        const double hi = series[j];
        const double span = static_cast<double>(j - (i - 1));
        for (std::size_t k = i; k < j; ++k) {
            series[k] = lo + (hi - lo) * static_cast<double>(k - (i - 1)) / span;
        }
        i = j;
    }
    return series;
}

std::string serialize_matrix(const FeatureTable& table) {
    std::ostringstream out;
    out << "student_id";
    for (const auto& c : table.columns) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < table.student_ids.size(); ++r) {
        out << table.student_ids[r];
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
            const double v = table.values(static_cast<Eigen::Index>(r), c);
            out << ',';
            if (!is_missing(v)) out << format_double(v);
        }
        out << '\n';
    }
    return out.str();
}

FeatureTable parse_matrix(const std::string& text) {
    std::istringstream in(text);
    csv::Table t = csv::read(in, "matrix.csv");
    if (t.header.empty() || t.header[0] != "student_id")
        throw IngestError("matrix.csv: first column must be student_id");
    FeatureTable table;
    table.columns.assign(t.header.begin() + 1, t.header.end());
    for (const auto& c : table.columns) {
        if (!c.ends_with("_missing")) table.feature_names.push_back(c);
    }
    table.values.resize(static_cast<Eigen::Index>(t.rows.size()),
                        static_cast<Eigen::Index>(table.columns.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        table.student_ids.push_back(t.rows[r][0]);
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            const std::string& cell = t.rows[r][c + 1];
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                cell.empty() ? missing_value() : std::stod(cell);
        }
    }
    return table;
}

nlohmann::json RunManifest::to_json() const {
    return nlohmann::json{{"pipeline_version", pipeline_version},
                          {"config_hash", config_hash},
                          {"seed", seed},
                          {"timestamp", timestamp},
                          {"students_in", students_in},
                          {"students_featurized", students_featurized},
                          {"zero_enrolment_students", zero_enrolment_students},
                          {"feature_count", feature_count},
                          {"indicator_count", indicator_count},
                          {"cohorts", cohorts},
                          {"column_missing_fraction", column_missing_fraction},
                          {"clustering_excluded_columns", clustering_excluded_columns},
                          {"imputations_performed", imputations_performed}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    m.pipeline_version = j.value("pipeline_version", "1.0.0");
    m.config_hash = j.value("config_hash", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.timestamp = j.value("timestamp", "");
    m.students_in = j.value("students_in", std::size_t{0});
    m.students_featurized = j.value("students_featurized", std::size_t{0});
    m.zero_enrolment_students = j.value("zero_enrolment_students", std::size_t{0});
    m.feature_count = j.value("feature_count", std::size_t{0});
    m.indicator_count = j.value("indicator_count", std::size_t{0});
    if (j.contains("cohorts")) m.cohorts = j["cohorts"].get<std::vector<int>>();
    if (j.contains("column_missing_fraction"))
        m.column_missing_fraction = j["column_missing_fraction"].get<std::map<std::string, double>>();
    if (j.contains("clustering_excluded_columns"))
        m.clustering_excluded_columns =
            j["clustering_excluded_columns"].get<std::vector<std::string>>();
    m.imputations_performed = j.value("imputations_performed", std::size_t{0});
    return m;
}

AssemblyResult assemble(FeatureTable table, const Dictionary& dict, const Dataset& data,
                        const std::string& config_hash, std::uint64_t seed) {
    AssemblyResult out;

    std::vector<std::string> regions(table.student_ids.size());
    std::set<int> cohorts;
    std::set<std::string> with_enrolments;
    for (const auto& e : data.enrolments) with_enrolments.insert(e.student_id);
    {
        std::unordered_map<std::string, const Student*> by_id;
        for (const auto& s : data.students) by_id[s.student_id] = &s;
        for (std::size_t r = 0; r < table.student_ids.size(); ++r) {
            const auto it = by_id.find(table.student_ids[r]);
            if (it != by_id.end()) {
                regions[r] = it->second->postcode;
                cohorts.insert(it->second->cohort_year);
            }
        }
    }

    out.impute_stats = impute(table, dict, regions);

    RunManifest& m = out.manifest;
    m.config_hash = config_hash;
    m.seed = seed;
    m.students_in = data.students.size();
    m.students_featurized = table.student_ids.size();
    m.zero_enrolment_students = data.students.size() - with_enrolments.size();
    m.feature_count = table.feature_names.size();
    m.indicator_count = table.columns.size() - table.feature_names.size();
    m.cohorts.assign(cohorts.begin(), cohorts.end());
    m.imputations_performed = out.impute_stats.imputations_performed;

    const Eigen::Index rows = table.values.rows();
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        std::size_t missing = 0;
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (is_missing(table.values(r, static_cast<Eigen::Index>(c)))) ++missing;
        }
        m.column_missing_fraction[table.columns[c]] =
            rows ? static_cast<double>(missing) / static_cast<double>(rows) : 0.0;
        if (missing > 0) m.clustering_excluded_columns.push_back(table.columns[c]);
    }

    out.scaling = standardize_fit(table.values, table.columns);
    out.matrix = std::move(table);
    return out;
}

Matrix analysis_matrix(const AssemblyResult& assembly, std::vector<std::string>* used_columns) {
    const FeatureTable& t = assembly.matrix;
    const std::set<std::string> excluded(assembly.manifest.clustering_excluded_columns.begin(),
                                         assembly.manifest.clustering_excluded_columns.end());
    std::vector<Eigen::Index> keep;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (excluded.count(t.columns[c])) continue;
        keep.push_back(static_cast<Eigen::Index>(c));
        names.push_back(t.columns[c]);
    }
    Matrix sub(t.values.rows(), static_cast<Eigen::Index>(keep.size()));
    ScalingStats stats;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        sub.col(static_cast<Eigen::Index>(i)) = t.values.col(keep[i]);
        const std::size_t full = static_cast<std::size_t>(keep[i]);
        stats.columns.push_back(assembly.scaling.columns[full]);
        stats.mean.push_back(assembly.scaling.mean[full]);
        stats.stddev.push_back(assembly.scaling.stddev[full]);
        stats.constant.push_back(assembly.scaling.constant[full]);
    }
    if (used_columns) *used_columns = names;
    return standardize_apply(stats, sub, names);
}

}  // namespace capire

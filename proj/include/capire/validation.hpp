#pragma once

#include "capire/model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <string>
#include <vector>

namespace capire {

enum class RuleClass { Type, Range, Referential, Temporal, Completeness };
enum class Severity { Hard, Soft };

std::string to_string(RuleClass r);
std::string to_string(Severity s);

struct Violation {
    RuleClass rule = RuleClass::Type;
    Severity severity = Severity::Hard;
    std::string table;
    std::size_t row = 0;  // 1-based data row, 0 = table-level
    std::string column;
    std::string message;
};

struct ValidationReport {
    bool pass = true;  // fail iff >= 1 hard violation
    std::vector<Violation> violations;
    std::map<std::string, std::map<std::string, double>> missingness;  // table -> column -> fraction
    std::map<std::string, std::size_t> row_counts;

    std::size_t hard_count() const;
    std::size_t count(RuleClass r) const;
    nlohmann::json to_json() const;
};

struct ValidationParams {
    double grade_min = 0.0;
    double grade_max = 10.0;
    double age_min = 14.0;
    double age_max = 90.0;
    double soft_age_warn = 60.0;           // plausibility band, soft only
    double soft_distance_warn_km = 500.0;
};

// Per-column fraction of empty cells. Deterministic; an empty table yields
// 0.0 for every column with its row count recorded as 0.
std::map<std::string, double> profile_missingness(const csv::Table& table);

ValidationReport validate_dataset(const ParsedTables& tables,
                                  const ValidationParams& params = {});

}  // namespace capire

#pragma once

#include "capire/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace capire {

enum class Level { N1, N2, N3, N4 };
std::string to_string(Level l);
Level parse_level(const std::string& s);

// Declared temporal reach of a feature's source data. The audit decides
// eligibility from this declaration, never from the implementation.
enum class TimeBoundKind {
    PreEntry,     // fixed before entry (census, family background)
    Entry,        // anchored at t0
    Window,       // bounded by the configured VOT cutoff
    UpToTerm,     // bounded by a fixed relative term index (inclusive)
    FullHistory,  // aggregates over the whole record
    Outcome,      // derived from or proximal to the outcome horizon
    Undeclared,
};

struct TimeBound {
    TimeBoundKind kind = TimeBoundKind::Undeclared;
    int term = 0;  // only for UpToTerm: highest relative term included (0-based)
};

enum class ImputePolicy { RegionMedian, TrainMean, Never, Passthrough };
std::string to_string(ImputePolicy p);
ImputePolicy parse_impute_policy(const std::string& s);

struct FeatureDef {
    std::string name;
    Level level = Level::N1;
    std::string description;
    std::vector<std::string> source_fields;
    TimeBound time_bound;
    ImputePolicy imputation = ImputePolicy::Never;
    bool indicator = false;  // emit a companion <name>_missing column
    bool interaction = false;
};

struct Dictionary {
    int version = 1;
    std::vector<FeatureDef> features;

    const FeatureDef* find(const std::string& name) const;
    std::size_t count(Level l) const;
    std::vector<std::string> names() const;

    static Dictionary from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static Dictionary load(const std::string& path);
};

// The 44-feature dictionary the extractors implement. The shipped JSON file
// must stay in sync; a unit test enforces the match.
Dictionary builtin_dictionary();

}  // namespace capire

#pragma once

#include "capire/dictionary.hpp"
#include "capire/model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <string>
#include <vector>

namespace capire {

enum class VotUnit { Terms, Credits };

struct VotConfig {
    VotUnit unit = VotUnit::Terms;
    int cutoff = 3;       // window = relative terms [0, cutoff)
    int horizon = 12;     // outcome horizon, relative terms
    int grace = 2;        // grace terms past the horizon
    std::string label_policy = "binary_departed";

    void check() const;  // throws ConfigError on violated invariants
};

// A student's enrolments restricted to relative term < cutoff, plus the
// sorted distinct relative terms with activity.
struct WindowedTrajectory {
    std::string student_id;
    int entry_term = 0;
    std::vector<Enrolment> enrolments;  // untouched rows, in input order
    std::vector<int> active_terms;      // relative, strictly increasing

    bool empty() const { return enrolments.empty(); }
    // courses per relative term from first to last active term, zeros between
    std::vector<double> load_series() const;
};

WindowedTrajectory slice_trajectory(const Student& student,
                                    const std::vector<Enrolment>& enrolments,
                                    const VotConfig& vot);

// ---- eligibility audit -----------------------------------------------------

enum class Eligibility { VotAdmissible, PostVot, Restricted };
std::string to_string(Eligibility e);

struct EligibilityTag {
    std::string feature_name;
    Eligibility tag = Eligibility::VotAdmissible;
    std::string reason;
};

struct EligibilityAudit {
    std::vector<EligibilityTag> tags;  // one per dictionary entry, same order

    std::vector<std::string> admissible_names() const;
    bool is_admissible(const std::string& name) const;
    nlohmann::json to_json() const;
};

// Tags every feature or throws ConfigError when a feature has no declared
// time bound (undeclared features are the leakage vector).
EligibilityAudit audit_eligibility(const Dictionary& dict, const VotConfig& vot);

// ---- leakage probe ---------------------------------------------------------

// Receives a dataset, returns the canonical serialized feature matrix.
using PipelineRunFn = std::function<std::string(const Dataset&)>;

struct CellDiff {
    std::string student_id;
    std::string column;
    std::string baseline;
    std::string perturbed;
};

struct ProbeReport {
    bool invariant = true;  // true iff every perturbed run was bit-identical
    int perturbation_sets = 0;
    int identical_sets = 0;
    std::vector<CellDiff> diffs;  // first offenders, capped
    nlohmann::json to_json() const;
};

// Injects synthetic post-cutoff events (random extra enrolments at relative
// term >= cutoff, shuffled graduation records, flipped outcome material) into
// copies of the dataset and re-runs the pipeline. The feature path must not
// notice.
ProbeReport leakage_probe(const PipelineRunFn& run, const Dataset& dataset,
                          const VotConfig& vot, std::uint64_t seed,
                          int perturbation_sets = 50, int injections_per_set = 100);

}  // namespace capire

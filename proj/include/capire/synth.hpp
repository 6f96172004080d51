#pragma once

#include "capire/model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace capire::synth {

// Generative knobs for one planted archetype. The diffuse (noise) population
// re-uses the same structure with per-student parameters drawn from ranges.
struct ArchetypeTemplate {
    std::string template_id;
    double share = 0.0;              // of n_students; shares sum to <= 1
    double drop_p = 0.2;             // per-attempt withdrawal propensity
    double fail_p = 0.2;             // per-attempt failure propensity
    double gap_p = 0.05;             // per-term inactivity propensity (post-window;
                                     // the diffuse population also draws its
                                     // in-window pattern from this)
    std::vector<int> skip_terms;     // relative window terms deterministically inactive
    double load_start = 4.0;         // mean courses in the first term
    double load_slope = 0.0;         // mean change per term
    double retake_affinity = 1.0;    // weight boost for retaking failed/dropped courses
    double friction_affinity = 0.0;  // 0 = uniform course choice, 1 = prefer hard courses
    double age_mean = 18.7;
    double age_sd = 1.7;
    double work_p = 0.05;
    double deprivation_level = 0.4;  // postcode affinity
    double hs_gpa_mean = 7.0;
    double hs_gpa_sd = 1.0;
    double parental_education_mean = 2.5;
    double siblings_p = 0.35;
    std::string secondary_type;      // fixed category; empty = deprivation-driven draw
    double attrition_p = 0.5;        // post-window Bernoulli
    double attrition_drift = 0.0;    // added for cohorts at/after drift_year
    double graduate_p = 0.5;         // given survival

    static ArchetypeTemplate from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct DiffuseRanges {
    double drop_lo = 0.05, drop_hi = 0.8;
    double fail_lo = 0.05, fail_hi = 0.5;
    double gap_lo = 0.0, gap_hi = 0.45;
    double load_lo = 1.5, load_hi = 6.0;
    double slope_lo = -0.8, slope_hi = 0.8;
    double age_mean = 19.5, age_sd = 3.5;
    double attrition_lo = 0.2, attrition_hi = 0.9;

    static DiffuseRanges from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct GeneratorConfig {
    int n_students = 1000;
    int n_courses = 45;
    int n_terms = 36;
    int base_year = 2004;
    int cohort_year_span = 12;  // entry years base_year .. base_year+span-1
    int n_postcodes = 8;
    int nominal_terms = 10;     // curriculum length
    double noise_share = 0.1;   // implied: 1 - sum(template shares) must match
    double zero_enrolment_share = 0.0;
    double female_share = 0.182;
    double macro_variation = 1.0;  // 0 freezes inflation/strikes across the span
    double works_unknown_p = 0.04;
    double missing_postcode_p = 0.03;
    double missing_hs_gpa_p = 0.12;
    double missing_parental_p = 0.15;
    double missing_siblings_p = 0.10;
    double missing_secondary_p = 0.08;
    double missing_distance_p = 0.10;
    int horizon = 12;
    int grace = 2;
    int cutoff = 3;             // only to place post-window activity; features ignore it
    int drift_year = 0;         // 0 = no drift
    std::uint64_t seed = 1;
    std::vector<ArchetypeTemplate> templates;
    DiffuseRanges diffuse;

    void check() const;  // throws ConfigError on infeasible shares etc.
    static GeneratorConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct GroundTruthRow {
    std::string student_id;
    std::string template_id;  // "noise" for the diffuse population
    int attrition_flag = 0;
};

struct GeneratedCohort {
    Dataset dataset;  // includes graduations
    std::vector<GroundTruthRow> ground_truth;
};

csv::Table ground_truth_table(const std::vector<GroundTruthRow>& rows);

GeneratedCohort generate(const GeneratorConfig& config);

}  // namespace capire::synth

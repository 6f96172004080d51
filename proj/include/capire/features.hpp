#pragma once

#include "capire/dictionary.hpp"
#include "capire/model.hpp"
#include "capire/vot.hpp"

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace capire {

// ---- kernels ----------------------------------------------------------------

// w1 * dropped/attempted + w2 * failed/attempted. attempted >= 1.
double compute_ifc_course(int attempted, int dropped, int failed, double w1 = 1.0,
                          double w2 = 0.5);

// Shannon entropy in bits over the given state counts; 0*log0 = 0.
// Total count 0 -> missing.
double compute_state_entropy(const std::map<std::string, int>& state_counts);

// OLS slope of load on 0..k-1. Fewer than 2 points -> missing.
double compute_load_trend(const std::vector<double>& loads_per_term);

// Longest inactive run between consecutive active terms; single term -> 0;
// empty -> missing.
double compute_max_gap(const std::vector<int>& active_terms);

// completed / expected; expected == 0 -> missing.
double compute_velocity(int completed_in_window, int expected_by_curriculum_at_vot);

// Population std of consecutive active-term differences; < 2 active terms ->
// missing.
double compute_spacing_regularity(const std::vector<int>& active_terms);

// ---- course friction --------------------------------------------------------

struct CourseFriction {
    int attempted = 0;
    int dropped = 0;
    int failed = 0;
    double ifc = 0.0;
    bool is_filter = false;
};

struct CourseFrictionTable {
    std::unordered_map<std::string, CourseFriction> by_course;
    double w1 = 1.0;
    double w2 = 0.5;
    double filter_threshold = 0.5;

    const CourseFriction* find(const std::string& course_id) const;
};

// One reduction pass over the in-window enrolments of the fit population.
CourseFrictionTable build_friction_table(const std::vector<Student>& students,
                                         const std::vector<Enrolment>& enrolments,
                                         const VotConfig& vot, double w1 = 1.0,
                                         double w2 = 0.5, double filter_threshold = 0.5);

// Unweighted mean of IFC over the distinct courses attempted in-window;
// no attempted course present in the table -> missing.
double compute_ifc_mean(const WindowedTrajectory& window, const CourseFrictionTable& table);

// ---- extraction -------------------------------------------------------------

struct ExtractParams {
    double rural_distance_km = 50.0;
    int first_generation_max_level = 2;  // parental education <= this => first generation
};

// One student's raw features, keyed by dictionary name. Absent or NaN = missing.
using FeatureRow = std::unordered_map<std::string, double>;

FeatureRow extract_n1(const Student& student, const Dataset& data, const ExtractParams& params);
FeatureRow extract_n2(const Student& student, const Dataset& data);
FeatureRow extract_n3(const WindowedTrajectory& window, const CourseFrictionTable& friction);
FeatureRow extract_n4(const WindowedTrajectory& window, const Dataset& data,
                      const VotConfig& vot);

struct InteractionSpec {
    std::string name;
    std::string feature_a;
    std::string feature_b;
};

// The four curated cross-level products. A missing operand makes the product
// missing; the companion indicator records it.
std::vector<InteractionSpec> default_interactions();
void generate_interactions(FeatureRow& row, const std::vector<InteractionSpec>& specs,
                           const std::vector<std::string>& known_names);

// Raw per-student features in dictionary order, missing cells as NaN.
// Indicator columns (<name>_missing) are appended after the 44 features and
// record raw missingness; imputation later fills N1/N2 cells but never
// touches indicators.
struct FeatureTable {
    std::vector<std::string> student_ids;   // ascending
    std::vector<std::string> columns;       // features then indicators
    std::vector<std::string> feature_names; // the dictionary features only
    Matrix values;                          // rows follow student_ids
    std::unordered_map<std::string, Level> level_of;

    int column_index(const std::string& name) const;  // -1 when absent
    double cell(std::size_t row, const std::string& name) const;
};

FeatureTable extract_features(const Dataset& data, const Dictionary& dict,
                              const VotConfig& vot, const CourseFrictionTable& friction,
                              const ExtractParams& params = {});

}  // namespace capire

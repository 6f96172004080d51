#include "capire/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace capire {

double compute_ifc_course(int attempted, int dropped, int failed, double w1, double w2) {
    if (attempted < 1) throw PreconditionError("compute_ifc_course: attempted must be >= 1");
    if (dropped + failed > attempted)
        throw PreconditionError("compute_ifc_course: dropped + failed exceed attempted");
    if (w1 < 0 || w2 < 0) throw PreconditionError("compute_ifc_course: weights must be >= 0");
    const double a = static_cast<double>(attempted);
    return w1 * static_cast<double>(dropped) / a + w2 * static_cast<double>(failed) / a;
}

double compute_state_entropy(const std::map<std::string, int>& state_counts) {
    double total = 0.0;
    for (const auto& [state, count] : state_counts) {
        if (count < 0) throw PreconditionError("compute_state_entropy: negative count");
        total += count;
    }
    if (total <= 0.0) return missing_value();
    double h = 0.0;
    for (const auto& [state, count] : state_counts) {
        if (count == 0) continue;  // 0*log0 = 0
        const double p = count / total;
        h -= p * std::log2(p);
    }
    return h;
}

double compute_load_trend(const std::vector<double>& loads) {
    const std::size_t n = loads.size();
    if (n < 2) return missing_value();
    const double xbar = (static_cast<double>(n) - 1.0) / 2.0;
    double ybar = 0.0;
    for (double y : loads) ybar += y;
    ybar /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - xbar;
        num += dx * (loads[i] - ybar);
        den += dx * dx;
    }
    return num / den;
}

double compute_max_gap(const std::vector<int>& active_terms) {
    if (active_terms.empty()) return missing_value();
    int max_gap = 0;
    for (std::size_t i = 1; i < active_terms.size(); ++i) {
        max_gap = std::max(max_gap, active_terms[i] - active_terms[i - 1] - 1);
    }
    return static_cast<double>(max_gap);
}

double compute_velocity(int completed, int expected) {
    if (completed < 0 || expected < 0)
        throw PreconditionError("compute_velocity: counts must be >= 0");
    if (expected == 0) return missing_value();
    return static_cast<double>(completed) / static_cast<double>(expected);
}

double compute_spacing_regularity(const std::vector<int>& active_terms) {
    if (active_terms.size() < 2) return missing_value();
    std::vector<double> gaps;
    gaps.reserve(active_terms.size() - 1);
    for (std::size_t i = 1; i < active_terms.size(); ++i) {
        gaps.push_back(static_cast<double>(active_terms[i] - active_terms[i - 1]));
    }
    double mean = 0.0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(gaps.size());
    double var = 0.0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    var /= static_cast<double>(gaps.size());
    return std::sqrt(var);
}

const CourseFriction* CourseFrictionTable::find(const std::string& course_id) const {
    const auto it = by_course.find(course_id);
    return it == by_course.end() ? nullptr : &it->second;
}

CourseFrictionTable build_friction_table(const std::vector<Student>& students,
                                         const std::vector<Enrolment>& enrolments,
                                         const VotConfig& vot, double w1, double w2,
                                         double filter_threshold) {
    CourseFrictionTable table;
    table.w1 = w1;
    table.w2 = w2;
    table.filter_threshold = filter_threshold;
    std::unordered_map<std::string, int> entry;
    for (const auto& s : students) entry[s.student_id] = s.entry_term;
    for (const auto& e : enrolments) {
        const auto it = entry.find(e.student_id);
        if (it == entry.end()) continue;
        const int rel = e.term_index - it->second;
        if (rel < 0 || rel >= vot.cutoff) continue;
        auto& cf = table.by_course[e.course_id];
        ++cf.attempted;
        if (e.state == Outcome::Dropped) ++cf.dropped;
        if (e.state == Outcome::Failed) ++cf.failed;
    }
    for (auto& [id, cf] : table.by_course) {
        cf.ifc = compute_ifc_course(cf.attempted, cf.dropped, cf.failed, w1, w2);
        cf.is_filter = cf.ifc >= filter_threshold;
    }
    return table;
}

double compute_ifc_mean(const WindowedTrajectory& window, const CourseFrictionTable& table) {
    std::set<std::string> distinct;  // C_i is a set: repeats count once
    for (const auto& e : window.enrolments) distinct.insert(e.course_id);
    double sum = 0.0;
    int n = 0;
    for (const auto& id : distinct) {
        if (const CourseFriction* cf = table.find(id)) {
            sum += cf->ifc;
            ++n;
        }
    }
    if (n == 0) return missing_value();
    return sum / static_cast<double>(n);
}

// ---- extractors --------------------------------------------------------------

FeatureRow extract_n1(const Student& s, const Dataset& data, const ExtractParams& params) {
    FeatureRow row;
    const double miss = missing_value();

    double dep = miss, unemp = miss, inf = miss, pov = miss;
    if (!s.postcode.empty()) {
        if (const TermCalendarRow* area = data.area_row(s.postcode, s.entry_term)) {
            if (area->area_deprivation) dep = *area->area_deprivation;
            if (area->area_unemployment) unemp = *area->area_unemployment;
            if (area->area_informality) inf = *area->area_informality;
            if (area->area_poverty) pov = *area->area_poverty;
        }
    }
    row["area_deprivation"] = dep;
    row["area_unemployment_t0"] = unemp;
    row["area_informality_t0"] = inf;
    row["area_poverty_t0"] = pov;

    row["distance_to_campus_km"] = s.distance_to_campus_km ? *s.distance_to_campus_km : miss;
    row["rural_origin"] = s.distance_to_campus_km
                              ? (*s.distance_to_campus_km >= params.rural_distance_km ? 1.0 : 0.0)
                              : miss;
    row["parental_education"] = s.parental_education ? *s.parental_education : miss;
    row["first_generation"] =
        s.parental_education
            ? (*s.parental_education <= params.first_generation_max_level ? 1.0 : 0.0)
            : miss;
    row["siblings_university"] = s.siblings_university ? (*s.siblings_university ? 1.0 : 0.0) : miss;

    // one-hot; an unknown type leaves all three missing rather than merging
    // "unknown" into a category
    if (s.secondary_school_type.empty()) {
        row["secondary_public"] = miss;
        row["secondary_private"] = miss;
        row["secondary_technical"] = miss;
    } else {
        row["secondary_public"] = s.secondary_school_type == "public" ? 1.0 : 0.0;
        row["secondary_private"] = s.secondary_school_type == "private" ? 1.0 : 0.0;
        row["secondary_technical"] = s.secondary_school_type == "technical" ? 1.0 : 0.0;
    }
    return row;
}

FeatureRow extract_n2(const Student& s, const Dataset& data) {
    FeatureRow row;
    row["age_at_entry"] = s.age_at_entry;
    row["gender_flag"] = s.gender == "f" || s.gender == "female" ? 1.0 : 0.0;
    row["works_at_entry"] = s.works_at_entry == TriState::Yes   ? 1.0
                            : s.works_at_entry == TriState::No ? 0.0
                                                               : missing_value();
    row["hs_gpa"] = s.hs_gpa ? *s.hs_gpa : missing_value();

    const TermCalendarRow* cal = data.term_row(s.entry_term);
    if (!cal) {
        throw ConfigError("calendar has no entry for term " + std::to_string(s.entry_term) +
                          " (student " + s.student_id + ")");
    }
    row["inflation_t0"] = cal->inflation_yoy;
    row["strikes_24m_pre_t0"] = static_cast<double>(cal->strike_count_24m);
    return row;
}

FeatureRow extract_n3(const WindowedTrajectory& w, const CourseFrictionTable& friction) {
    FeatureRow row;
    const double miss = missing_value();

    int attempted = 0, passed = 0, failed = 0, dropped = 0;
    std::vector<double> grades;
    std::unordered_map<std::string, int> attempts_by_course;
    for (const auto& e : w.enrolments) {
        ++attempted;
        switch (e.state) {
            case Outcome::Passed: ++passed; break;
            case Outcome::Failed: ++failed; break;
            case Outcome::Dropped: ++dropped; break;
        }
        if (e.state != Outcome::Dropped && e.grade) grades.push_back(*e.grade);
        ++attempts_by_course[e.course_id];
    }

    row["courses_attempted"] = attempted;
    row["courses_passed"] = passed;
    row["courses_failed"] = failed;
    row["courses_dropped"] = dropped;
    row["pass_rate"] = attempted ? static_cast<double>(passed) / attempted : miss;
    row["fail_rate"] = attempted ? static_cast<double>(failed) / attempted : miss;
    row["libre_rate"] = attempted ? static_cast<double>(dropped) / attempted : miss;

    if (grades.empty()) {
        row["grade_mean"] = miss;
        row["grade_median"] = miss;
        row["grade_std"] = miss;
    } else {
        double mean = 0.0;
        for (double g : grades) mean += g;
        mean /= static_cast<double>(grades.size());
        std::sort(grades.begin(), grades.end());
        const std::size_t n = grades.size();
        const double median = n % 2 ? grades[n / 2] : 0.5 * (grades[n / 2 - 1] + grades[n / 2]);
        double var = 0.0;
        for (double g : grades) var += (g - mean) * (g - mean);
        var /= static_cast<double>(n);
        row["grade_mean"] = mean;
        row["grade_median"] = median;
        row["grade_std"] = std::sqrt(var);
    }

    const std::size_t distinct = attempts_by_course.size();
    row["mean_attempts_per_course"] =
        distinct ? static_cast<double>(attempted) / static_cast<double>(distinct) : miss;
    row["ifc_mean"] = compute_ifc_mean(w, friction);

    int filter_attempts = 0;
    int max_attempts = 0;
    std::set<std::string> filter_courses;
    for (const auto& [course_id, count] : attempts_by_course) {
        max_attempts = std::max(max_attempts, count);
        if (const CourseFriction* cf = friction.find(course_id); cf && cf->is_filter) {
            filter_attempts += count;
            filter_courses.insert(course_id);
        }
    }
    row["filter_exposure_count"] = attempted ? static_cast<double>(filter_attempts) : miss;
    row["filter_exposure_rate"] =
        attempted ? static_cast<double>(filter_attempts) / attempted : miss;
    row["filter_courses_attempted"] =
        attempted ? static_cast<double>(filter_courses.size()) : miss;
    row["max_course_attempts"] = attempted ? static_cast<double>(max_attempts) : miss;
    return row;
}

FeatureRow extract_n4(const WindowedTrajectory& w, const Dataset& data, const VotConfig& vot) {
    FeatureRow row;
    const double miss = missing_value();
    if (w.empty()) {
        for (const char* name : {"reenrolment_count", "max_gap", "load_trend", "velocity",
                                 "spacing_regularity", "state_entropy"}) {
            row[name] = miss;
        }
        return row;
    }

    std::set<std::string> distinct;
    std::set<std::string> passed_courses;
    int passed = 0, failed = 0, dropped = 0;
    for (const auto& e : w.enrolments) {
        distinct.insert(e.course_id);
        switch (e.state) {
            case Outcome::Passed: ++passed; passed_courses.insert(e.course_id); break;
            case Outcome::Failed: ++failed; break;
            case Outcome::Dropped: ++dropped; break;
        }
    }
    row["reenrolment_count"] =
        static_cast<double>(w.enrolments.size()) - static_cast<double>(distinct.size());
    row["max_gap"] = compute_max_gap(w.active_terms);
    row["load_trend"] = compute_load_trend(w.load_series());
    row["spacing_regularity"] = compute_spacing_regularity(w.active_terms);

    // curriculum expectation at the cutoff; students may attempt courses from
    // several curricula but the cohort key is the first attempted course's
    // curriculum
    int expected = 0;
    if (const Course* c = data.find_course(w.enrolments.front().course_id)) {
        if (const Curriculum* cur = data.find_curriculum(c->curriculum_id)) {
            expected = cur->expected_at_offset(vot.cutoff - 1);
        }
    }
    row["velocity"] = expected > 0
                          ? compute_velocity(static_cast<int>(passed_courses.size()), expected)
                          : miss;

    std::map<std::string, int> states{{"passed", passed}, {"failed", failed}, {"dropped", dropped}};
    states["not_attempted"] = std::max(0, expected - static_cast<int>(distinct.size()));
    row["state_entropy"] = compute_state_entropy(states);
    return row;
}

std::vector<InteractionSpec> default_interactions() {
    return {{"ifc_x_libre", "ifc_mean", "libre_rate"},
            {"age_x_attempts", "age_at_entry", "mean_attempts_per_course"},
            {"deprivation_x_passrate", "area_deprivation", "pass_rate"},
            {"filter_x_gap", "filter_exposure_rate", "max_gap"}};
}

void generate_interactions(FeatureRow& row, const std::vector<InteractionSpec>& specs,
                           const std::vector<std::string>& known_names) {
    for (const auto& spec : specs) {
        for (const auto& operand : {spec.feature_a, spec.feature_b}) {
            if (std::find(known_names.begin(), known_names.end(), operand) == known_names.end()) {
                throw ConfigError("interaction '" + spec.name + "' references unknown feature '" +
                                  operand + "'");
            }
        }
        const auto a = row.find(spec.feature_a);
        const auto b = row.find(spec.feature_b);
        if (a == row.end() || b == row.end() || is_missing(a->second) || is_missing(b->second)) {
            row[spec.name] = missing_value();
        } else {
            row[spec.name] = a->second * b->second;
        }
    }
}

int FeatureTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

double FeatureTable::cell(std::size_t row, const std::string& name) const {
    const int c = column_index(name);
    if (c < 0) throw PreconditionError("no column '" + name + "'");
    return values(static_cast<Eigen::Index>(row), c);
}

FeatureTable extract_features(const Dataset& data, const Dictionary& dict, const VotConfig& vot,
                              const CourseFrictionTable& friction, const ExtractParams& params) {
    vot.check();
    const EligibilityAudit audit = audit_eligibility(dict, vot);

    FeatureTable table;
    for (std::size_t i = 0; i < dict.features.size(); ++i) {
        const auto& def = dict.features[i];
        if (audit.tags[i].tag != Eligibility::VotAdmissible) continue;  // eligibility gate
        table.feature_names.push_back(def.name);
        table.level_of[def.name] = def.level;
    }
    table.columns = table.feature_names;
    for (const auto& def : dict.features) {
        if (def.indicator && audit.is_admissible(def.name))
            table.columns.push_back(def.name + "_missing");
    }

    // group enrolments per student once
    std::unordered_map<std::string, std::vector<Enrolment>> by_student;
    for (const auto& e : data.enrolments) by_student[e.student_id].push_back(e);

    // Row population: students with at least one in-window enrolment, in
    // ascending student_id order. Keying inclusion on the window (not the
    // full history) keeps the row set invariant under post-cutoff edits;
    // zero-enrolment students are excluded either way and stay only in the
    // manifest counts.
    std::vector<std::pair<const Student*, WindowedTrajectory>> included;
    for (const auto& s : data.students) {
        WindowedTrajectory w = slice_trajectory(s, by_student[s.student_id], vot);
        if (!w.empty()) included.emplace_back(&s, std::move(w));
    }
    std::sort(included.begin(), included.end(), [](const auto& a, const auto& b) {
        return a.first->student_id < b.first->student_id;
    });

    const auto interactions = default_interactions();
    table.student_ids.reserve(included.size());
    table.values.resize(static_cast<Eigen::Index>(included.size()),
                        static_cast<Eigen::Index>(table.columns.size()));

    const std::vector<std::string> names = table.feature_names;
    for (std::size_t r = 0; r < included.size(); ++r) {
        const Student& s = *included[r].first;
        table.student_ids.push_back(s.student_id);
        const WindowedTrajectory& window = included[r].second;

        FeatureRow row = extract_n1(s, data, params);
        FeatureRow n2 = extract_n2(s, data);
        FeatureRow n3 = extract_n3(window, friction);
        FeatureRow n4 = extract_n4(window, data, vot);
        row.insert(n2.begin(), n2.end());
        row.insert(n3.begin(), n3.end());
        row.insert(n4.begin(), n4.end());
        generate_interactions(row, interactions, names);

        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            const std::string& col = table.columns[c];
            double v;
            if (col.size() > 8 && col.ends_with("_missing")) {
                const std::string base = col.substr(0, col.size() - 8);
                const auto it = row.find(base);
                v = (it == row.end() || is_missing(it->second)) ? 1.0 : 0.0;
            } else {
                const auto it = row.find(col);
                v = it == row.end() ? missing_value() : it->second;
            }
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return table;
}

}  // namespace capire

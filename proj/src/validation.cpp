#include "capire/validation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace capire {

std::string to_string(RuleClass r) {
    switch (r) {
        case RuleClass::Type: return "type";
        case RuleClass::Range: return "range";
        case RuleClass::Referential: return "referential";
        case RuleClass::Temporal: return "temporal";
        case RuleClass::Completeness: return "completeness";
    }
    return "?";
}

std::string to_string(Severity s) { return s == Severity::Hard ? "hard" : "soft"; }

std::size_t ValidationReport::hard_count() const {
    std::size_t n = 0;
    for (const auto& v : violations)
        if (v.severity == Severity::Hard) ++n;
    return n;
}

std::size_t ValidationReport::count(RuleClass r) const {
    std::size_t n = 0;
    for (const auto& v : violations)
        if (v.rule == r) ++n;
    return n;
}

nlohmann::json ValidationReport::to_json() const {
    nlohmann::json j;
    j["verdict"] = pass ? "pass" : "fail";
    j["hard_violations"] = hard_count();
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : violations) {
        arr.push_back({{"rule", to_string(v.rule)},
                       {"severity", to_string(v.severity)},
                       {"table", v.table},
                       {"row", v.row},
                       {"column", v.column},
                       {"message", v.message}});
    }
    j["violations"] = arr;
    j["missingness"] = missingness;
    j["row_counts"] = row_counts;
    return j;
}

std::map<std::string, double> profile_missingness(const csv::Table& table) {
    std::map<std::string, double> out;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        std::size_t missing = 0;
        for (const auto& row : table.rows)
            if (row[c].empty()) ++missing;
        out[table.header[c]] =
            table.rows.empty() ? 0.0 : static_cast<double>(missing) / static_cast<double>(table.rows.size());
    }
    return out;
}

namespace {

struct Checker {
    ValidationReport& report;

    void add(RuleClass rule, Severity sev, const std::string& table, std::size_t row,
             const std::string& column, const std::string& message) {
        report.violations.push_back({rule, sev, table, row, column, message});
    }
};

}  // namespace

ValidationReport validate_dataset(const ParsedTables& tables, const ValidationParams& params) {
    ValidationReport report;
    Checker check{report};
    const Dataset& d = tables.dataset;

    // cell-level type errors collected during parsing
    for (const auto& e : tables.cell_errors) {
        check.add(RuleClass::Type, Severity::Hard, e.table, e.row, e.column, e.message);
    }

    report.missingness["students"] = profile_missingness(tables.students_raw);
    report.missingness["enrolments"] = profile_missingness(tables.enrolments_raw);
    report.missingness["courses"] = profile_missingness(tables.courses_raw);
    report.missingness["curricula"] = profile_missingness(tables.curricula_raw);
    report.missingness["calendar"] = profile_missingness(tables.calendar_raw);
    if (tables.has_graduations)
        report.missingness["graduations"] = profile_missingness(tables.graduations_raw);

    report.row_counts["students"] = tables.students_raw.rows.size();
    report.row_counts["enrolments"] = tables.enrolments_raw.rows.size();
    report.row_counts["courses"] = tables.courses_raw.rows.size();
    report.row_counts["curricula"] = tables.curricula_raw.rows.size();
    report.row_counts["calendar"] = tables.calendar_raw.rows.size();

    // ---- students ----
    std::unordered_map<std::string, const Student*> student_by_id;
    std::unordered_set<int> calendar_terms;
    std::unordered_set<std::string> calendar_postcodes;
    for (const auto& row : d.calendar) {
        calendar_terms.insert(row.term_index);
        if (!row.postcode.empty()) calendar_postcodes.insert(row.postcode);
    }

    for (std::size_t i = 0; i < d.students.size(); ++i) {
        const Student& s = d.students[i];
        const std::size_t row = i + 1;
        if (s.student_id.empty()) {
            check.add(RuleClass::Completeness, Severity::Hard, "students", row, "student_id",
                      "essential field missing");
            continue;
        }
        if (!student_by_id.emplace(s.student_id, &s).second) {
            check.add(RuleClass::Type, Severity::Hard, "students", row, "student_id",
                      "duplicate student_id '" + s.student_id + "'");
        }
        if (is_missing(s.age_at_entry)) {
            check.add(RuleClass::Completeness, Severity::Hard, "students", row, "age_at_entry",
                      "essential field missing");
        } else if (s.age_at_entry < params.age_min || s.age_at_entry > params.age_max) {
            check.add(RuleClass::Range, Severity::Hard, "students", row, "age_at_entry",
                      "age " + format_double(s.age_at_entry) + " outside [" +
                          format_double(params.age_min) + ", " + format_double(params.age_max) + "]");
        } else if (s.age_at_entry > params.soft_age_warn) {
            check.add(RuleClass::Range, Severity::Soft, "students", row, "age_at_entry",
                      "age " + format_double(s.age_at_entry) + " is implausibly high");
        }
        if (s.gender.empty()) {
            check.add(RuleClass::Completeness, Severity::Hard, "students", row, "gender",
                      "essential field missing");
        }
        if (s.hs_gpa && (*s.hs_gpa < params.grade_min || *s.hs_gpa > params.grade_max)) {
            check.add(RuleClass::Range, Severity::Hard, "students", row, "hs_gpa",
                      "hs_gpa " + format_double(*s.hs_gpa) + " outside grade scale");
        }
        if (s.parental_education && (*s.parental_education < 0 || *s.parental_education > 5)) {
            check.add(RuleClass::Range, Severity::Hard, "students", row, "parental_education",
                      "ordinal level outside [0, 5]");
        }
        if (s.distance_to_campus_km) {
            if (*s.distance_to_campus_km < 0) {
                check.add(RuleClass::Range, Severity::Hard, "students", row, "distance_to_campus_km",
                          "negative distance");
            } else if (*s.distance_to_campus_km > params.soft_distance_warn_km) {
                check.add(RuleClass::Range, Severity::Soft, "students", row, "distance_to_campus_km",
                          "distance above plausibility band");
            }
        }
        if (!s.secondary_school_type.empty() && s.secondary_school_type != "public" &&
            s.secondary_school_type != "private" && s.secondary_school_type != "technical") {
            check.add(RuleClass::Type, Severity::Hard, "students", row, "secondary_school_type",
                      "unknown category '" + s.secondary_school_type + "'");
        }
        if (!calendar_terms.empty() && !calendar_terms.count(s.entry_term)) {
            check.add(RuleClass::Referential, Severity::Hard, "students", row, "entry_term",
                      "entry_term " + std::to_string(s.entry_term) + " not in calendar");
        }
        if (!s.postcode.empty() && !calendar_postcodes.count(s.postcode)) {
            check.add(RuleClass::Referential, Severity::Soft, "students", row, "postcode",
                      "postcode '" + s.postcode + "' has no area series (area features will be missing)");
        }
    }

    // ---- courses ----
    std::unordered_set<std::string> course_ids;
    std::unordered_set<std::string> curriculum_ids;
    for (const auto& c : d.curricula) curriculum_ids.insert(c.curriculum_id);
    for (std::size_t i = 0; i < d.courses.size(); ++i) {
        const Course& c = d.courses[i];
        const std::size_t row = i + 1;
        if (c.course_id.empty()) {
            check.add(RuleClass::Completeness, Severity::Hard, "courses", row, "course_id",
                      "essential field missing");
            continue;
        }
        if (!course_ids.insert(c.course_id).second) {
            check.add(RuleClass::Type, Severity::Hard, "courses", row, "course_id",
                      "duplicate course_id '" + c.course_id + "'");
        }
        if (c.nominal_term < 1) {
            check.add(RuleClass::Range, Severity::Hard, "courses", row, "nominal_term",
                      "nominal_term must be >= 1");
        }
        if (!curriculum_ids.count(c.curriculum_id)) {
            check.add(RuleClass::Referential, Severity::Hard, "courses", row, "curriculum_id",
                      "unknown curriculum '" + c.curriculum_id + "'");
        }
    }

    // ---- curricula ----
    for (const auto& cur : d.curricula) {
        int last = -1;
        for (const auto& [off, cum] : cur.expected_courses_by_term) {
            if (cum < last) {
                check.add(RuleClass::Range, Severity::Hard, "curricula", 0, "expected_courses_cum",
                          "cumulative counts decrease at offset " + std::to_string(off) +
                              " for curriculum '" + cur.curriculum_id + "'");
            }
            last = cum;
        }
    }

    // ---- calendar ----
    {
        std::map<int, int> year_by_term;
        for (std::size_t i = 0; i < d.calendar.size(); ++i) {
            const auto& row = d.calendar[i];
            auto it = year_by_term.find(row.term_index);
            if (it != year_by_term.end() && it->second != row.calendar_year) {
                check.add(RuleClass::Temporal, Severity::Hard, "calendar", i + 1, "calendar_year",
                          "term " + std::to_string(row.term_index) + " maps to two calendar years");
            }
            year_by_term[row.term_index] = row.calendar_year;
        }
        int prev_year = std::numeric_limits<int>::min();
        for (const auto& [term, year] : year_by_term) {
            if (year < prev_year) {
                check.add(RuleClass::Temporal, Severity::Hard, "calendar", 0, "calendar_year",
                          "calendar year decreases at term " + std::to_string(term));
            }
            prev_year = year;
        }
    }

    // ---- enrolments ----
    std::unordered_set<std::string> seen_attempt;
    std::unordered_map<std::string, int> min_term;
    for (std::size_t i = 0; i < d.enrolments.size(); ++i) {
        const Enrolment& e = d.enrolments[i];
        const std::size_t row = i + 1;
        if (e.student_id.empty() || e.course_id.empty()) {
            check.add(RuleClass::Completeness, Severity::Hard, "enrolments", row,
                      e.student_id.empty() ? "student_id" : "course_id", "essential field missing");
            continue;
        }
        const auto student_it = student_by_id.find(e.student_id);
        if (student_it == student_by_id.end()) {
            check.add(RuleClass::Referential, Severity::Hard, "enrolments", row, "student_id",
                      "unknown student '" + e.student_id + "'");
        } else if (e.term_index < student_it->second->entry_term) {
            check.add(RuleClass::Temporal, Severity::Hard, "enrolments", row, "term_index",
                      "enrolment at term " + std::to_string(e.term_index) +
                          " precedes student entry term " +
                          std::to_string(student_it->second->entry_term));
        }
        if (!course_ids.count(e.course_id)) {
            check.add(RuleClass::Referential, Severity::Hard, "enrolments", row, "course_id",
                      "unknown course '" + e.course_id + "'");
        }
        if (!calendar_terms.empty() && !calendar_terms.count(e.term_index)) {
            check.add(RuleClass::Referential, Severity::Hard, "enrolments", row, "term_index",
                      "term " + std::to_string(e.term_index) + " not in calendar");
        }
        const std::string key = e.student_id + "\x1f" + e.course_id + "\x1f" + std::to_string(e.term_index);
        if (!seen_attempt.insert(key).second) {
            check.add(RuleClass::Type, Severity::Hard, "enrolments", row, "student_id",
                      "duplicate (student, course, term) attempt");
        }
        if (e.state == Outcome::Dropped && e.grade) {
            check.add(RuleClass::Type, Severity::Hard, "enrolments", row, "grade",
                      "dropped enrolment must not carry a grade");
        }
        if (e.state != Outcome::Dropped && !e.grade) {
            check.add(RuleClass::Completeness, Severity::Soft, "enrolments", row, "grade",
                      "graded state without grade");
        }
        if (e.grade && (*e.grade < params.grade_min || *e.grade > params.grade_max)) {
            check.add(RuleClass::Range, Severity::Hard, "enrolments", row, "grade",
                      "grade " + format_double(*e.grade) + " outside scale [" +
                          format_double(params.grade_min) + ", " + format_double(params.grade_max) + "]");
        }
        auto [it, inserted] = min_term.try_emplace(e.student_id, e.term_index);
        if (!inserted) it->second = std::min(it->second, e.term_index);
    }

    // entry_term must equal the minimum enrolment term (students with zero
    // enrolments are exempt; they are labelled departed downstream)
    for (std::size_t i = 0; i < d.students.size(); ++i) {
        const Student& s = d.students[i];
        const auto it = min_term.find(s.student_id);
        if (it != min_term.end() && it->second != s.entry_term) {
            check.add(RuleClass::Temporal, Severity::Hard, "students", i + 1, "entry_term",
                      "entry_term " + std::to_string(s.entry_term) +
                          " is not the minimum enrolment term (" + std::to_string(it->second) + ")");
        }
    }

    // ---- graduations ----
    for (std::size_t i = 0; i < d.graduations.size(); ++i) {
        const auto& g = d.graduations[i];
        const auto it = student_by_id.find(g.student_id);
        if (it == student_by_id.end()) {
            check.add(RuleClass::Referential, Severity::Hard, "graduations", i + 1, "student_id",
                      "unknown student '" + g.student_id + "'");
        } else if (g.term_index < it->second->entry_term) {
            check.add(RuleClass::Temporal, Severity::Hard, "graduations", i + 1, "term_index",
                      "graduation precedes entry");
        }
    }

    report.pass = report.hard_count() == 0;
    return report;
}

}  // namespace capire

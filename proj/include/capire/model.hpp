#pragma once

#include "capire/common.hpp"
#include "capire/csv.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace capire {

enum class Outcome { Passed, Failed, Dropped };

std::string to_string(Outcome s);
std::optional<Outcome> parse_outcome(const std::string& s);

// yes / no / unknown
enum class TriState { Yes, No, Unknown };

struct Student {
    std::string student_id;
    int cohort_year = 0;
    int entry_term = 0;
    double age_at_entry = 0.0;
    std::string gender;
    TriState works_at_entry = TriState::Unknown;
    std::optional<double> hs_gpa;
    std::string postcode;  // empty = missing
    std::optional<int> parental_education;
    std::optional<bool> siblings_university;
    std::string secondary_school_type;  // public/private/technical, empty = missing
    std::optional<double> distance_to_campus_km;
};

struct Enrolment {
    std::string student_id;
    std::string course_id;
    int term_index = 0;
    Outcome state = Outcome::Passed;
    std::optional<double> grade;
};

struct Course {
    std::string course_id;
    std::string curriculum_id;
    int nominal_term = 1;
    bool is_core = false;
};

struct Curriculum {
    std::string curriculum_id;
    // term offset (0-based, relative to entry) -> cumulative expected course count
    std::map<int, int> expected_courses_by_term;

    int expected_at_offset(int offset) const;  // largest defined offset <= offset, else 0
};

struct TermCalendarRow {
    int term_index = 0;
    int calendar_year = 0;
    std::string season;
    double inflation_yoy = 0.0;
    int strike_count_24m = 0;
    std::string postcode;
    std::optional<double> area_unemployment;
    std::optional<double> area_informality;
    std::optional<double> area_poverty;
    std::optional<double> area_deprivation;
};

struct Graduation {
    std::string student_id;
    int term_index = 0;
};

enum class LabelBasis { Graduated, StillEnrolled, Departed };
std::string to_string(LabelBasis b);

struct OutcomeLabel {
    std::string student_id;
    int attrition_flag = 0;
    LabelBasis label_basis = LabelBasis::Departed;
    int horizon_terms = 0;
};

struct Dataset {
    std::vector<Student> students;
    std::vector<Enrolment> enrolments;
    std::vector<Course> courses;
    std::vector<Curriculum> curricula;
    std::vector<TermCalendarRow> calendar;
    std::vector<Graduation> graduations;

    const Student* find_student(const std::string& id) const;
    const Course* find_course(const std::string& id) const;
    const Curriculum* find_curriculum(const std::string& id) const;

    // calendar lookups
    std::optional<int> year_of_term(int term_index) const;
    const TermCalendarRow* term_row(int term_index) const;  // any row at that term
    const TermCalendarRow* area_row(const std::string& postcode, int term_index) const;
};

// ---- csv <-> struct conversions -------------------------------------------
//
// Conversions are lossless for well-typed files. Cell-level type errors are
// not thrown here; parse_* records them so validate_dataset can report every
// violation instead of dying on the first. A structurally unreadable file
// still raises IngestError at the csv layer.

struct CellError {
    std::string table;
    std::size_t row = 0;  // 1-based data row
    std::string column;
    std::string message;
};

struct ParsedTables {
    Dataset dataset;
    std::vector<CellError> cell_errors;
    // raw tables retained for missingness profiling
    csv::Table students_raw, enrolments_raw, courses_raw, curricula_raw, calendar_raw;
    csv::Table graduations_raw;
    bool has_graduations = false;
};

ParsedTables parse_tables(const csv::Table& students, const csv::Table& enrolments,
                          const csv::Table& courses, const csv::Table& curricula,
                          const csv::Table& calendar,
                          const csv::Table* graduations = nullptr);

csv::Table to_table(const std::vector<Student>& v);
csv::Table to_table(const std::vector<Enrolment>& v);
csv::Table to_table(const std::vector<Course>& v);
csv::Table to_table(const std::vector<Curriculum>& v);
csv::Table to_table(const std::vector<TermCalendarRow>& v);
csv::Table to_table(const std::vector<Graduation>& v);

// ---- outcome labels --------------------------------------------------------
//
// A student is labelled once, from the full (never VOT-truncated) history:
//   graduated      — graduation record at relative term <= horizon + grace
//   still_enrolled — no graduation, but activity in the last term of the
//                    horizon window or later (relative term >= horizon - 1)
//   departed       — everything else, including students with no enrolments
// attrition_flag = 1 iff departed. Labels never enter the feature path.
std::vector<OutcomeLabel> derive_outcome_labels(const std::vector<Student>& students,
                                                const std::vector<Enrolment>& enrolments,
                                                const std::vector<Graduation>& graduations,
                                                int horizon_terms, int grace_terms);

}  // namespace capire

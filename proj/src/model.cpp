#include "capire/model.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_set>

namespace capire {

std::string to_string(Outcome s) {
    switch (s) {
        case Outcome::Passed: return "passed";
        case Outcome::Failed: return "failed";
        case Outcome::Dropped: return "dropped";
    }
    return "?";
}

std::optional<Outcome> parse_outcome(const std::string& s) {
    if (s == "passed") return Outcome::Passed;
    if (s == "failed") return Outcome::Failed;
    if (s == "dropped" || s == "libre") return Outcome::Dropped;
    return std::nullopt;
}

std::string to_string(LabelBasis b) {
    switch (b) {
        case LabelBasis::Graduated: return "graduated";
        case LabelBasis::StillEnrolled: return "still_enrolled";
        case LabelBasis::Departed: return "departed";
    }
    return "?";
}

int Curriculum::expected_at_offset(int offset) const {
    int value = 0;
    for (const auto& [off, cum] : expected_courses_by_term) {
        if (off > offset) break;
        value = cum;
    }
    return value;
}

const Student* Dataset::find_student(const std::string& id) const {
    for (const auto& s : students)
        if (s.student_id == id) return &s;
    return nullptr;
}

const Course* Dataset::find_course(const std::string& id) const {
    for (const auto& c : courses)
        if (c.course_id == id) return &c;
    return nullptr;
}

const Curriculum* Dataset::find_curriculum(const std::string& id) const {
    for (const auto& c : curricula)
        if (c.curriculum_id == id) return &c;
    return nullptr;
}

std::optional<int> Dataset::year_of_term(int term_index) const {
    for (const auto& row : calendar)
        if (row.term_index == term_index) return row.calendar_year;
    return std::nullopt;
}

const TermCalendarRow* Dataset::term_row(int term_index) const {
    for (const auto& row : calendar)
        if (row.term_index == term_index) return &row;
    return nullptr;
}

const TermCalendarRow* Dataset::area_row(const std::string& postcode, int term_index) const {
    for (const auto& row : calendar)
        if (row.term_index == term_index && row.postcode == postcode) return &row;
    return nullptr;
}

namespace {

struct RowReader {
    const csv::Table& table;
    const std::string table_name;
    std::size_t row_idx = 0;  // 0-based into rows
    std::vector<CellError>* errors;

    const std::string& cell(int col) const { return table.rows[row_idx][static_cast<std::size_t>(col)]; }

    void error(const std::string& column, const std::string& message) const {
        errors->push_back({table_name, row_idx + 1, column, message});
    }

    std::optional<double> opt_double(const std::string& column) const {
        const int col = table.column(column);
        if (col < 0) return std::nullopt;
        const std::string& s = cell(col);
        if (s.empty()) return std::nullopt;
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            error(column, "not a number: '" + s + "'");
            return std::nullopt;
        }
    }

    std::optional<int> opt_int(const std::string& column) const {
        const int col = table.column(column);
        if (col < 0) return std::nullopt;
        const std::string& s = cell(col);
        if (s.empty()) return std::nullopt;
        int v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            error(column, "not an integer: '" + s + "'");
            return std::nullopt;
        }
        return v;
    }

    std::string str(const std::string& column) const {
        const int col = table.column(column);
        return col < 0 ? std::string() : cell(col);
    }
};

std::optional<bool> parse_bool_cell(const RowReader& r, const std::string& column) {
    const std::string s = r.str(column);
    if (s.empty()) return std::nullopt;
    if (s == "1" || s == "true" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "no") return false;
    r.error(column, "not a boolean: '" + s + "'");
    return std::nullopt;
}

}  // namespace

ParsedTables parse_tables(const csv::Table& students, const csv::Table& enrolments,
                          const csv::Table& courses, const csv::Table& curricula,
                          const csv::Table& calendar, const csv::Table* graduations) {
    ParsedTables out;
    out.students_raw = students;
    out.enrolments_raw = enrolments;
    out.courses_raw = courses;
    out.curricula_raw = curricula;
    out.calendar_raw = calendar;

    auto require = [](const csv::Table& t, const char* name, std::initializer_list<const char*> cols) {
        for (const char* c : cols) {
            if (t.column(c) < 0)
                throw IngestError(std::string(name) + ".csv: missing required column '" + c + "'");
        }
    };
    require(students, "students",
            {"student_id", "cohort_year", "entry_term", "age_at_entry", "gender",
             "works_at_entry", "hs_gpa", "postcode", "parental_education",
             "siblings_university", "secondary_school_type", "distance_to_campus_km"});
    require(enrolments, "enrolments", {"student_id", "course_id", "term_index", "state", "grade"});
    require(courses, "courses", {"course_id", "curriculum_id", "nominal_term", "is_core"});
    require(curricula, "curricula", {"curriculum_id", "term_offset", "expected_courses_cum"});
    require(calendar, "calendar",
            {"term_index", "calendar_year", "season", "inflation_yoy", "strike_count_24m",
             "postcode", "area_unemployment", "area_informality", "area_poverty",
             "area_deprivation"});

    for (std::size_t i = 0; i < students.rows.size(); ++i) {
        RowReader r{students, "students", i, &out.cell_errors};
        Student s;
        s.student_id = r.str("student_id");
        s.cohort_year = r.opt_int("cohort_year").value_or(0);
        s.entry_term = r.opt_int("entry_term").value_or(0);
        s.age_at_entry = r.opt_double("age_at_entry").value_or(missing_value());
        s.gender = r.str("gender");
        const std::string works = r.str("works_at_entry");
        if (works == "yes") s.works_at_entry = TriState::Yes;
        else if (works == "no") s.works_at_entry = TriState::No;
        else if (works.empty() || works == "unknown") s.works_at_entry = TriState::Unknown;
        else r.error("works_at_entry", "expected yes/no/unknown, got '" + works + "'");
        s.hs_gpa = r.opt_double("hs_gpa");
        s.postcode = r.str("postcode");
        s.parental_education = r.opt_int("parental_education");
        s.siblings_university = parse_bool_cell(r, "siblings_university");
        s.secondary_school_type = r.str("secondary_school_type");
        s.distance_to_campus_km = r.opt_double("distance_to_campus_km");
        out.dataset.students.push_back(std::move(s));
    }

    for (std::size_t i = 0; i < enrolments.rows.size(); ++i) {
        RowReader r{enrolments, "enrolments", i, &out.cell_errors};
        Enrolment e;
        e.student_id = r.str("student_id");
        e.course_id = r.str("course_id");
        e.term_index = r.opt_int("term_index").value_or(0);
        const std::string st = r.str("state");
        if (auto o = parse_outcome(st)) {
            e.state = *o;
        } else {
            r.error("state", "unknown state '" + st + "'");
        }
        e.grade = r.opt_double("grade");
        out.dataset.enrolments.push_back(std::move(e));
    }

    for (std::size_t i = 0; i < courses.rows.size(); ++i) {
        RowReader r{courses, "courses", i, &out.cell_errors};
        Course c;
        c.course_id = r.str("course_id");
        c.curriculum_id = r.str("curriculum_id");
        c.nominal_term = r.opt_int("nominal_term").value_or(0);
        c.is_core = parse_bool_cell(r, "is_core").value_or(false);
        out.dataset.courses.push_back(std::move(c));
    }

    // curricula.csv is long-form: one row per (curriculum_id, term_offset).
    for (std::size_t i = 0; i < curricula.rows.size(); ++i) {
        RowReader r{curricula, "curricula", i, &out.cell_errors};
        const std::string id = r.str("curriculum_id");
        const auto offset = r.opt_int("term_offset");
        const auto cum = r.opt_int("expected_courses_cum");
        if (!offset || !cum) {
            if (curricula.rows[i].empty()) continue;
            r.error("term_offset", "curriculum row needs term_offset and expected_courses_cum");
            continue;
        }
        Curriculum* cur = nullptr;
        for (auto& c : out.dataset.curricula)
            if (c.curriculum_id == id) cur = &c;
        if (!cur) {
            out.dataset.curricula.push_back(Curriculum{id, {}});
            cur = &out.dataset.curricula.back();
        }
        cur->expected_courses_by_term[*offset] = *cum;
    }

    for (std::size_t i = 0; i < calendar.rows.size(); ++i) {
        RowReader r{calendar, "calendar", i, &out.cell_errors};
        TermCalendarRow row;
        row.term_index = r.opt_int("term_index").value_or(0);
        row.calendar_year = r.opt_int("calendar_year").value_or(0);
        row.season = r.str("season");
        row.inflation_yoy = r.opt_double("inflation_yoy").value_or(missing_value());
        row.strike_count_24m = r.opt_int("strike_count_24m").value_or(0);
        row.postcode = r.str("postcode");
        row.area_unemployment = r.opt_double("area_unemployment");
        row.area_informality = r.opt_double("area_informality");
        row.area_poverty = r.opt_double("area_poverty");
        row.area_deprivation = r.opt_double("area_deprivation");
        out.dataset.calendar.push_back(std::move(row));
    }

    if (graduations) {
        out.has_graduations = true;
        out.graduations_raw = *graduations;
        graduations->require_column("student_id");
        graduations->require_column("term_index");
        for (std::size_t i = 0; i < graduations->rows.size(); ++i) {
            RowReader r{*graduations, "graduations", i, &out.cell_errors};
            Graduation g;
            g.student_id = r.str("student_id");
            g.term_index = r.opt_int("term_index").value_or(0);
            out.dataset.graduations.push_back(std::move(g));
        }
    }
    return out;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}
std::string opt_str(const std::optional<int>& v) {
    return v ? std::to_string(*v) : std::string();
}
std::string opt_str(const std::optional<bool>& v) {
    return v ? std::string(*v ? "1" : "0") : std::string();
}

}  // namespace

csv::Table to_table(const std::vector<Student>& v) {
    csv::Table t;
    t.header = {"student_id", "cohort_year", "entry_term", "age_at_entry", "gender",
                "works_at_entry", "hs_gpa", "postcode", "parental_education",
                "siblings_university", "secondary_school_type", "distance_to_campus_km"};
    for (const auto& s : v) {
        std::string works = s.works_at_entry == TriState::Yes  ? "yes"
                            : s.works_at_entry == TriState::No ? "no"
                                                               : "unknown";
        t.rows.push_back({s.student_id, std::to_string(s.cohort_year),
                          std::to_string(s.entry_term), format_double(s.age_at_entry), s.gender,
                          works, opt_str(s.hs_gpa), s.postcode, opt_str(s.parental_education),
                          opt_str(s.siblings_university), s.secondary_school_type,
                          opt_str(s.distance_to_campus_km)});
    }
    return t;
}

csv::Table to_table(const std::vector<Enrolment>& v) {
    csv::Table t;
    t.header = {"student_id", "course_id", "term_index", "state", "grade"};
    for (const auto& e : v) {
        t.rows.push_back({e.student_id, e.course_id, std::to_string(e.term_index),
                          to_string(e.state), opt_str(e.grade)});
    }
    return t;
}

csv::Table to_table(const std::vector<Course>& v) {
    csv::Table t;
    t.header = {"course_id", "curriculum_id", "nominal_term", "is_core"};
    for (const auto& c : v) {
        t.rows.push_back({c.course_id, c.curriculum_id, std::to_string(c.nominal_term),
                          c.is_core ? "1" : "0"});
    }
    return t;
}

csv::Table to_table(const std::vector<Curriculum>& v) {
    csv::Table t;
    t.header = {"curriculum_id", "term_offset", "expected_courses_cum"};
    for (const auto& c : v) {
        for (const auto& [off, cum] : c.expected_courses_by_term) {
            t.rows.push_back({c.curriculum_id, std::to_string(off), std::to_string(cum)});
        }
    }
    return t;
}

csv::Table to_table(const std::vector<TermCalendarRow>& v) {
    csv::Table t;
    t.header = {"term_index", "calendar_year", "season", "inflation_yoy", "strike_count_24m",
                "postcode", "area_unemployment", "area_informality", "area_poverty",
                "area_deprivation"};
    for (const auto& r : v) {
        t.rows.push_back({std::to_string(r.term_index), std::to_string(r.calendar_year), r.season,
                          format_double(r.inflation_yoy), std::to_string(r.strike_count_24m),
                          r.postcode, opt_str(r.area_unemployment), opt_str(r.area_informality),
                          opt_str(r.area_poverty), opt_str(r.area_deprivation)});
    }
    return t;
}

csv::Table to_table(const std::vector<Graduation>& v) {
    csv::Table t;
    t.header = {"student_id", "term_index"};
    for (const auto& g : v) t.rows.push_back({g.student_id, std::to_string(g.term_index)});
    return t;
}

std::vector<OutcomeLabel> derive_outcome_labels(const std::vector<Student>& students,
                                                const std::vector<Enrolment>& enrolments,
                                                const std::vector<Graduation>& graduations,
                                                int horizon_terms, int grace_terms) {
    std::unordered_map<std::string, int> last_rel;  // max relative activity term
    std::unordered_map<std::string, int> entry;
    for (const auto& s : students) entry[s.student_id] = s.entry_term;
    for (const auto& e : enrolments) {
        auto it = entry.find(e.student_id);
        if (it == entry.end()) continue;
        const int rel = e.term_index - it->second;
        auto [pos, inserted] = last_rel.try_emplace(e.student_id, rel);
        if (!inserted) pos->second = std::max(pos->second, rel);
    }
    std::unordered_map<std::string, int> grad_rel;
    for (const auto& g : graduations) {
        auto it = entry.find(g.student_id);
        if (it == entry.end()) continue;
        const int rel = g.term_index - it->second;
        auto [pos, inserted] = grad_rel.try_emplace(g.student_id, rel);
        if (!inserted) pos->second = std::min(pos->second, rel);
    }

    const int effective_horizon = horizon_terms + grace_terms;
    std::vector<OutcomeLabel> labels;
    labels.reserve(students.size());
    for (const auto& s : students) {
        OutcomeLabel label;
        label.student_id = s.student_id;
        label.horizon_terms = horizon_terms;
        const auto g = grad_rel.find(s.student_id);
        const auto a = last_rel.find(s.student_id);
        if (g != grad_rel.end() && g->second <= effective_horizon) {
            label.label_basis = LabelBasis::Graduated;
            label.attrition_flag = 0;
        } else if (a != last_rel.end() && a->second >= horizon_terms - 1) {
            label.label_basis = LabelBasis::StillEnrolled;
            label.attrition_flag = 0;
        } else {
            label.label_basis = LabelBasis::Departed;
            label.attrition_flag = 1;
        }
        labels.push_back(std::move(label));
    }
    return labels;
}

}  // namespace capire

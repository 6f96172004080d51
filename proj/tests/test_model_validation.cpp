#include "capire/validation.hpp"

#include "test_helpers.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <sstream>

using namespace capire;
using capire::testing::toy_dataset;
using capire::testing::toy_tables;

TEST_CASE("consistent toy set passes with zero violations") {
    const ParsedTables tables = toy_tables();
    const ValidationReport report = validate_dataset(tables);
    CHECK(report.pass);
    CHECK(report.hard_count() == 0);
    for (const auto& [table, columns] : report.missingness) {
        for (const auto& [column, fraction] : columns) {
            if (table == "enrolments" && column == "grade") continue;  // dropped rows
            CHECK(fraction <= doctest::Approx(0.5));
        }
    }
    // identical bytes in, identical report out
    const ValidationReport again = validate_dataset(toy_tables());
    CHECK(again.to_json() == report.to_json());
}

TEST_CASE("unknown student reference fails with one referential violation") {
    Dataset d = toy_dataset();
    Enrolment ghost;
    ghost.student_id = "S999";
    ghost.course_id = "C1";
    ghost.term_index = 1;
    ghost.state = Outcome::Failed;
    ghost.grade = 2.0;
    d.enrolments.push_back(ghost);
    const auto grads = to_table(d.graduations);
    const auto tables = parse_tables(to_table(d.students), to_table(d.enrolments),
                                     to_table(d.courses), to_table(d.curricula),
                                     to_table(d.calendar), &grads);
    const ValidationReport report = validate_dataset(tables);
    CHECK_FALSE(report.pass);
    CHECK(report.count(RuleClass::Referential) == 1);
}

TEST_CASE("pre-entry enrolment fails with one temporal violation") {
    Dataset d = toy_dataset();
    d.students[0].entry_term = 1;  // S1 now enters at term 1; term-0 rows precede entry
    const auto grads = to_table(d.graduations);
    const auto tables = parse_tables(to_table(d.students), to_table(d.enrolments),
                                     to_table(d.courses), to_table(d.curricula),
                                     to_table(d.calendar), &grads);
    const ValidationReport report = validate_dataset(tables);
    CHECK_FALSE(report.pass);
    CHECK(report.count(RuleClass::Temporal) >= 1);
}

TEST_CASE("typed garbage becomes a type violation, not a crash") {
    csv::Table students = to_table(toy_dataset().students);
    students.rows[0][3] = "abc";  // age_at_entry
    const Dataset d = toy_dataset();
    const auto tables = parse_tables(students, to_table(d.enrolments), to_table(d.courses),
                                     to_table(d.curricula), to_table(d.calendar));
    const ValidationReport report = validate_dataset(tables);
    CHECK_FALSE(report.pass);
    CHECK(report.count(RuleClass::Type) >= 1);
}

TEST_CASE("hard range vs soft plausibility: age") {
    Dataset d = toy_dataset();
    d.students[0].age_at_entry = 85.0;  // inside [14,90]: soft only
    auto grads = to_table(d.graduations);
    auto tables = parse_tables(to_table(d.students), to_table(d.enrolments), to_table(d.courses),
                               to_table(d.curricula), to_table(d.calendar), &grads);
    ValidationReport report = validate_dataset(tables);
    CHECK(report.pass);
    CHECK(report.violations.size() >= 1);

    d.students[0].age_at_entry = 12.0;  // below hard bound
    tables = parse_tables(to_table(d.students), to_table(d.enrolments), to_table(d.courses),
                          to_table(d.curricula), to_table(d.calendar), &grads);
    report = validate_dataset(tables);
    CHECK_FALSE(report.pass);
    CHECK(report.count(RuleClass::Range) >= 1);
}

TEST_CASE("dropped enrolment with a grade is rejected") {
    Dataset d = toy_dataset();
    d.enrolments[4].grade = 3.0;  // S2 C1 dropped
    const auto grads = to_table(d.graduations);
    const auto tables = parse_tables(to_table(d.students), to_table(d.enrolments),
                                     to_table(d.courses), to_table(d.curricula),
                                     to_table(d.calendar), &grads);
    CHECK_FALSE(validate_dataset(tables).pass);
}

TEST_CASE("profile_missingness arithmetic") {
    csv::Table t;
    t.header = {"a", "b"};
    for (int i = 0; i < 10; ++i) t.rows.push_back({i < 2 ? "" : "x", "y"});
    const auto fractions = profile_missingness(t);
    CHECK(fractions.at("a") == doctest::Approx(0.2));
    CHECK(fractions.at("b") == doctest::Approx(0.0));

    csv::Table empty;
    empty.header = {"a"};
    CHECK(profile_missingness(empty).at("a") == 0.0);
}

TEST_CASE("outcome labels: graduated / still enrolled / departed") {
    const Dataset d = toy_dataset();
    const auto labels = derive_outcome_labels(d.students, d.enrolments, d.graduations, 5, 1);
    REQUIRE(labels.size() == 3);
    CHECK(labels[0].label_basis == LabelBasis::Graduated);  // S1 graduates at rel 5 <= 6
    CHECK(labels[0].attrition_flag == 0);
    CHECK(labels[1].label_basis == LabelBasis::StillEnrolled);  // S2 active at rel 5 >= 4
    CHECK(labels[1].attrition_flag == 0);
    CHECK(labels[2].label_basis == LabelBasis::Departed);  // S3 last at rel 1
    CHECK(labels[2].attrition_flag == 1);
}

TEST_CASE("zero-enrolment student is departed") {
    Dataset d = toy_dataset();
    Student ghost;
    ghost.student_id = "S4";
    ghost.cohort_year = 2004;
    ghost.entry_term = 0;
    ghost.age_at_entry = 18.0;
    ghost.gender = "f";
    d.students.push_back(ghost);
    const auto labels = derive_outcome_labels(d.students, d.enrolments, d.graduations, 5, 1);
    CHECK(labels.back().label_basis == LabelBasis::Departed);
    CHECK(labels.back().attrition_flag == 1);
}

TEST_CASE("label with last activity four terms before horizon end is attrition") {
    Dataset d = toy_dataset();
    // S2's last activity at rel 5; horizon 12 end leaves a 4+ term gap
    const auto labels = derive_outcome_labels(d.students, d.enrolments, {}, 10, 0);
    CHECK(labels[1].label_basis == LabelBasis::Departed);
    CHECK(labels[1].attrition_flag == 1);
}

#include "capire/dictionary.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace capire {

std::string to_string(Level l) {
    switch (l) {
        case Level::N1: return "N1";
        case Level::N2: return "N2";
        case Level::N3: return "N3";
        case Level::N4: return "N4";
    }
    return "?";
}

Level parse_level(const std::string& s) {
    if (s == "N1") return Level::N1;
    if (s == "N2") return Level::N2;
    if (s == "N3") return Level::N3;
    if (s == "N4") return Level::N4;
    throw ConfigError("unknown feature level '" + s + "'");
}

std::string to_string(ImputePolicy p) {
    switch (p) {
        case ImputePolicy::RegionMedian: return "region_median";
        case ImputePolicy::TrainMean: return "train_mean";
        case ImputePolicy::Never: return "never";
        case ImputePolicy::Passthrough: return "passthrough";
    }
    return "?";
}

ImputePolicy parse_impute_policy(const std::string& s) {
    if (s == "region_median") return ImputePolicy::RegionMedian;
    if (s == "train_mean") return ImputePolicy::TrainMean;
    if (s == "never") return ImputePolicy::Never;
    if (s == "passthrough") return ImputePolicy::Passthrough;
    throw ConfigError("unknown imputation policy '" + s + "'");
}

namespace {

std::string time_bound_kind_name(TimeBoundKind k) {
    switch (k) {
        case TimeBoundKind::PreEntry: return "pre_entry";
        case TimeBoundKind::Entry: return "entry";
        case TimeBoundKind::Window: return "window";
        case TimeBoundKind::UpToTerm: return "up_to_term";
        case TimeBoundKind::FullHistory: return "full_history";
        case TimeBoundKind::Outcome: return "outcome";
        case TimeBoundKind::Undeclared: return "undeclared";
    }
    return "?";
}

TimeBoundKind parse_time_bound_kind(const std::string& s) {
    if (s == "pre_entry") return TimeBoundKind::PreEntry;
    if (s == "entry") return TimeBoundKind::Entry;
    if (s == "window") return TimeBoundKind::Window;
    if (s == "up_to_term") return TimeBoundKind::UpToTerm;
    if (s == "full_history") return TimeBoundKind::FullHistory;
    if (s == "outcome") return TimeBoundKind::Outcome;
    if (s == "undeclared") return TimeBoundKind::Undeclared;
    throw ConfigError("unknown time bound '" + s + "'");
}

}  // namespace

const FeatureDef* Dictionary::find(const std::string& name) const {
    for (const auto& f : features)
        if (f.name == name) return &f;
    return nullptr;
}

std::size_t Dictionary::count(Level l) const {
    std::size_t n = 0;
    for (const auto& f : features)
        if (f.level == l) ++n;
    return n;
}

std::vector<std::string> Dictionary::names() const {
    std::vector<std::string> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.name);
    return out;
}

Dictionary Dictionary::from_json(const nlohmann::json& j) {
    Dictionary d;
    d.version = j.value("version", 1);
    if (!j.contains("features") || !j["features"].is_array())
        throw ConfigError("feature dictionary: missing 'features' array");
    for (const auto& f : j["features"]) {
        FeatureDef def;
        def.name = f.at("name").get<std::string>();
        def.level = parse_level(f.at("level").get<std::string>());
        def.description = f.value("description", "");
        if (f.contains("source_fields"))
            def.source_fields = f["source_fields"].get<std::vector<std::string>>();
        if (f.contains("time_bound")) {
            const auto& tb = f["time_bound"];
            def.time_bound.kind = parse_time_bound_kind(tb.at("kind").get<std::string>());
            if (def.time_bound.kind == TimeBoundKind::UpToTerm)
                def.time_bound.term = tb.at("term").get<int>();
        }
        if (f.contains("imputation"))
            def.imputation = parse_impute_policy(f["imputation"].get<std::string>());
        def.indicator = f.value("indicator", false);
        def.interaction = f.value("interaction", false);
        d.features.push_back(std::move(def));
    }
    return d;
}

nlohmann::json Dictionary::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : features) {
        nlohmann::json tb;
        tb["kind"] = time_bound_kind_name(f.time_bound.kind);
        if (f.time_bound.kind == TimeBoundKind::UpToTerm) tb["term"] = f.time_bound.term;
        nlohmann::json jf{{"name", f.name},
                          {"level", to_string(f.level)},
                          {"description", f.description},
                          {"source_fields", f.source_fields},
                          {"time_bound", tb},
                          {"imputation", to_string(f.imputation)},
                          {"indicator", f.indicator}};
        if (f.interaction) jf["interaction"] = true;
        arr.push_back(std::move(jf));
    }
    return nlohmann::json{{"version", version}, {"features", arr}};
}

Dictionary Dictionary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open feature dictionary '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("feature dictionary '" + path + "': " + e.what());
    }
    return from_json(j);
}

Dictionary builtin_dictionary() {
    Dictionary d;
    d.version = 1;
    auto add = [&](std::string name, Level level, std::string desc,
                   std::vector<std::string> sources, TimeBound tb, ImputePolicy pol,
                   bool indicator, bool interaction = false) {
        d.features.push_back({std::move(name), level, std::move(desc), std::move(sources), tb,
                              pol, indicator, interaction});
    };
    const TimeBound pre{TimeBoundKind::PreEntry, 0};
    const TimeBound entry{TimeBoundKind::Entry, 0};
    const TimeBound window{TimeBoundKind::Window, 0};

    // N1: pre-entry structural context (12)
    add("area_deprivation", Level::N1, "census deprivation index of the home postcode",
        {"students.postcode", "calendar.area_deprivation"}, entry, ImputePolicy::RegionMedian, true);
    add("area_unemployment_t0", Level::N1, "local unemployment rate in the entry year",
        {"students.postcode", "calendar.area_unemployment"}, entry, ImputePolicy::RegionMedian, true);
    add("area_informality_t0", Level::N1, "local labour informality rate in the entry year",
        {"students.postcode", "calendar.area_informality"}, entry, ImputePolicy::RegionMedian, true);
    add("area_poverty_t0", Level::N1, "local poverty rate in the entry year",
        {"students.postcode", "calendar.area_poverty"}, entry, ImputePolicy::RegionMedian, true);
    add("distance_to_campus_km", Level::N1, "distance from home area to campus",
        {"students.distance_to_campus_km"}, pre, ImputePolicy::RegionMedian, true);
    add("rural_origin", Level::N1, "1 when distance to campus exceeds the rural threshold",
        {"students.distance_to_campus_km"}, pre, ImputePolicy::RegionMedian, true);
    add("parental_education", Level::N1, "parental educational attainment, ordinal 0-5",
        {"students.parental_education"}, pre, ImputePolicy::RegionMedian, true);
    add("first_generation", Level::N1, "1 when parental education is at most secondary",
        {"students.parental_education"}, pre, ImputePolicy::RegionMedian, true);
    add("siblings_university", Level::N1, "1 when a sibling attended university",
        {"students.siblings_university"}, pre, ImputePolicy::RegionMedian, true);
    add("secondary_public", Level::N1, "secondary school type: public",
        {"students.secondary_school_type"}, pre, ImputePolicy::RegionMedian, true);
    add("secondary_private", Level::N1, "secondary school type: private",
        {"students.secondary_school_type"}, pre, ImputePolicy::RegionMedian, true);
    add("secondary_technical", Level::N1, "secondary school type: technical",
        {"students.secondary_school_type"}, pre, ImputePolicy::RegionMedian, true);

    // N2: entry moment (6)
    add("age_at_entry", Level::N2, "age in years at first enrolment",
        {"students.age_at_entry"}, entry, ImputePolicy::TrainMean, false);
    add("gender_flag", Level::N2, "1 = female, 0 = otherwise",
        {"students.gender"}, entry, ImputePolicy::TrainMean, false);
    add("works_at_entry", Level::N2, "1 when the student reported working at entry",
        {"students.works_at_entry"}, entry, ImputePolicy::TrainMean, true);
    add("hs_gpa", Level::N2, "upper-secondary grade average",
        {"students.hs_gpa"}, pre, ImputePolicy::TrainMean, true);
    add("inflation_t0", Level::N2, "year-on-year inflation in the entry year",
        {"calendar.inflation_yoy"}, entry, ImputePolicy::TrainMean, false);
    add("strikes_24m_pre_t0", Level::N2, "teacher strikes in the 24 months before entry",
        {"calendar.strike_count_24m"}, entry, ImputePolicy::TrainMean, false);

    // N3: in-window performance and friction (16)
    add("courses_attempted", Level::N3, "enrolment attempts in the window",
        {"enrolments.state"}, window, ImputePolicy::Never, false);
    add("courses_passed", Level::N3, "attempts ending in passed",
        {"enrolments.state"}, window, ImputePolicy::Never, false);
    add("courses_failed", Level::N3, "attempts ending in failed",
        {"enrolments.state"}, window, ImputePolicy::Never, false);
    add("courses_dropped", Level::N3, "attempts ending in dropped (libre)",
        {"enrolments.state"}, window, ImputePolicy::Never, false);
    add("pass_rate", Level::N3, "passed / attempted", {"enrolments.state"}, window,
        ImputePolicy::Never, false);
    add("fail_rate", Level::N3, "failed / attempted", {"enrolments.state"}, window,
        ImputePolicy::Never, false);
    add("libre_rate", Level::N3, "dropped / attempted", {"enrolments.state"}, window,
        ImputePolicy::Never, false);
    add("grade_mean", Level::N3, "mean grade over graded in-window attempts",
        {"enrolments.grade"}, window, ImputePolicy::Never, false);
    add("grade_median", Level::N3, "median grade over graded in-window attempts",
        {"enrolments.grade"}, window, ImputePolicy::Never, false);
    add("grade_std", Level::N3, "grade dispersion over graded in-window attempts",
        {"enrolments.grade"}, window, ImputePolicy::Never, false);
    add("mean_attempts_per_course", Level::N3, "attempts divided by distinct courses",
        {"enrolments.course_id"}, window, ImputePolicy::Never, false);
    add("ifc_mean", Level::N3, "mean course friction over distinct attempted courses",
        {"enrolments.state", "enrolments.course_id"}, window, ImputePolicy::Never, false);
    add("filter_exposure_count", Level::N3, "attempts in courses above the friction threshold",
        {"enrolments.course_id"}, window, ImputePolicy::Never, false);
    add("filter_exposure_rate", Level::N3, "share of attempts in filter courses",
        {"enrolments.course_id"}, window, ImputePolicy::Never, false);
    add("filter_courses_attempted", Level::N3, "distinct filter courses attempted",
        {"enrolments.course_id"}, window, ImputePolicy::Never, false);
    add("max_course_attempts", Level::N3, "highest attempt count on a single course",
        {"enrolments.course_id"}, window, ImputePolicy::Never, false);

    // N4: trajectory dynamics (6) + interactions (4)
    add("reenrolment_count", Level::N4, "repeat enrolments: attempts minus distinct courses",
        {"enrolments.course_id"}, window, ImputePolicy::Passthrough, false);
    add("max_gap", Level::N4, "longest run of inactive terms between active terms",
        {"enrolments.term_index"}, window, ImputePolicy::Passthrough, false);
    add("load_trend", Level::N4, "OLS slope of courses-per-term on term index",
        {"enrolments.term_index"}, window, ImputePolicy::Passthrough, false);
    add("velocity", Level::N4, "passed distinct courses over curriculum expectation at cutoff",
        {"enrolments.state", "curricula.expected_courses_cum"}, window,
        ImputePolicy::Passthrough, false);
    add("spacing_regularity", Level::N4, "dispersion of gaps between consecutive active terms",
        {"enrolments.term_index"}, window, ImputePolicy::Passthrough, false);
    add("state_entropy", Level::N4, "entropy of outcome states incl. expected-but-never-attempted",
        {"enrolments.state", "curricula.expected_courses_cum"}, window,
        ImputePolicy::Passthrough, false);
    add("ifc_x_libre", Level::N4, "friction exposure times withdrawal propensity",
        {"ifc_mean", "libre_rate"}, window, ImputePolicy::Passthrough, true, true);
    add("age_x_attempts", Level::N4, "age at entry times repetition propensity",
        {"age_at_entry", "mean_attempts_per_course"}, window, ImputePolicy::Passthrough, true, true);
    add("deprivation_x_passrate", Level::N4, "structural deprivation times pass rate",
        {"area_deprivation", "pass_rate"}, window, ImputePolicy::Passthrough, true, true);
    add("filter_x_gap", Level::N4, "filter exposure times longest interruption",
        {"filter_exposure_rate", "max_gap"}, window, ImputePolicy::Passthrough, true, true);

    return d;
}

}  // namespace capire

#include "capire/synth.hpp"

#include "capire/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace capire::synth {

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

double get_or(const nlohmann::json& j, const char* key, double def) {
    return j.contains(key) ? j[key].get<double>() : def;
}

}  // namespace

ArchetypeTemplate ArchetypeTemplate::from_json(const nlohmann::json& j) {
    ArchetypeTemplate t;
    t.template_id = j.at("template_id").get<std::string>();
    t.share = j.at("share").get<double>();
    t.drop_p = get_or(j, "drop_p", t.drop_p);
    t.fail_p = get_or(j, "fail_p", t.fail_p);
    t.gap_p = get_or(j, "gap_p", t.gap_p);
    if (j.contains("skip_terms")) t.skip_terms = j["skip_terms"].get<std::vector<int>>();
    t.load_start = get_or(j, "load_start", t.load_start);
    t.load_slope = get_or(j, "load_slope", t.load_slope);
    t.retake_affinity = get_or(j, "retake_affinity", t.retake_affinity);
    t.friction_affinity = get_or(j, "friction_affinity", t.friction_affinity);
    t.age_mean = get_or(j, "age_mean", t.age_mean);
    t.age_sd = get_or(j, "age_sd", t.age_sd);
    t.work_p = get_or(j, "work_p", t.work_p);
    t.deprivation_level = get_or(j, "deprivation_level", t.deprivation_level);
    t.hs_gpa_mean = get_or(j, "hs_gpa_mean", t.hs_gpa_mean);
    t.hs_gpa_sd = get_or(j, "hs_gpa_sd", t.hs_gpa_sd);
    t.parental_education_mean = get_or(j, "parental_education_mean", t.parental_education_mean);
    t.siblings_p = get_or(j, "siblings_p", t.siblings_p);
    t.secondary_type = j.value("secondary_type", t.secondary_type);
    t.attrition_p = get_or(j, "attrition_p", t.attrition_p);
    t.attrition_drift = get_or(j, "attrition_drift", t.attrition_drift);
    t.graduate_p = get_or(j, "graduate_p", t.graduate_p);
    return t;
}

nlohmann::json ArchetypeTemplate::to_json() const {
    return nlohmann::json{{"template_id", template_id},
                          {"share", share},
                          {"drop_p", drop_p},
                          {"fail_p", fail_p},
                          {"gap_p", gap_p},
                          {"skip_terms", skip_terms},
                          {"load_start", load_start},
                          {"load_slope", load_slope},
                          {"retake_affinity", retake_affinity},
                          {"friction_affinity", friction_affinity},
                          {"age_mean", age_mean},
                          {"age_sd", age_sd},
                          {"work_p", work_p},
                          {"deprivation_level", deprivation_level},
                          {"hs_gpa_mean", hs_gpa_mean},
                          {"hs_gpa_sd", hs_gpa_sd},
                          {"parental_education_mean", parental_education_mean},
                          {"siblings_p", siblings_p},
                          {"secondary_type", secondary_type},
                          {"attrition_p", attrition_p},
                          {"attrition_drift", attrition_drift},
                          {"graduate_p", graduate_p}};
}

DiffuseRanges DiffuseRanges::from_json(const nlohmann::json& j) {
    DiffuseRanges d;
    d.drop_lo = get_or(j, "drop_lo", d.drop_lo);
    d.drop_hi = get_or(j, "drop_hi", d.drop_hi);
    d.fail_lo = get_or(j, "fail_lo", d.fail_lo);
    d.fail_hi = get_or(j, "fail_hi", d.fail_hi);
    d.gap_lo = get_or(j, "gap_lo", d.gap_lo);
    d.gap_hi = get_or(j, "gap_hi", d.gap_hi);
    d.load_lo = get_or(j, "load_lo", d.load_lo);
    d.load_hi = get_or(j, "load_hi", d.load_hi);
    d.slope_lo = get_or(j, "slope_lo", d.slope_lo);
    d.slope_hi = get_or(j, "slope_hi", d.slope_hi);
    d.age_mean = get_or(j, "age_mean", d.age_mean);
    d.age_sd = get_or(j, "age_sd", d.age_sd);
    d.attrition_lo = get_or(j, "attrition_lo", d.attrition_lo);
    d.attrition_hi = get_or(j, "attrition_hi", d.attrition_hi);
    return d;
}

nlohmann::json DiffuseRanges::to_json() const {
    return nlohmann::json{{"drop_lo", drop_lo},   {"drop_hi", drop_hi},
                          {"fail_lo", fail_lo},   {"fail_hi", fail_hi},
                          {"gap_lo", gap_lo},     {"gap_hi", gap_hi},
                          {"load_lo", load_lo},   {"load_hi", load_hi},
                          {"slope_lo", slope_lo}, {"slope_hi", slope_hi},
                          {"age_mean", age_mean}, {"age_sd", age_sd},
                          {"attrition_lo", attrition_lo}, {"attrition_hi", attrition_hi}};
}

void GeneratorConfig::check() const {
    if (n_students < 1) throw ConfigError("generator.n_students must be >= 1");
    if (n_courses < 5) throw ConfigError("generator.n_courses must be >= 5");
    double share_sum = 0.0;
    for (const auto& t : templates) {
        if (t.share < 0) throw ConfigError("template share must be >= 0");
        for (double p : {t.drop_p, t.fail_p, t.gap_p, t.work_p, t.attrition_p, t.graduate_p}) {
            if (p < 0.0 || p > 1.0)
                throw ConfigError("template '" + t.template_id + "': probabilities must be in [0,1]");
        }
        share_sum += t.share;
    }
    if (share_sum > 1.0 + 1e-9)
        throw ConfigError("template shares sum to " + format_double(share_sum) + " > 1");
    if (std::abs((1.0 - share_sum) - noise_share) > 0.02)
        throw ConfigError("noise_share must equal 1 - sum(template shares)");
    const int last_entry_term = (cohort_year_span - 1) * 2;
    if (n_terms <= last_entry_term + horizon + grace)
        throw ConfigError("generator.n_terms too small for the cohort span plus horizon");
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    c.n_students = j.value("n_students", c.n_students);
    c.n_courses = j.value("n_courses", c.n_courses);
    c.n_terms = j.value("n_terms", c.n_terms);
    c.base_year = j.value("base_year", c.base_year);
    c.cohort_year_span = j.value("cohort_year_span", c.cohort_year_span);
    c.n_postcodes = j.value("n_postcodes", c.n_postcodes);
    c.nominal_terms = j.value("nominal_terms", c.nominal_terms);
    c.noise_share = j.value("noise_share", c.noise_share);
    c.zero_enrolment_share = j.value("zero_enrolment_share", c.zero_enrolment_share);
    c.female_share = j.value("female_share", c.female_share);
    c.macro_variation = j.value("macro_variation", c.macro_variation);
    c.works_unknown_p = j.value("works_unknown_p", c.works_unknown_p);
    c.missing_postcode_p = j.value("missing_postcode_p", c.missing_postcode_p);
    c.missing_hs_gpa_p = j.value("missing_hs_gpa_p", c.missing_hs_gpa_p);
    c.missing_parental_p = j.value("missing_parental_p", c.missing_parental_p);
    c.missing_siblings_p = j.value("missing_siblings_p", c.missing_siblings_p);
    c.missing_secondary_p = j.value("missing_secondary_p", c.missing_secondary_p);
    c.missing_distance_p = j.value("missing_distance_p", c.missing_distance_p);
    c.horizon = j.value("horizon", c.horizon);
    c.grace = j.value("grace", c.grace);
    c.cutoff = j.value("cutoff", c.cutoff);
    c.drift_year = j.value("drift_year", c.drift_year);
    c.seed = j.value("seed", c.seed);
    if (j.contains("templates")) {
        for (const auto& t : j["templates"]) c.templates.push_back(ArchetypeTemplate::from_json(t));
    }
    if (j.contains("diffuse")) c.diffuse = DiffuseRanges::from_json(j["diffuse"]);
    return c;
}

nlohmann::json GeneratorConfig::to_json() const {
    nlohmann::json templates_json = nlohmann::json::array();
    for (const auto& t : templates) templates_json.push_back(t.to_json());
    return nlohmann::json{{"n_students", n_students},
                          {"n_courses", n_courses},
                          {"n_terms", n_terms},
                          {"base_year", base_year},
                          {"cohort_year_span", cohort_year_span},
                          {"n_postcodes", n_postcodes},
                          {"nominal_terms", nominal_terms},
                          {"noise_share", noise_share},
                          {"zero_enrolment_share", zero_enrolment_share},
                          {"female_share", female_share},
                          {"macro_variation", macro_variation},
                          {"works_unknown_p", works_unknown_p},
                          {"missing_postcode_p", missing_postcode_p},
                          {"missing_hs_gpa_p", missing_hs_gpa_p},
                          {"missing_parental_p", missing_parental_p},
                          {"missing_siblings_p", missing_siblings_p},
                          {"missing_secondary_p", missing_secondary_p},
                          {"missing_distance_p", missing_distance_p},
                          {"horizon", horizon},
                          {"grace", grace},
                          {"cutoff", cutoff},
                          {"drift_year", drift_year},
                          {"seed", seed},
                          {"templates", templates_json},
                          {"diffuse", diffuse.to_json()}};
}

csv::Table ground_truth_table(const std::vector<GroundTruthRow>& rows) {
    csv::Table t;
    t.header = {"student_id", "template_id", "attrition_flag"};
    for (const auto& r : rows) {
        t.rows.push_back({r.student_id, r.template_id, std::to_string(r.attrition_flag)});
    }
    return t;
}

namespace {

struct CoursePlan {
    std::vector<Course> courses;
    std::vector<double> difficulty;  // [0,1], aligned with courses
};

// Attempt outcome probabilities: template propensity modulated by course
// difficulty, with the extremes preserved (drop_p == 1 stays 1 so an
// all-dropped archetype really drops everything).
void attempt_probs(const ArchetypeTemplate& t, double difficulty, double& p_drop, double& p_fail) {
    const double mod = (difficulty - 0.5) * 4.0;
    p_drop = clamp01(t.drop_p + 0.5 * mod * t.drop_p * (1.0 - t.drop_p));
    p_fail = clamp01(t.fail_p + 0.4 * mod * t.fail_p * (1.0 - t.fail_p));
    const double s = p_drop + p_fail;
    if (s > 1.0) {
        p_drop /= s;
        p_fail /= s;
    }
}

double quarter(double x) { return std::round(x * 4.0) / 4.0; }

}  // namespace

GeneratedCohort generate(const GeneratorConfig& config) {
    config.check();
    Rng rng(config.seed);
    GeneratedCohort out;
    Dataset& data = out.dataset;

    // ---- postcodes and calendar ----
    std::vector<std::string> postcodes;
    std::vector<double> deprivation;
    for (int p = 0; p < config.n_postcodes; ++p) {
        postcodes.push_back("P" + std::to_string(1000 + p));
        deprivation.push_back(0.1 + 0.75 * static_cast<double>(p) /
                                        std::max(1, config.n_postcodes - 1));
    }
    // smooth macro series: adjacent cohorts stay close so entry-year context
    // reads as a gradient, not as discrete regimes
    std::vector<double> inflation_by_year;
    const int n_years = (config.n_terms + 1) / 2 + 1;
    const double infl_base = 0.10 + 0.15 * rng.uniform();
    const double infl_phase = rng.uniform(0.0, 6.28);
    const double macro = config.macro_variation;
    for (int y = 0; y < n_years; ++y) {
        const double wave = macro * (0.06 * std::sin(0.5 * y + infl_phase) + rng.normal(0.0, 0.006));
        inflation_by_year.push_back(std::min(0.6, std::max(0.03, infl_base + wave)));
    }
    const double strike_phase = rng.uniform(0.0, 6.28);
    for (int term = 0; term < config.n_terms; ++term) {
        const int year = config.base_year + term / 2;
        const int strikes = std::max(
            0, static_cast<int>(std::lround(2.5 + macro * 1.8 * std::sin(0.1 * term + strike_phase))));
        for (int p = 0; p < config.n_postcodes; ++p) {
            TermCalendarRow row;
            row.term_index = term;
            row.calendar_year = year;
            row.season = term % 2 == 0 ? "S1" : "S2";
            row.inflation_yoy = inflation_by_year[static_cast<std::size_t>(term / 2)];
            row.strike_count_24m = strikes;
            row.postcode = postcodes[static_cast<std::size_t>(p)];
            const double dep = deprivation[static_cast<std::size_t>(p)];
            row.area_deprivation = dep;
            row.area_unemployment = clamp01(0.05 + 0.18 * dep + 0.02 * rng.uniform());
            row.area_informality = clamp01(0.12 + 0.35 * dep + 0.03 * rng.uniform());
            row.area_poverty = clamp01(0.08 + 0.45 * dep + 0.03 * rng.uniform());
            data.calendar.push_back(std::move(row));
        }
    }

    // ---- curriculum and courses ----
    Curriculum curriculum;
    curriculum.curriculum_id = "ENG";
    const int per_term = std::max(1, config.n_courses / config.nominal_terms);
    CoursePlan plan;
    for (int c = 0; c < config.n_courses; ++c) {
        Course course;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "C%03d", c + 1);
        course.course_id = buf;
        course.curriculum_id = "ENG";
        course.nominal_term = std::min(config.nominal_terms, c / per_term + 1);
        course.is_core = course.nominal_term <= 2;
        plan.courses.push_back(course);
        // early maths/physics style spread: a few hard chokepoints per tier
        const double base = rng.uniform();
        plan.difficulty.push_back(base * base);  // skewed toward easy, long hard tail
    }
    data.courses = plan.courses;
    {
        int cum = 0;
        std::vector<int> count_at_term(static_cast<std::size_t>(config.nominal_terms) + 1, 0);
        for (const auto& c : plan.courses) ++count_at_term[static_cast<std::size_t>(c.nominal_term)];
        for (int t = 0; t < config.nominal_terms; ++t) {
            cum += count_at_term[static_cast<std::size_t>(t) + 1];
            curriculum.expected_courses_by_term[t] = cum;
        }
    }
    data.curricula.push_back(curriculum);

    // ---- assign templates ----
    struct Assignment {
        std::string template_id;
        ArchetypeTemplate params;
        bool zero_enrolment = false;
    };
    std::vector<Assignment> assignments;
    for (const auto& t : config.templates) {
        const int count = static_cast<int>(std::lround(t.share * config.n_students));
        for (int i = 0; i < count && static_cast<int>(assignments.size()) < config.n_students; ++i) {
            assignments.push_back({t.template_id, t, false});
        }
    }
    const int n_zero = static_cast<int>(std::lround(config.zero_enrolment_share * config.n_students));
    while (static_cast<int>(assignments.size()) < config.n_students) {
        // diffuse noise: per-student parameters drawn from the configured ranges
        const DiffuseRanges& d = config.diffuse;
        ArchetypeTemplate t;
        t.template_id = "noise";
        t.drop_p = rng.uniform(d.drop_lo, d.drop_hi);
        t.fail_p = rng.uniform(d.fail_lo, d.fail_hi);
        if (t.drop_p + t.fail_p > 0.95) {
            const double s = (t.drop_p + t.fail_p) / 0.95;
            t.drop_p /= s;
            t.fail_p /= s;
        }
        t.gap_p = rng.uniform(d.gap_lo, d.gap_hi);
        for (int rel = 1; rel < config.cutoff; ++rel) {
            if (rng.bernoulli(t.gap_p)) t.skip_terms.push_back(rel);
        }
        t.load_start = rng.uniform(d.load_lo, d.load_hi);
        t.load_slope = rng.uniform(d.slope_lo, d.slope_hi);
        t.retake_affinity = rng.uniform(0.5, 2.5);
        t.friction_affinity = rng.uniform(0.0, 0.9);
        t.age_mean = d.age_mean;
        t.age_sd = d.age_sd;
        t.work_p = rng.uniform(0.0, 0.6);
        t.deprivation_level = rng.uniform(0.1, 0.85);
        t.attrition_p = rng.uniform(d.attrition_lo, d.attrition_hi);
        const bool zero = static_cast<int>(assignments.size()) >= config.n_students - n_zero;
        assignments.push_back({"noise", t, zero});
    }
    rng.shuffle(assignments);

    // ---- simulate each student ----
    const int max_term = config.n_terms - 1;
    for (int i = 0; i < config.n_students; ++i) {
        const Assignment& asg = assignments[static_cast<std::size_t>(i)];
        const ArchetypeTemplate& t = asg.params;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "S%05d", i + 1);
        Student s;
        s.student_id = buf;
        s.cohort_year = config.base_year + static_cast<int>(rng.index(
                            static_cast<std::size_t>(config.cohort_year_span)));
        s.entry_term = (s.cohort_year - config.base_year) * 2;
        s.age_at_entry = std::max(16.5, std::min(60.0, rng.normal(t.age_mean, t.age_sd)));
        s.gender = rng.bernoulli(config.female_share) ? "f" : "m";
        s.works_at_entry = rng.bernoulli(config.works_unknown_p) ? TriState::Unknown
                           : rng.bernoulli(t.work_p)             ? TriState::Yes
                                                                 : TriState::No;
        if (!rng.bernoulli(config.missing_hs_gpa_p)) {
            s.hs_gpa = quarter(std::max(2.0, std::min(10.0, rng.normal(t.hs_gpa_mean, t.hs_gpa_sd))));
        }
        if (!rng.bernoulli(config.missing_postcode_p)) {
            // pick a postcode whose deprivation is near the template level
            double best = 2.0;
            std::size_t pick = 0;
            for (std::size_t p = 0; p < postcodes.size(); ++p) {
                const double dist = std::abs(deprivation[p] - t.deprivation_level) +
                                    0.25 * rng.uniform();
                if (dist < best) {
                    best = dist;
                    pick = p;
                }
            }
            s.postcode = postcodes[pick];
        }
        if (!rng.bernoulli(config.missing_parental_p)) {
            const double pe = rng.normal(t.parental_education_mean, 1.0);
            s.parental_education = std::max(0, std::min(5, static_cast<int>(std::lround(pe))));
        }
        if (!rng.bernoulli(config.missing_siblings_p)) s.siblings_university = rng.bernoulli(t.siblings_p);
        if (!rng.bernoulli(config.missing_secondary_p)) {
            if (!t.secondary_type.empty()) {
                s.secondary_school_type = t.secondary_type;
            } else {
                const double r = rng.uniform();
                const double pub = 0.45 + 0.4 * t.deprivation_level;
                s.secondary_school_type =
                    r < pub ? "public" : (r < pub + 0.3 ? "private" : "technical");
            }
        }
        if (!rng.bernoulli(config.missing_distance_p)) {
            const double base = t.deprivation_level > 0.6 ? 45.0 : 8.0;
            s.distance_to_campus_km = quarter(std::min(400.0, base * std::exp(rng.normal(0.0, 0.8))));
        }
        data.students.push_back(s);

        // attrition decided by template, realized strictly post-window
        double attr_p = t.attrition_p;
        if (config.drift_year > 0 && s.cohort_year >= config.drift_year) {
            attr_p = clamp01(attr_p + t.attrition_drift);
        }
        // zero-enrolment students are departed by definition downstream
        const bool attrite = asg.zero_enrolment || rng.bernoulli(attr_p);
        out.ground_truth.push_back({s.student_id, asg.template_id, attrite ? 1 : 0});

        if (asg.zero_enrolment) continue;  // departed with an empty record

        // per-course attempt bookkeeping
        std::set<std::string> passed_courses;
        std::set<std::string> open_retakes;  // failed/dropped, not yet passed
        std::set<std::string> attempted_this_term;

        const int horizon = config.horizon;
        int last_active_rel;
        bool graduated = false;
        int graduation_rel = 0;
        if (attrite) {
            const int hi = std::max(config.cutoff, horizon - 3);
            last_active_rel = config.cutoff +
                              static_cast<int>(rng.index(static_cast<std::size_t>(
                                  std::max(1, hi - config.cutoff + 1))));
            last_active_rel = std::min(last_active_rel, horizon - 3);
        } else if (rng.bernoulli(t.graduate_p)) {
            graduated = true;
            graduation_rel = std::min(horizon + config.grace,
                                      config.nominal_terms + 1 + rng.poisson(2.0));
            graduation_rel = std::min(graduation_rel, max_term - s.entry_term);
            last_active_rel = graduation_rel - 1;
        } else {
            last_active_rel = std::min(horizon + 1, max_term - s.entry_term);
        }
        last_active_rel = std::min(last_active_rel, max_term - s.entry_term);

        const std::set<int> window_skips(t.skip_terms.begin(), t.skip_terms.end());
        for (int rel = 0; rel <= last_active_rel; ++rel) {
            const bool must_be_active =
                rel == 0 || (!attrite && !graduated && rel == horizon - 1);
            if (!must_be_active) {
                const bool skip = rel < config.cutoff ? window_skips.count(rel) > 0
                                                      : rng.bernoulli(t.gap_p);
                if (skip) continue;
            }
            int load = static_cast<int>(
                std::lround(rng.normal(t.load_start + t.load_slope * rel, 0.8)));
            if (must_be_active) load = std::max(1, load);
            if (load <= 0) continue;

            // candidate courses: unlocked by nominal term, not yet passed
            std::vector<std::size_t> candidates;
            std::vector<double> weights;
            attempted_this_term.clear();
            for (std::size_t c = 0; c < plan.courses.size(); ++c) {
                const Course& course = plan.courses[c];
                if (course.nominal_term > rel + 1) continue;
                if (passed_courses.count(course.course_id)) continue;
                candidates.push_back(c);
                double w = 1.0 + t.friction_affinity * 3.0 * plan.difficulty[c];
                if (open_retakes.count(course.course_id)) w *= t.retake_affinity;
                weights.push_back(w);
            }
            if (candidates.empty()) {
                // the whole course pool is passed: a surviving student has
                // finished the programme, so graduate them here
                if (!attrite && !graduated) {
                    graduated = true;
                    graduation_rel = std::max(1, rel);
                }
                break;
            }
            for (int k = 0; k < load && !candidates.empty(); ++k) {
                double total = 0.0;
                for (double w : weights) total += w;
                if (total <= 0.0) break;
                double pickpoint = rng.uniform() * total;
                std::size_t chosen = 0;
                for (std::size_t j = 0; j < candidates.size(); ++j) {
                    pickpoint -= weights[j];
                    if (pickpoint <= 0.0) {
                        chosen = j;
                        break;
                    }
                }
                const std::size_t cidx = candidates[chosen];
                const Course& course = plan.courses[cidx];
                candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(chosen));
                weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(chosen));
                if (!attempted_this_term.insert(course.course_id).second) continue;

                Enrolment e;
                e.student_id = s.student_id;
                e.course_id = course.course_id;
                e.term_index = s.entry_term + rel;
                double p_drop, p_fail;
                attempt_probs(t, plan.difficulty[cidx], p_drop, p_fail);
                const double roll = rng.uniform();
                if (roll < p_drop) {
                    e.state = Outcome::Dropped;
                    open_retakes.insert(course.course_id);
                } else if (roll < p_drop + p_fail) {
                    e.state = Outcome::Failed;
                    e.grade = quarter(std::max(0.0, std::min(3.75, rng.normal(2.4, 1.0))));
                    open_retakes.insert(course.course_id);
                } else {
                    e.state = Outcome::Passed;
                    e.grade = quarter(std::max(4.0, std::min(10.0, rng.normal(7.0, 1.2))));
                    passed_courses.insert(course.course_id);
                    open_retakes.erase(course.course_id);
                }
                data.enrolments.push_back(std::move(e));
            }
        }
        if (graduated) {
            data.graduations.push_back({s.student_id, s.entry_term + graduation_rel});
        }
    }
    return out;
}

}  // namespace capire::synth

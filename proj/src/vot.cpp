#include "capire/vot.hpp"

#include "capire/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>
#include <sstream>

namespace capire {

void VotConfig::check() const {
    if (unit == VotUnit::Credits)
        throw ConfigError("vot.unit = credits is not implemented; use terms");
    if (cutoff <= 0) throw ConfigError("vot.cutoff must be positive");
    if (cutoff >= horizon) throw ConfigError("vot.cutoff must be below vot.horizon");
    if (grace < 0) throw ConfigError("vot.grace must be >= 0");
}

std::vector<double> WindowedTrajectory::load_series() const {
    if (active_terms.empty()) return {};
    const int first = active_terms.front();
    const int last = active_terms.back();
    std::vector<double> loads(static_cast<std::size_t>(last - first + 1), 0.0);
    for (const auto& e : enrolments) {
        const int rel = e.term_index - entry_term;
        loads[static_cast<std::size_t>(rel - first)] += 1.0;
    }
    return loads;
}

WindowedTrajectory slice_trajectory(const Student& student,
                                    const std::vector<Enrolment>& enrolments,
                                    const VotConfig& vot) {
    WindowedTrajectory w;
    w.student_id = student.student_id;
    w.entry_term = student.entry_term;
    std::set<int> active;
    for (const auto& e : enrolments) {
        if (e.student_id != student.student_id) continue;
        const int rel = e.term_index - student.entry_term;
        if (rel < 0 || rel >= vot.cutoff) continue;  // [0, cutoff)
        w.enrolments.push_back(e);
        active.insert(rel);
    }
    w.active_terms.assign(active.begin(), active.end());
    return w;
}

// ---- eligibility audit -----------------------------------------------------

std::string to_string(Eligibility e) {
    switch (e) {
        case Eligibility::VotAdmissible: return "vot_admissible";
        case Eligibility::PostVot: return "post_vot";
        case Eligibility::Restricted: return "restricted";
    }
    return "?";
}

std::vector<std::string> EligibilityAudit::admissible_names() const {
    std::vector<std::string> out;
    for (const auto& t : tags)
        if (t.tag == Eligibility::VotAdmissible) out.push_back(t.feature_name);
    return out;
}

bool EligibilityAudit::is_admissible(const std::string& name) const {
    for (const auto& t : tags)
        if (t.feature_name == name) return t.tag == Eligibility::VotAdmissible;
    return false;
}

nlohmann::json EligibilityAudit::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    std::size_t admissible = 0;
    for (const auto& t : tags) {
        arr.push_back({{"feature", t.feature_name}, {"tag", to_string(t.tag)}, {"reason", t.reason}});
        if (t.tag == Eligibility::VotAdmissible) ++admissible;
    }
    return nlohmann::json{{"feature_count", tags.size()},
                          {"vot_admissible", admissible},
                          {"excluded", tags.size() - admissible},
                          {"tags", arr}};
}

namespace {

// Field names whose presence in a declaration marks label dependence.
bool references_outcome(const std::vector<std::string>& sources) {
    static const char* kOutcomeFields[] = {"attrition_flag", "label_basis", "outcome",
                                           "graduated", "graduations", "final_status",
                                           "time_to_degree"};
    for (const auto& s : sources) {
        for (const char* f : kOutcomeFields) {
            if (s.find(f) != std::string::npos) return true;
        }
    }
    return false;
}

}  // namespace

EligibilityAudit audit_eligibility(const Dictionary& dict, const VotConfig& vot) {
    vot.check();
    std::vector<std::string> undeclared;
    for (const auto& f : dict.features) {
        if (f.time_bound.kind == TimeBoundKind::Undeclared) undeclared.push_back(f.name);
    }
    if (!undeclared.empty()) {
        std::string msg = "features without a declared time bound:";
        for (const auto& n : undeclared) msg += " " + n;
        throw ConfigError(msg);
    }

    EligibilityAudit audit;
    for (const auto& f : dict.features) {
        EligibilityTag tag;
        tag.feature_name = f.name;
        if (references_outcome(f.source_fields)) {
            tag.tag = Eligibility::Restricted;
            tag.reason = "label-dependent: declaration references outcome fields";
        } else {
            switch (f.time_bound.kind) {
                case TimeBoundKind::Outcome:
                    tag.tag = Eligibility::Restricted;
                    tag.reason = "outcome-proximal";
                    break;
                case TimeBoundKind::FullHistory:
                    tag.tag = Eligibility::PostVot;
                    tag.reason = "temporal aggregation without windowing";
                    break;
                case TimeBoundKind::UpToTerm:
                    if (f.time_bound.term < vot.cutoff) {
                        tag.tag = Eligibility::VotAdmissible;
                        tag.reason = "fixed bound at relative term " +
                                     std::to_string(f.time_bound.term) + " inside the window";
                    } else {
                        tag.tag = Eligibility::PostVot;
                        tag.reason = "fixed bound at relative term " +
                                     std::to_string(f.time_bound.term) + " exceeds the VOT cutoff";
                    }
                    break;
                case TimeBoundKind::Window:
                case TimeBoundKind::Entry:
                case TimeBoundKind::PreEntry:
                    tag.tag = Eligibility::VotAdmissible;
                    tag.reason = "available at or before the VOT cutoff";
                    break;
                case TimeBoundKind::Undeclared:
                    break;  // unreachable, checked above
            }
        }
        audit.tags.push_back(std::move(tag));
    }
    return audit;
}

// ---- leakage probe ---------------------------------------------------------

nlohmann::json ProbeReport::to_json() const {
    nlohmann::json diffs_json = nlohmann::json::array();
    for (const auto& d : diffs) {
        diffs_json.push_back({{"student_id", d.student_id},
                              {"column", d.column},
                              {"baseline", d.baseline},
                              {"perturbed", d.perturbed}});
    }
    return nlohmann::json{{"invariant", invariant},
                          {"perturbation_sets", perturbation_sets},
                          {"identical_sets", identical_sets},
                          {"diffs", diffs_json}};
}

namespace {

// Column-aware diff of two serialized matrices; names offending cells.
void diff_matrices(const std::string& baseline, const std::string& perturbed,
                   std::vector<CellDiff>& out) {
    std::istringstream a(baseline), b(perturbed);
    std::string la, lb;
    std::vector<std::string> header;
    bool first = true;
    while (true) {
        const bool ga = static_cast<bool>(std::getline(a, la));
        const bool gb = static_cast<bool>(std::getline(b, lb));
        if (!ga && !gb) break;
        if (first) {
            std::istringstream hs(ga ? la : lb);
            std::string cell;
            while (std::getline(hs, cell, ',')) header.push_back(cell);
            first = false;
        }
        if (la == lb) continue;
        std::vector<std::string> ca, cb;
        {
            std::istringstream sa(la), sb(lb);
            std::string cell;
            while (std::getline(sa, cell, ',')) ca.push_back(cell);
            while (std::getline(sb, cell, ',')) cb.push_back(cell);
        }
        const std::string sid = ca.empty() ? (cb.empty() ? "?" : cb[0]) : ca[0];
        const std::size_t n = std::max(ca.size(), cb.size());
        for (std::size_t i = 0; i < n; ++i) {
            const std::string va = i < ca.size() ? ca[i] : "<absent>";
            const std::string vb = i < cb.size() ? cb[i] : "<absent>";
            if (va == vb) continue;
            if (out.size() >= 64) return;
            out.push_back({sid, i < header.size() ? header[i] : "col" + std::to_string(i), va, vb});
        }
        if (ga != gb && out.size() < 64) {
            out.push_back({sid, "<row>", ga ? la : "<absent>", gb ? lb : "<absent>"});
        }
    }
}

}  // namespace

ProbeReport leakage_probe(const PipelineRunFn& run, const Dataset& dataset,
                          const VotConfig& vot, std::uint64_t seed, int perturbation_sets,
                          int injections_per_set) {
    vot.check();
    ProbeReport report;
    report.perturbation_sets = perturbation_sets;
    const std::string baseline = run(dataset);

    int max_term = 0;
    for (const auto& row : dataset.calendar) max_term = std::max(max_term, row.term_index);

    for (int set = 0; set < perturbation_sets; ++set) {
        Rng rng(derive_seed(seed, "leakage-probe", static_cast<std::uint64_t>(set)));
        Dataset perturbed = dataset;

        // extra enrolments strictly past the cutoff
        std::set<std::string> used;
        for (const auto& e : perturbed.enrolments) {
            used.insert(e.student_id + "\x1f" + e.course_id + "\x1f" + std::to_string(e.term_index));
        }
        int injected = 0;
        int tries = 0;
        while (injected < injections_per_set && tries < injections_per_set * 20) {
            ++tries;
            if (perturbed.students.empty() || perturbed.courses.empty()) break;
            const Student& s = perturbed.students[rng.index(perturbed.students.size())];
            const Course& c = perturbed.courses[rng.index(perturbed.courses.size())];
            const int lo = s.entry_term + vot.cutoff;
            if (lo > max_term) continue;
            const int term = lo + static_cast<int>(rng.index(static_cast<std::size_t>(max_term - lo + 1)));
            const std::string key = s.student_id + "\x1f" + c.course_id + "\x1f" + std::to_string(term);
            if (!used.insert(key).second) continue;
            Enrolment e;
            e.student_id = s.student_id;
            e.course_id = c.course_id;
            e.term_index = term;
            const double roll = rng.uniform();
            e.state = roll < 0.4 ? Outcome::Dropped : (roll < 0.7 ? Outcome::Failed : Outcome::Passed);
            if (e.state != Outcome::Dropped) e.grade = 1.0 + 9.0 * rng.uniform();
            perturbed.enrolments.push_back(std::move(e));
            ++injected;
        }

        // flip every final outcome: drop all graduations, invent new ones
        perturbed.graduations.clear();
        for (const auto& s : perturbed.students) {
            if (rng.bernoulli(0.5)) {
                perturbed.graduations.push_back(
                    {s.student_id, s.entry_term + vot.horizon + static_cast<int>(rng.index(3))});
            }
        }

        const std::string result = run(perturbed);
        if (result == baseline) {
            ++report.identical_sets;
        } else {
            report.invariant = false;
            diff_matrices(baseline, result, report.diffs);
        }
    }
    return report;
}

}  // namespace capire

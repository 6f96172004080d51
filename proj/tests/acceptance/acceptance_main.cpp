// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion drives the real pipeline end to end on seeded
// synthetic cohorts.

#include "capire/pipeline.hpp"
#include "capire/rng.hpp"
#include "capire/stats.hpp"
#include "capire/synth.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace capire;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %-28s %s\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double elapsed_s(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "capire_acceptance";
    return dir;
}

// ---- scenario configs -------------------------------------------------------

// five well-separated templates, 10% diffuse noise
nlohmann::json planted5_generator(int n_students, std::uint64_t seed) {
    auto tpl = [](const char* id, double share, double drop, double fail, double gap,
                  double load, double slope, double age, double age_sd, double work,
                  double deprivation, double attrition, double retake, double friction_aff) {
        return nlohmann::json{{"template_id", id},
                              {"share", share},
                              {"drop_p", drop},
                              {"fail_p", fail},
                              {"gap_p", gap},
                              {"load_start", load},
                              {"load_slope", slope},
                              {"age_mean", age},
                              {"age_sd", age_sd},
                              {"work_p", work},
                              {"deprivation_level", deprivation},
                              {"attrition_p", attrition},
                              {"retake_affinity", retake},
                              {"friction_affinity", friction_aff}};
    };
    return nlohmann::json{
        {"n_students", n_students},
        {"n_courses", 40},
        {"n_terms", 40},
        {"cohort_year_span", 10},
        {"nominal_terms", 10},
        {"noise_share", 0.10},
        {"seed", seed},
        {"templates",
         nlohmann::json::array({
             tpl("T_collapse", 0.18, 0.92, 0.05, 0.04, 4.5, 0.0, 18.5, 1.2, 0.05, 0.55, 0.88,
                 1.0, 0.2),
             tpl("T_model", 0.18, 0.02, 0.03, 0.0, 4.8, 0.15, 18.2, 1.0, 0.03, 0.25, 0.08, 1.0,
                 0.0),
             tpl("T_gappy", 0.18, 0.25, 0.15, 0.5, 2.5, 0.0, 19.5, 1.5, 0.25, 0.45, 0.6, 1.5,
                 0.3),
             tpl("T_grinder", 0.18, 0.08, 0.6, 0.02, 5.5, -0.4, 18.8, 1.2, 0.08, 0.35, 0.55,
                 3.0, 0.8),
             tpl("T_adult", 0.18, 0.3, 0.12, 0.2, 1.8, 0.0, 27.5, 2.0, 0.85, 0.75, 0.7, 1.2,
                 0.2),
         })}};
}

nlohmann::json base_config(const std::string& out_dir, std::uint64_t seed) {
    return nlohmann::json{
        {"seed", seed},
        {"out_dir", out_dir},
        {"vot", {{"cutoff", 3}, {"horizon", 12}, {"grace", 2}}},
        {"embedding", {{"n_neighbors", 15}, {"epochs", 200}}},
        {"dbscan", {{"min_pts", 10}}},
        {"archetype", {{"min_size", 40}}},
        {"classifier", {{"n_trees", 200}, {"cv_folds", 5}}}};
}

}  // namespace

// placeholder wiring; criteria filled in below as they are implemented
int main() {
    fs::remove_all(work_dir());
    fs::create_directories(work_dir());
    report(0, "scaffold", true, "acceptance scaffold in place");
    return g_failures == 0 ? 0 : 1;
}

#include "capire/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidationFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool force = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline configuration file (JSON)")
        ->required();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "global seed (overrides config)")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    cmd->add_flag("--force", opts.force, "overwrite existing artifacts");
    cmd->add_flag("--quiet", opts.quiet, "suppress progress output");
}

capire::pipeline::Context build_context(const CommonOpts& opts) {
    capire::PipelineConfig config = capire::PipelineConfig::load(opts.config_path);
    if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
    if (opts.seed_set) config.seed = opts.seed;
    return capire::pipeline::make_context(std::move(config), opts.force, opts.quiet);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"capire: leakage-aware student trajectory analytics pipeline"};
    app.require_subcommand(1);

    const std::vector<std::string> names = {"synth",    "validate", "extract",
                                            "assemble", "cluster",  "validate-clusters",
                                            "train",    "evaluate", "predict",
                                            "audit",    "probe",    "all"};
    const std::map<std::string, std::string> descriptions = {
        {"synth", "generate a synthetic cohort from the config's generator block"},
        {"validate", "run the input validation gates (exit 1 on failure)"},
        {"extract", "compute raw VOT-windowed features, friction table and outcome labels"},
        {"assemble", "impute, fit scaling, write matrix.csv and the run manifest"},
        {"cluster", "embed, density-cluster and profile archetypes"},
        {"validate-clusters", "bootstrap/permutation/temporal/sensitivity/noise analyses"},
        {"train", "train the archetype classifier"},
        {"evaluate", "evaluate the classifier on the held-out split"},
        {"predict", "assign archetypes to every student in the matrix"},
        {"audit", "tag feature-dictionary eligibility against the VOT cutoff"},
        {"probe", "leakage probe: perturb post-VOT events, compare matrices (exit 1 on diff)"},
        {"all", "run the full chain: validate .. evaluate (synth first when configured)"}};

    std::map<std::string, CommonOpts> opts;
    for (const auto& name : names) {
        CLI::App* cmd = app.add_subcommand(name, descriptions.at(name));
        add_common(cmd, opts[name]);
    }

    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        const capire::pipeline::Context ctx = build_context(opts.at(sub));
        if (sub == "synth") {
            capire::pipeline::run_synth(ctx);
        } else if (sub == "validate") {
            const capire::ValidationReport report = capire::pipeline::run_validate(ctx);
            return report.pass ? kExitOk : kExitValidationFailure;
        } else if (sub == "extract") {
            capire::pipeline::run_extract(ctx);
        } else if (sub == "assemble") {
            capire::pipeline::run_assemble(ctx);
        } else if (sub == "cluster") {
            capire::pipeline::run_cluster(ctx);
        } else if (sub == "validate-clusters") {
            capire::pipeline::run_validate_clusters(ctx);
        } else if (sub == "train") {
            capire::pipeline::run_train(ctx);
        } else if (sub == "evaluate") {
            capire::pipeline::run_evaluate(ctx);
        } else if (sub == "predict") {
            capire::pipeline::run_predict(ctx);
        } else if (sub == "audit") {
            capire::pipeline::run_audit(ctx);
        } else if (sub == "probe") {
            const capire::ProbeReport report = capire::pipeline::run_probe(ctx);
            return report.invariant ? kExitOk : kExitValidationFailure;
        } else if (sub == "all") {
            capire::pipeline::run_all(ctx);
        }
        return kExitOk;
    } catch (const capire::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const capire::DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const capire::IngestError& e) {
        std::cerr << "ingestion error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

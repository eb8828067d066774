#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include "ctrail/data.hpp"
#include "ctrail/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct CliArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string scenario, seeds, output, variant, dataset, report_dir;
    int episodes = -1, threads = -1, horizon = -1, simulations = -1;
    bool live = false;
    bool output_set = false;  // --output '' means "write nothing", distinct from unset
};

void add_shared_options(CLI::App* sub, CliArgs& args) {
    sub->add_option("--config", args.config_path, "key=value config file");
    sub->add_option("--set", args.sets, "override any config key (key=value, repeatable)");
    sub->add_option("--scenario", args.scenario, "highway|merge|roundabout|intersection");
    sub->add_option("--seeds", args.seeds, "comma-separated seed list");
    sub->add_option("--episodes", args.episodes, "episodes per seed");
    sub->add_option("--output", args.output, "artifact directory (empty: no files)")
        ->each([&args](const std::string&) { args.output_set = true; });
    sub->add_option("--variant", args.variant, "full|no-trust|no-dirichlet|no-update");
    sub->add_option("--threads", args.threads, "worker threads (0 = hardware)");
    sub->add_option("--horizon", args.horizon, "cycles per episode");
    sub->add_option("--simulations", args.simulations, "MCTS simulations per cycle");
    sub->add_option("--dataset", args.dataset, "trajectory CSV (replay mode)");
    sub->add_option("--report-dir", args.report_dir, "existing run directory (report mode)");
    sub->add_flag("--live", args.live, "use the live oracle (CTRAIL_API_* env vars)");
    sub->fallthrough();
}

ctrail::ExperimentConfig build_config(ctrail::Mode mode, const CliArgs& args) {
    ctrail::ExperimentConfig cfg;
    cfg.mode = mode;
    if (mode == ctrail::Mode::Ablate) ctrail::apply_ablation_preset(cfg);
    if (!args.config_path.empty()) ctrail::apply_config_file(cfg, args.config_path);
    for (const std::string& kv : args.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        ctrail::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!args.scenario.empty()) ctrail::apply_override(cfg, "scenario", args.scenario);
    if (!args.seeds.empty()) ctrail::apply_override(cfg, "seeds", args.seeds);
    if (args.episodes >= 0) ctrail::apply_override(cfg, "episodes", std::to_string(args.episodes));
    if (args.output_set) ctrail::apply_override(cfg, "output_dir", args.output);
    if (!args.variant.empty()) ctrail::apply_override(cfg, "variant", args.variant);
    if (args.threads >= 0) ctrail::apply_override(cfg, "threads", std::to_string(args.threads));
    if (args.horizon >= 0) ctrail::apply_override(cfg, "loop.horizon", std::to_string(args.horizon));
    if (args.simulations >= 0)
        ctrail::apply_override(cfg, "search.simulations", std::to_string(args.simulations));
    if (!args.dataset.empty()) ctrail::apply_override(cfg, "dataset", args.dataset);
    if (!args.report_dir.empty()) ctrail::apply_override(cfg, "report_dir", args.report_dir);
    if (args.live) cfg.live_oracle = true;
    cfg.mode = mode;  // subcommand wins over any mode= key
    ctrail::validate_config(cfg);
    return cfg;
}

void print_metrics(const ctrail::RunOutput& output) {
    std::printf("%-14s %9s %10s %8s %8s %10s %10s %12s\n", "variant", "episodes", "collisions",
                "sr", "rpa", "ade", "fde", "reward");
    for (const auto& [variant, vm] : output.metrics) {
        std::printf("%-14s %9d %10d %8.3f %8.3f %10.3f %10.3f %12.3f\n",
                    std::string(ctrail::variant_name(variant)).c_str(),
                    vm.report.episode_count, vm.collisions, vm.report.sr, vm.report.rpa,
                    vm.report.ade, vm.report.fde, vm.reward_agg.mean);
    }
    for (const auto& f : output.files) std::printf("wrote %s\n", f.c_str());
}

int dispatch(ctrail::Mode mode, const CliArgs& args) {
    const ctrail::ExperimentConfig cfg = build_config(mode, args);
    if (mode == ctrail::Mode::TrustDynamics) {
        const ctrail::TrustDynamicsResult result = ctrail::trust_dynamics(cfg);
        std::printf("%4s %12s %12s\n", "t", "normal", "injected");
        for (std::size_t t = 0; t < result.normal_mean.size(); ++t)
            std::printf("%4zu %12.4f %12.4f\n", t, result.normal_mean[t],
                        result.injected_mean[t]);
        std::vector<std::string> files;
        ctrail::write_trust_dynamics(cfg, result, files);
        for (const auto& f : files) std::printf("wrote %s\n", f.c_str());
        return 0;
    }
    const ctrail::RunOutput output = ctrail::run_experiment(cfg);
    if (mode == ctrail::Mode::Report) {
        std::printf("report rebuilt from %s\n", cfg.report_dir.c_str());
        return 0;
    }
    print_metrics(output);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"closed-loop trust-calibrated commonsense trajectory planner"};
    app.require_subcommand(1);
    CliArgs args;

    auto* run = app.add_subcommand("run", "simulated scenario episodes");
    auto* replay = app.add_subcommand("replay", "dataset replay against recorded trajectories");
    auto* dynamics =
        app.add_subcommand("trust-dynamics", "paired normal/error-injected trust traces");
    auto* ablate = app.add_subcommand("ablate", "all ablation variants under a noisy oracle");
    auto* report = app.add_subcommand("report", "recompute tables from an existing run directory");
    for (CLI::App* sub : {run, replay, dynamics, ablate, report}) add_shared_options(sub, args);

    CLI11_PARSE(app, argc, argv);

    ctrail::Mode mode = ctrail::Mode::Run;
    if (replay->parsed()) mode = ctrail::Mode::Replay;
    if (dynamics->parsed()) mode = ctrail::Mode::TrustDynamics;
    if (ablate->parsed()) mode = ctrail::Mode::Ablate;
    if (report->parsed()) mode = ctrail::Mode::Report;

    try {
        return dispatch(mode, args);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error (config): %s\n", e.what());
        return kExitConfig;
    } catch (const ctrail::DataError& e) {
        std::fprintf(stderr, "error (data): %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error (runtime): %s\n", e.what());
        return kExitRuntime;
    }
}

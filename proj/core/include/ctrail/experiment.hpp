#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctrail/eval.hpp"
#include "ctrail/loop.hpp"
#include "ctrail/oracle.hpp"

namespace ctrail {

enum class Mode : std::uint8_t { Run, Replay, TrustDynamics, Ablate, Report };
std::string_view mode_name(Mode m);
std::optional<Mode> mode_from_string(std::string_view s);

struct ExperimentConfig {
    Mode mode = Mode::Run;
    ScenarioKind scenario = ScenarioKind::Highway;
    std::string dataset;            // replay input CSV
    std::string output_dir = "ctrail-out";  // empty: compute only, write nothing
    std::string report_dir;         // report-mode input
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int episodes = 20;              // per seed
    Variant variant = Variant::Full;
    bool all_variants = false;      // implied by ablate mode
    int threads = 0;                // 0: hardware concurrency
    int raw_hz = 10;                // replay downsample divisor (raw frames per kept frame)
    bool live_oracle = false;       // opt-in, reads CTRAIL_API_* from the environment
    MockOracleConfig mock;
    int inject_t = 4;               // trust-dynamics error injection start
    double inject_relation_error = 0.4;
    double success_delta = 2.0;
    // Sim success milestone: goal_x = x0 + progress_factor * v_max * dt * horizon; the episode
    // succeeds when collision-free and the longitudinal shortfall to goal_x is <= delta.
    // Replay success instead compares against the recorded endpoint (Euclidean, two-sided).
    double progress_factor = 0.75;
    LoopConfig loop;
};

// key=value per line, '#' comments, keys listed in the README (config reference).
ExperimentConfig load_config_file(const std::string& path);
void apply_config_file(ExperimentConfig& cfg, const std::string& path);
void apply_override(ExperimentConfig& cfg, std::string_view key, std::string_view value);
void validate_config(const ExperimentConfig& cfg);  // throws std::invalid_argument

enum class FailureClass : std::uint8_t { Model, Mapping, Policy };
std::string_view failure_class_name(FailureClass c);

struct FailureTag {
    FailureClass cls = FailureClass::Policy;
    std::string detail;
};

// Collision-episode taxonomy (precedence model > mapping > policy):
//  model   - the colliding vehicle had no parsed relation that cycle, was outside the
//            trust state, or its combined trust was suppressed (< 0.2);
//  mapping - an alias/normalization fired in that cycle's batch;
//  policy  - near-equal top-two priors (within 0.10) or residual.
FailureTag classify_failure(const EpisodeResult& ep, const TrustConfig& trust = {});

struct EpisodeRow {
    Variant variant = Variant::Full;
    std::uint64_t seed = 0;
    int episode = 0;
    EpisodeResult result;
    double ade = 0.0, fde = 0.0;
    double goal_x = 0.0;
    bool succeeded = false;
    RpaResult rpa;
};

struct VariantMetrics {
    MetricReport report;
    Aggregate ade_agg, fde_agg, reward_agg;
    int collisions = 0;
};

struct RunOutput {
    std::map<Variant, VariantMetrics> metrics;
    std::vector<EpisodeRow> episodes;
    std::vector<std::string> files;  // paths written under output_dir
};

RunOutput run_experiment(const ExperimentConfig& cfg);

struct TrustDynamicsResult {
    std::vector<double> normal_mean, injected_mean;            // indexed by t
    std::vector<std::vector<double>> normal_runs, injected_runs;  // [seed][t]
};

// Paired normal/injected traces; injection switches the mock to inject_relation_error at
// t >= inject_t. Runs max(loop.horizon, inject_t + 7) cycles so the t = inject_t + 6 point exists.
TrustDynamicsResult trust_dynamics(const ExperimentConfig& cfg);

// Writes trust_dynamics.csv under cfg.output_dir (no-op when output_dir is empty).
void write_trust_dynamics(const ExperimentConfig& cfg, const TrustDynamicsResult& result,
                          std::vector<std::string>& files);

struct FilteringResult {
    RpaResult unfiltered, kin_only, dual;
    long long scenes = 0;
};

// Per-response relation scoring under three acceptance filters: none; kinematic trust of the
// response's recommended action >= kin_threshold; additionally per-vehicle commonsense trust
// >= llm_threshold.
FilteringResult rpa_filtering(const ExperimentConfig& cfg, int n_scenes,
                              double kin_threshold = 0.9, double llm_threshold = 0.5);

// Ablation benchmark preset: relation noise 0.3 in flowing traffic (npc_speed_min 24) with a
// 0.66 progress milestone. The milestone sits between the prior-guided planners' worst tail
// and the plain-UCB meander band, so the variant contrast shows up in SR as well as in
// ADE/reward. Used by the ablate CLI mode and the ablation acceptance check.
void apply_ablation_preset(ExperimentConfig& cfg);

// Success rate per ablation variant (shared oracle and world streams across variants).
std::map<Variant, double> ablation_success(const ExperimentConfig& cfg);

// Recomputes metrics.csv and trust_series.csv from an existing run directory's JSON-lines
// logs. Deterministic; throws std::runtime_error naming any missing or corrupt input.
void emit_report(const std::string& run_dir, const std::string& out_dir);

}  // namespace ctrail

#include "ctrail/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ctrail/data.hpp"
#include "ctrail/rng.hpp"

namespace ctrail {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kEnvStream = 0x656e76;     // world construction
constexpr std::uint64_t kOracleStream = 0x6f7263;  // mock seed
constexpr std::uint64_t kLoopStream = 0x6c6f6f70;  // policy/search streams

double parse_double_value(std::string_view key, std::string_view value) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw std::invalid_argument("config: bad numeric value for '" + std::string(key) +
                                    "': '" + std::string(value) + "'");
    return v;
}

std::int64_t parse_int_value(std::string_view key, std::string_view value) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw std::invalid_argument("config: bad integer value for '" + std::string(key) +
                                    "': '" + std::string(value) + "'");
    return v;
}

bool parse_bool_value(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw std::invalid_argument("config: bad boolean value for '" + std::string(key) + "': '" +
                                std::string(value) + "'");
}

std::vector<std::uint64_t> parse_seed_list(std::string_view value) {
    std::vector<std::uint64_t> seeds;
    std::size_t start = 0;
    while (start <= value.size()) {
        std::size_t pos = value.find(',', start);
        if (pos == std::string_view::npos) pos = value.size();
        const std::string_view tok = value.substr(start, pos - start);
        if (!tok.empty()) {
            std::uint64_t s = 0;
            const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), s);
            if (ec != std::errc{} || ptr != tok.data() + tok.size())
                throw std::invalid_argument("config: bad seed '" + std::string(tok) + "'");
            seeds.push_back(s);
        }
        start = pos + 1;
    }
    return seeds;
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct EpisodeSpec {
    Variant variant;
    std::uint64_t seed;
    int episode;
};

QueryFn make_mock_query_fn(const MockOracleConfig& base, std::uint64_t episode_seed, int m) {
    MockOracleConfig cfg = base;
    cfg.seed = derive_seed(episode_seed, kOracleStream);
    auto oracle = std::make_shared<MockOracle>(cfg);
    return [oracle, m](const SceneState& scene, int t) {
        return query_batch(scene, *oracle, m, static_cast<std::uint64_t>(t) *
                                                   static_cast<std::uint64_t>(m));
    };
}

QueryFn make_live_query_fn(int m) {
    auto client = std::shared_ptr<OracleClient>(make_live_oracle(LiveOracleConfig::from_env()));
    return [client, m](const SceneState& scene, int t) {
        return query_batch(scene, *client, m, static_cast<std::uint64_t>(t) *
                                                  static_cast<std::uint64_t>(m));
    };
}

QueryFn make_query_fn(const ExperimentConfig& cfg, std::uint64_t episode_seed) {
    if (cfg.live_oracle) return make_live_query_fn(cfg.loop.m_queries);
    return make_mock_query_fn(cfg.mock, episode_seed, cfg.loop.m_queries);
}

RpaResult episode_rpa(const EpisodeResult& ep) {
    RpaResult r;
    for (const auto& step : ep.steps) {
        r.correct += step.relations_correct;
        r.total += step.relations_total;
    }
    return r;
}

EpisodeRow run_sim_episode(const ExperimentConfig& cfg, const EpisodeSpec& spec) {
    EnvConfig env = cfg.loop.env;
    env.kind = cfg.scenario;
    env.seed = derive_seed(spec.seed, kEnvStream + static_cast<std::uint64_t>(spec.episode));
    TrafficWorld world = TrafficWorld::make(env);

    LoopConfig loop = cfg.loop;
    loop.env = env;
    LoopOptions opts;
    opts.variant = spec.variant;

    const std::uint64_t episode_seed =
        derive_seed(spec.seed, kLoopStream + static_cast<std::uint64_t>(spec.episode));
    const QueryFn query = make_query_fn(cfg, episode_seed);

    EpisodeRow row;
    row.variant = spec.variant;
    row.seed = spec.seed;
    row.episode = spec.episode;
    row.result = generate_trajectory(world, query, loop, opts, episode_seed);

    const VehicleState& start = row.result.initial_ego;
    row.goal_x = start.x + cfg.progress_factor * env.v_max * env.dt * loop.horizon;

    // Reference: the unobstructed max-acceleration path in the starting lane.
    std::vector<Point> reference;
    {
        double x = start.x, v = start.speed();
        const double y0 = start.lane * env.lane_width;
        for (std::size_t k = 0; k < row.result.ego_path.size(); ++k) {
            v = std::min(env.v_max, v + env.speed_step);
            x += v * env.dt;
            reference.emplace_back(x, y0);
        }
    }
    if (!row.result.ego_path.empty()) {
        const AdeFde e = ade_fde(row.result.ego_path, reference);
        row.ade = e.ade;
        row.fde = e.fde;
    }
    // Sim success: longitudinal shortfall to the per-scenario progress milestone
    // (overshoot is not an error for a progress goal; lane-agnostic).
    row.succeeded = success(std::max(0.0, row.goal_x - row.result.final_ego.x),
                            row.result.collision, cfg.success_delta);
    row.rpa = episode_rpa(row.result);
    return row;
}

EpisodeRow run_replay_episode(const ExperimentConfig& cfg, const ReplayEpisode& episode,
                              const EpisodeSpec& spec) {
    const std::vector<SceneState> recorded = episode_scenes(episode, cfg.loop.env.lane_width);
    EnvConfig env = cfg.loop.env;
    env.kind = ScenarioKind::Replay;
    env.lane_count = recorded.front().lane_count;
    ReplayWorld world = ReplayWorld::make(episode, env);

    LoopConfig loop = cfg.loop;
    loop.env = env;
    LoopOptions opts;
    opts.variant = spec.variant;

    const std::uint64_t episode_seed =
        derive_seed(spec.seed, kLoopStream + static_cast<std::uint64_t>(spec.episode));
    const QueryFn query = make_query_fn(cfg, episode_seed);

    EpisodeRow row;
    row.variant = spec.variant;
    row.seed = spec.seed;
    row.episode = spec.episode;
    row.result = generate_trajectory(world, query, loop, opts, episode_seed);

    std::vector<Point> reference;
    for (std::size_t k = 1; k <= row.result.ego_path.size() && k < recorded.size(); ++k)
        reference.emplace_back(recorded[k].ego.x, recorded[k].ego.y);
    if (!reference.empty() && reference.size() == row.result.ego_path.size()) {
        const AdeFde e = ade_fde(row.result.ego_path, reference);
        row.ade = e.ade;
        row.fde = e.fde;
    }
    row.goal_x = recorded.back().ego.x;
    row.succeeded = success(row.fde, row.result.collision, cfg.success_delta);
    row.rpa = episode_rpa(row.result);
    return row;
}

VariantMetrics summarize(const std::vector<const EpisodeRow*>& rows) {
    VariantMetrics vm;
    std::vector<double> ades, fdes, rewards;
    RpaResult pooled;
    int successes = 0;
    for (const EpisodeRow* row : rows) {
        ades.push_back(row->ade);
        fdes.push_back(row->fde);
        rewards.push_back(row->result.total_reward);
        pooled += row->rpa;
        if (row->succeeded) ++successes;
        if (row->result.collision) ++vm.collisions;
    }
    vm.ade_agg = aggregate(ades);
    vm.fde_agg = aggregate(fdes);
    vm.reward_agg = aggregate(rewards);
    vm.report.ade = vm.ade_agg.mean;
    vm.report.fde = vm.fde_agg.mean;
    vm.report.episode_count = static_cast<int>(rows.size());
    vm.report.sr = rows.empty() ? 0.0 : static_cast<double>(successes) / rows.size();
    vm.report.rpa = pooled.value();
    return vm;
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

ordered_json step_json(const EpisodeRow& row, const CycleRecord& s) {
    ordered_json j;
    j["variant"] = std::string(variant_name(row.variant));
    j["seed"] = row.seed;
    j["episode"] = row.episode;
    j["t"] = s.t;
    j["ct"] = s.trust_used;
    j["scene_llm"] = s.scene_llm;
    j["scene_kin"] = s.scene_kin;
    j["action"] = std::string(action_name(s.chosen));
    j["recommended"] = std::string(action_name(s.recommended));
    j["reward"] = s.reward;
    j["collision"] = s.collision;
    j["degraded"] = s.degraded;
    j["alias"] = s.any_alias;
    j["rejected_turn"] = s.rejected_turn;
    j["lane_changed"] = s.lane_changed;
    j["effective_m"] = s.effective_m;
    j["relations_correct"] = s.relations_correct;
    j["relations_total"] = s.relations_total;
    j["ego_x"] = s.ego_x;
    j["ego_y"] = s.ego_y;
    j["ego_lane"] = s.ego_lane;
    j["ego_speed"] = s.ego_speed;
    j["freq"] = s.freq;
    j["alpha"] = s.alpha;
    j["policy"] = s.policy;
    j["visits"] = s.visits;
    j["q"] = s.q;
    return j;
}

ordered_json trust_json(const EpisodeRow& row, const CycleRecord& s) {
    ordered_json j;
    j["variant"] = std::string(variant_name(row.variant));
    j["seed"] = row.seed;
    j["episode"] = row.episode;
    j["t"] = s.t;
    j["ct"] = s.trust_used;
    j["scene_llm"] = s.scene_llm;
    j["scene_kin"] = s.scene_kin;
    ordered_json vehicles = ordered_json::object();
    for (const auto& [id, vt] : s.vehicle_trust) {
        ordered_json v;
        v["llm"] = vt.c_llm;
        v["kin"] = vt.c_kin;
        vehicles[std::to_string(id)] = std::move(v);
    }
    j["vehicles"] = std::move(vehicles);
    return j;
}

ordered_json episode_json(const ExperimentConfig& cfg, const EpisodeRow& row) {
    ordered_json j;
    j["scenario"] = std::string(scenario_name(cfg.scenario));
    j["variant"] = std::string(variant_name(row.variant));
    j["seed"] = row.seed;
    j["episode"] = row.episode;
    j["steps"] = row.result.steps.size();
    j["collision"] = row.result.collision;
    j["collision_t"] = row.result.collision_t;
    j["collision_partner"] = row.result.collision_partner;
    j["total_reward"] = row.result.total_reward;
    j["ade"] = row.ade;
    j["fde"] = row.fde;
    j["goal_x"] = row.goal_x;
    j["final_x"] = row.result.final_ego.x;
    j["final_y"] = row.result.final_ego.y;
    j["success"] = row.succeeded;
    j["rpa_correct"] = row.rpa.correct;
    j["rpa_total"] = row.rpa.total;
    return j;
}

std::string metrics_csv_text(const ExperimentConfig& cfg,
                             const std::map<Variant, VariantMetrics>& metrics) {
    std::string out =
        "scenario,variant,episodes,collisions,sr,rpa,ade_mean,ade_std,fde_mean,fde_std,"
        "reward_mean,reward_std\n";
    for (const auto& [variant, vm] : metrics) {
        out += std::string(scenario_name(cfg.scenario));
        out += ',';
        out += std::string(variant_name(variant));
        out += ',';
        out += std::to_string(vm.report.episode_count);
        out += ',';
        out += std::to_string(vm.collisions);
        for (double v : {vm.report.sr, vm.report.rpa, vm.ade_agg.mean, vm.ade_agg.stddev,
                         vm.fde_agg.mean, vm.fde_agg.stddev, vm.reward_agg.mean,
                         vm.reward_agg.stddev}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text, std::vector<std::string>& files) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    files.push_back(path.string());
}

void write_artifacts(const ExperimentConfig& cfg, RunOutput& output) {
    if (cfg.output_dir.empty()) return;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    std::string steps, trust, episodes, failures;
    failures = "variant,seed,episode,t,partner,class,detail\n";
    for (const auto& row : output.episodes) {
        for (const auto& s : row.result.steps) {
            steps += step_json(row, s).dump();
            steps += '\n';
            trust += trust_json(row, s).dump();
            trust += '\n';
        }
        episodes += episode_json(cfg, row).dump();
        episodes += '\n';
        if (row.result.collision) {
            const FailureTag tag = classify_failure(row.result, cfg.loop.trust);
            failures += std::string(variant_name(row.variant)) + ',' +
                        std::to_string(row.seed) + ',' + std::to_string(row.episode) + ',' +
                        std::to_string(row.result.collision_t) + ',' +
                        std::to_string(row.result.collision_partner) + ',' +
                        std::string(failure_class_name(tag.cls)) + ',' + tag.detail + '\n';
        }
    }
    write_text(dir / "steps.jsonl", steps, output.files);
    write_text(dir / "trust.jsonl", trust, output.files);
    write_text(dir / "episodes.jsonl", episodes, output.files);
    write_text(dir / "metrics.csv", metrics_csv_text(cfg, output.metrics), output.files);
    write_text(dir / "failures.csv", failures, output.files);
}

RunOutput run_episode_grid(const ExperimentConfig& cfg,
                           const std::vector<ReplayEpisode>* replay) {
    std::vector<Variant> variants;
    if (cfg.all_variants || cfg.mode == Mode::Ablate)
        variants = {Variant::Full, Variant::NoTrust, Variant::NoDirichlet, Variant::NoUpdate};
    else
        variants = {cfg.variant};

    int episodes = cfg.episodes;
    if (replay) episodes = std::min<int>(episodes, static_cast<int>(replay->size()));

    std::vector<EpisodeSpec> specs;
    for (Variant v : variants)
        for (std::uint64_t s : cfg.seeds)
            for (int e = 0; e < episodes; ++e) specs.push_back({v, s, e});

    std::vector<EpisodeRow> rows(specs.size());
    parallel_for(static_cast<int>(specs.size()), cfg.threads, [&](int i) {
        const EpisodeSpec& spec = specs[static_cast<std::size_t>(i)];
        rows[static_cast<std::size_t>(i)] =
            replay ? run_replay_episode(cfg, (*replay)[static_cast<std::size_t>(spec.episode)],
                                        spec)
                   : run_sim_episode(cfg, spec);
    });

    RunOutput output;
    output.episodes = std::move(rows);
    std::stable_sort(output.episodes.begin(), output.episodes.end(),
                     [](const EpisodeRow& a, const EpisodeRow& b) {
                         return std::tuple(static_cast<int>(a.variant), a.seed, a.episode) <
                                std::tuple(static_cast<int>(b.variant), b.seed, b.episode);
                     });
    for (Variant v : variants) {
        std::vector<const EpisodeRow*> group;
        for (const auto& row : output.episodes)
            if (row.variant == v) group.push_back(&row);
        output.metrics[v] = summarize(group);
    }
    write_artifacts(cfg, output);
    return output;
}

}  // namespace

void write_trust_dynamics(const ExperimentConfig& cfg, const TrustDynamicsResult& result,
                          std::vector<std::string>& files) {
    if (cfg.output_dir.empty()) return;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    std::string out = "t,normal_mean,normal_std,injected_mean,injected_std\n";
    const auto column = [](const std::vector<std::vector<double>>& runs, std::size_t t) {
        std::vector<double> col;
        for (const auto& run : runs)
            if (t < run.size()) col.push_back(run[t]);
        return aggregate(col);
    };
    for (std::size_t t = 0; t < result.normal_mean.size(); ++t) {
        const Aggregate n = column(result.normal_runs, t);
        const Aggregate i = column(result.injected_runs, t);
        out += std::to_string(t) + ',' + format_double(n.mean) + ',' + format_double(n.stddev) +
               ',' + format_double(i.mean) + ',' + format_double(i.stddev) + '\n';
    }
    write_text(dir / "trust_dynamics.csv", out, files);
}


std::string_view mode_name(Mode m) {
    switch (m) {
        case Mode::Run: return "run";
        case Mode::Replay: return "replay";
        case Mode::TrustDynamics: return "trust-dynamics";
        case Mode::Ablate: return "ablate";
        case Mode::Report: return "report";
    }
    return "run";
}

std::optional<Mode> mode_from_string(std::string_view s) {
    if (s == "run") return Mode::Run;
    if (s == "replay") return Mode::Replay;
    if (s == "trust-dynamics") return Mode::TrustDynamics;
    if (s == "ablate") return Mode::Ablate;
    if (s == "report") return Mode::Report;
    return std::nullopt;
}

void apply_override(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    if (key == "mode") {
        const auto m = mode_from_string(value);
        if (!m) throw std::invalid_argument("config: unknown mode '" + std::string(value) + "'");
        cfg.mode = *m;
    } else if (key == "scenario") {
        const auto k = scenario_from_string(value);
        if (!k)
            throw std::invalid_argument("config: unknown scenario '" + std::string(value) + "'");
        cfg.scenario = *k;
    } else if (key == "dataset") {
        cfg.dataset = std::string(value);
    } else if (key == "output_dir") {
        cfg.output_dir = std::string(value);
    } else if (key == "report_dir") {
        cfg.report_dir = std::string(value);
    } else if (key == "seeds") {
        cfg.seeds = parse_seed_list(value);
    } else if (key == "episodes") {
        cfg.episodes = static_cast<int>(parse_int_value(key, value));
    } else if (key == "variant") {
        const auto v = variant_from_string(value);
        if (!v)
            throw std::invalid_argument("config: unknown variant '" + std::string(value) + "'");
        cfg.variant = *v;
    } else if (key == "all_variants") {
        cfg.all_variants = parse_bool_value(key, value);
    } else if (key == "threads") {
        cfg.threads = static_cast<int>(parse_int_value(key, value));
    } else if (key == "raw_hz") {
        cfg.raw_hz = static_cast<int>(parse_int_value(key, value));
    } else if (key == "live_oracle") {
        cfg.live_oracle = parse_bool_value(key, value);
    } else if (key == "inject_t") {
        cfg.inject_t = static_cast<int>(parse_int_value(key, value));
    } else if (key == "inject_relation_error") {
        cfg.inject_relation_error = parse_double_value(key, value);
    } else if (key == "success_delta") {
        cfg.success_delta = parse_double_value(key, value);
    } else if (key == "progress_factor") {
        cfg.progress_factor = parse_double_value(key, value);
    } else if (key == "mock.seed") {
        cfg.mock.seed = static_cast<std::uint64_t>(parse_int_value(key, value));
    } else if (key == "mock.relation_error") {
        cfg.mock.relation_error_rate = parse_double_value(key, value);
    } else if (key == "mock.format_error") {
        cfg.mock.format_error_rate = parse_double_value(key, value);
    } else if (key == "mock.action_error") {
        cfg.mock.action_error_rate = parse_double_value(key, value);
    } else if (key == "mock.confused_relation_error") {
        cfg.mock.confused_relation_error_rate = parse_double_value(key, value);
    } else if (key == "loop.horizon") {
        cfg.loop.horizon = static_cast<int>(parse_int_value(key, value));
    } else if (key == "loop.m_queries") {
        cfg.loop.m_queries = static_cast<int>(parse_int_value(key, value));
    } else if (key == "loop.eps_smooth") {
        cfg.loop.eps_smooth = parse_double_value(key, value);
    } else if (key == "loop.beta") {
        cfg.loop.beta = parse_double_value(key, value);
    } else if (key == "loop.gamma_diri") {
        cfg.loop.gamma_diri = parse_double_value(key, value);
    } else if (key == "loop.policy_mode") {
        if (value == "mean")
            cfg.loop.policy_mode = PolicyMode::Mean;
        else if (value == "sample")
            cfg.loop.policy_mode = PolicyMode::Sample;
        else
            throw std::invalid_argument("config: unknown policy_mode '" + std::string(value) +
                                        "'");
    } else if (key == "loop.encode_states") {
        cfg.loop.encode_states = parse_bool_value(key, value);
    } else if (key == "trust.alpha_llm") {
        cfg.loop.trust.alpha_llm = parse_double_value(key, value);
    } else if (key == "trust.lambda_acc") {
        cfg.loop.trust.lambda_acc = parse_double_value(key, value);
    } else if (key == "trust.eta") {
        cfg.loop.trust.eta = parse_double_value(key, value);
    } else if (key == "trust.kappa") {
        cfg.loop.trust.kappa = parse_double_value(key, value);
    } else if (key == "calib.gamma_decay") {
        cfg.loop.calib.gamma_decay = parse_double_value(key, value);
    } else if (key == "calib.kappa_r") {
        cfg.loop.calib.kappa_r = parse_double_value(key, value);
    } else if (key == "calib.c0") {
        cfg.loop.calib.c0 = parse_double_value(key, value);
    } else if (key == "calib.sensor_radius") {
        cfg.loop.calib.sensor_radius = parse_double_value(key, value);
    } else if (key == "search.simulations") {
        cfg.loop.search.simulations = static_cast<int>(parse_int_value(key, value));
    } else if (key == "search.depth_cap") {
        cfg.loop.search.depth_cap = static_cast<int>(parse_int_value(key, value));
    } else if (key == "search.gamma") {
        cfg.loop.search.gamma = parse_double_value(key, value);
    } else if (key == "search.tau") {
        cfg.loop.search.tau = parse_double_value(key, value);
    } else if (key == "search.lambda") {
        cfg.loop.search.lambda_uct = parse_double_value(key, value);
    } else if (key == "env.lane_count") {
        cfg.loop.env.lane_count = static_cast<int>(parse_int_value(key, value));
    } else if (key == "env.road_length") {
        cfg.loop.env.road_length = parse_double_value(key, value);
    } else if (key == "env.density") {
        cfg.loop.env.density = parse_double_value(key, value);
    } else if (key == "env.dt") {
        cfg.loop.env.dt = parse_double_value(key, value);
    } else if (key == "env.v_max") {
        cfg.loop.env.v_max = parse_double_value(key, value);
        cfg.loop.trust.v_max = cfg.loop.env.v_max;
        cfg.mock.v_max = cfg.loop.env.v_max;
    } else if (key == "env.ego_speed") {
        cfg.loop.env.ego_speed = parse_double_value(key, value);
    } else if (key == "env.npc_speed_min") {
        cfg.loop.env.npc_speed_min = parse_double_value(key, value);
    } else if (key == "env.npc_speed_max") {
        cfg.loop.env.npc_speed_max = parse_double_value(key, value);
    } else if (key == "env.aggressive_fraction") {
        cfg.loop.env.aggressive_fraction = parse_double_value(key, value);
    } else {
        throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
    }
}

ExperimentConfig load_config_file(const std::string& path) {
    ExperimentConfig cfg;
    apply_config_file(cfg, path);
    return cfg;
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        const std::string_view body = std::string_view(line).substr(first, last - first + 1);
        const std::size_t eq = body.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        ": expected key=value");
        auto trim = [](std::string_view s) {
            const auto b = s.find_first_not_of(" \t");
            if (b == std::string_view::npos) return std::string_view();
            const auto e = s.find_last_not_of(" \t");
            return s.substr(b, e - b + 1);
        };
        apply_override(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    }
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
    if (cfg.episodes < 1) throw std::invalid_argument("config: episodes must be >= 1");
    if (cfg.loop.horizon < 1) throw std::invalid_argument("config: loop.horizon must be >= 1");
    if (cfg.loop.m_queries < 1) throw std::invalid_argument("config: loop.m_queries must be >= 1");
    if (cfg.loop.search.simulations < 1)
        throw std::invalid_argument("config: search.simulations must be >= 1");
    if (cfg.mode == Mode::Replay && cfg.dataset.empty())
        throw std::invalid_argument("config: replay mode requires dataset=<csv path>");
    if (cfg.mode == Mode::Report && cfg.report_dir.empty())
        throw std::invalid_argument("config: report mode requires report_dir=<run directory>");
    if (cfg.raw_hz < 1) throw std::invalid_argument("config: raw_hz must be >= 1");
    for (double rate : {cfg.mock.relation_error_rate, cfg.mock.format_error_rate,
                        cfg.mock.action_error_rate, cfg.mock.confused_relation_error_rate,
                        cfg.inject_relation_error}) {
        if (rate < 0.0 || rate > 1.0)
            throw std::invalid_argument("config: error rates must lie in [0,1]");
    }
}

std::string_view failure_class_name(FailureClass c) {
    switch (c) {
        case FailureClass::Model: return "model";
        case FailureClass::Mapping: return "mapping";
        case FailureClass::Policy: return "policy";
    }
    return "policy";
}

FailureTag classify_failure(const EpisodeResult& ep, const TrustConfig& trust) {
    if (!ep.collision || ep.collision_t < 0 ||
        ep.collision_t >= static_cast<int>(ep.steps.size()))
        throw std::invalid_argument("classify_failure: not a collision episode");
    const CycleRecord& step = ep.steps[static_cast<std::size_t>(ep.collision_t)];
    const std::int64_t partner = ep.collision_partner;

    if (partner >= 0) {
        const auto covered = step.batch_covered.find(partner);
        if (covered == step.batch_covered.end() || !covered->second)
            return {FailureClass::Model, "colliding vehicle had no parsed relation"};
        const auto vt = step.vehicle_trust.find(partner);
        if (vt == step.vehicle_trust.end())
            return {FailureClass::Model, "colliding vehicle outside the trust state"};
        const double combined = vehicle_combined_trust(vt->second, trust);
        if (combined < 0.2)
            return {FailureClass::Model, "colliding vehicle trust-suppressed (" +
                                             format_double(combined) + ")"};
    }
    if (step.any_alias) return {FailureClass::Mapping, "parser alias fired in the batch"};

    auto policy = step.policy;
    std::sort(policy.begin(), policy.end(), std::greater<double>());
    if (policy[0] - policy[1] <= 0.10)
        return {FailureClass::Policy, "near-equal top priors (gap " +
                                          format_double(policy[0] - policy[1]) + ")"};
    return {FailureClass::Policy, "residual"};
}

RunOutput run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    switch (cfg.mode) {
        case Mode::Run:
            return run_episode_grid(cfg, nullptr);
        case Mode::Ablate:
            return run_episode_grid(cfg, nullptr);
        case Mode::Replay: {
            const auto records = load_csv_file(cfg.dataset);
            const auto episodes = segment_episodes(records, cfg.raw_hz, cfg.loop.horizon);
            if (episodes.empty())
                throw std::runtime_error("replay: no complete episodes in '" + cfg.dataset + "'");
            return run_episode_grid(cfg, &episodes);
        }
        case Mode::TrustDynamics: {
            RunOutput output;
            const TrustDynamicsResult result = trust_dynamics(cfg);
            write_trust_dynamics(cfg, result, output.files);
            return output;
        }
        case Mode::Report: {
            RunOutput output;
            emit_report(cfg.report_dir, cfg.output_dir.empty() ? cfg.report_dir : cfg.output_dir);
            return output;
        }
    }
    throw std::logic_error("run_experiment: unhandled mode");
}

TrustDynamicsResult trust_dynamics(const ExperimentConfig& cfg) {
    const int horizon = std::max(cfg.loop.horizon, cfg.inject_t + 7);
    TrustDynamicsResult result;
    result.normal_runs.resize(cfg.seeds.size());
    result.injected_runs.resize(cfg.seeds.size());

    parallel_for(static_cast<int>(cfg.seeds.size()), cfg.threads, [&](int i) {
        const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(i)];
        EnvConfig env = cfg.loop.env;
        env.kind = cfg.scenario;
        env.seed = derive_seed(seed, kEnvStream);
        LoopConfig loop = cfg.loop;
        loop.horizon = horizon;
        loop.env = env;
        const std::uint64_t episode_seed = derive_seed(seed, kLoopStream);

        for (int condition = 0; condition < 2; ++condition) {
            MockOracleConfig normal = cfg.mock;
            normal.seed = derive_seed(episode_seed, kOracleStream);
            MockOracleConfig injected = normal;
            injected.relation_error_rate = cfg.inject_relation_error;
            auto normal_oracle = std::make_shared<MockOracle>(normal);
            auto injected_oracle = std::make_shared<MockOracle>(injected);
            const int m = loop.m_queries;
            const int inject_t = cfg.inject_t;
            const bool use_injection = condition == 1;
            QueryFn query = [=](const SceneState& scene, int t) {
                MockOracle& oracle = (use_injection && t >= inject_t) ? *injected_oracle
                                                                      : *normal_oracle;
                return query_batch(scene, oracle, m,
                                   static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(m));
            };
            TrafficWorld world = TrafficWorld::make(env);
            const EpisodeResult ep =
                generate_trajectory(world, query, loop, LoopOptions{}, episode_seed);
            std::vector<double> trace;
            trace.reserve(ep.steps.size());
            for (const auto& s : ep.steps) trace.push_back(s.trust_used);
            auto& slot = use_injection ? result.injected_runs[static_cast<std::size_t>(i)]
                                       : result.normal_runs[static_cast<std::size_t>(i)];
            slot = std::move(trace);
        }
    });

    const auto mean_trace = [horizon](const std::vector<std::vector<double>>& runs) {
        std::vector<double> mean(static_cast<std::size_t>(horizon), 0.0);
        std::vector<int> counts(static_cast<std::size_t>(horizon), 0);
        for (const auto& run : runs)
            for (std::size_t t = 0; t < run.size() && t < mean.size(); ++t) {
                mean[t] += run[t];
                counts[t] += 1;
            }
        for (std::size_t t = 0; t < mean.size(); ++t)
            if (counts[t] > 0) mean[t] /= counts[t];
        return mean;
    };
    result.normal_mean = mean_trace(result.normal_runs);
    result.injected_mean = mean_trace(result.injected_runs);
    return result;
}

FilteringResult rpa_filtering(const ExperimentConfig& cfg, int n_scenes, double kin_threshold,
                              double llm_threshold) {
    if (n_scenes < 1) throw std::invalid_argument("rpa_filtering: n_scenes must be >= 1");
    FilteringResult result;
    result.scenes = n_scenes;

    std::vector<FilteringResult> partial(static_cast<std::size_t>(n_scenes));
    parallel_for(n_scenes, cfg.threads, [&](int i) {
        EnvConfig env = cfg.loop.env;
        env.kind = cfg.scenario;
        env.seed = derive_seed(cfg.mock.seed, 0xf11 + static_cast<std::uint64_t>(i));
        const SceneState scene = make_scenario(env);

        MockOracleConfig mock = cfg.mock;
        mock.seed = derive_seed(cfg.mock.seed, 0x0c1 + static_cast<std::uint64_t>(i));
        MockOracle oracle(mock);
        const QueryBatch batch = query_batch(scene, oracle, cfg.loop.m_queries);
        if (batch.degraded) return;

        // Commonsense trust per vehicle from the batch consensus (Eq. 5 inputs).
        std::map<std::int64_t, double> llm;
        for (const auto& [id, counts] : batch.relation_counts)
            llm[id] = commonsense_trust(counts, cfg.loop.trust.alpha_llm);

        // Kinematic trust of each response's recommendation against the transition the
        // scene actually takes (the heuristic action, executed by the shared dynamics).
        const MetaAction executed = default_action_rule(scene, env.v_max);
        const VehicleState observed = predict_ego_next(scene.ego, executed, env, scene.lane_count);

        FilteringResult& p = partial[static_cast<std::size_t>(i)];
        for (const auto& resp : batch.responses) {
            if (!resp.ok) continue;
            const VehicleState predicted =
                predict_ego_next(scene.ego, resp.action, env, scene.lane_count);
            const double c_kin = kinematic_trust(predicted, observed, cfg.loop.trust);
            for (const auto& edge : resp.relations) {
                const VehicleState* other = scene.find(edge.other_id);
                if (!other) continue;
                const bool match = edge.relation == ground_truth_relation(scene.ego, *other);
                p.unfiltered.add(match);
                if (c_kin < kin_threshold) continue;
                p.kin_only.add(match);
                const auto it = llm.find(edge.other_id);
                if (it == llm.end() || it->second < llm_threshold) continue;
                p.dual.add(match);
            }
        }
    });
    for (const auto& p : partial) {
        result.unfiltered += p.unfiltered;
        result.kin_only += p.kin_only;
        result.dual += p.dual;
    }
    return result;
}

void apply_ablation_preset(ExperimentConfig& cfg) {
    cfg.all_variants = true;
    cfg.mock.relation_error_rate = 0.3;
    cfg.progress_factor = 0.66;
    cfg.loop.env.npc_speed_min = 24.0;
}

std::map<Variant, double> ablation_success(const ExperimentConfig& cfg) {
    ExperimentConfig grid = cfg;
    grid.mode = Mode::Ablate;
    grid.all_variants = true;
    grid.output_dir.clear();
    const RunOutput output = run_experiment(grid);
    std::map<Variant, double> sr;
    for (const auto& [variant, vm] : output.metrics) sr[variant] = vm.report.sr;
    return sr;
}

void emit_report(const std::string& run_dir, const std::string& out_dir) {
    const fs::path dir(run_dir);
    const fs::path episodes_path = dir / "episodes.jsonl";
    const fs::path steps_path = dir / "steps.jsonl";
    if (!fs::exists(episodes_path))
        throw std::runtime_error("report: missing '" + episodes_path.string() + "'");
    if (!fs::exists(steps_path))
        throw std::runtime_error("report: missing '" + steps_path.string() + "'");

    const auto parse_lines = [](const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("report: cannot open '" + path.string() + "'");
        std::vector<ordered_json> rows;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            ordered_json j = ordered_json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw std::runtime_error("report: corrupt JSON at " + path.string() + ":" +
                                         std::to_string(lineno));
            rows.push_back(std::move(j));
        }
        return rows;
    };

    const auto episodes = parse_lines(episodes_path);
    if (episodes.empty())
        throw std::runtime_error("report: no episodes in '" + episodes_path.string() + "'");
    const auto steps = parse_lines(steps_path);

    // Recompute the per-variant metric table from the episode log.
    struct Group {
        std::vector<double> ade, fde, reward;
        long long rpa_correct = 0, rpa_total = 0;
        int successes = 0, collisions = 0, count = 0;
        std::string scenario;
    };
    std::map<std::string, Group> groups;
    for (const auto& e : episodes) {
        Group& g = groups[e.at("variant").get<std::string>()];
        g.scenario = e.at("scenario").get<std::string>();
        g.ade.push_back(e.at("ade").get<double>());
        g.fde.push_back(e.at("fde").get<double>());
        g.reward.push_back(e.at("total_reward").get<double>());
        g.rpa_correct += e.at("rpa_correct").get<long long>();
        g.rpa_total += e.at("rpa_total").get<long long>();
        if (e.at("success").get<bool>()) ++g.successes;
        if (e.at("collision").get<bool>()) ++g.collisions;
        ++g.count;
    }
    const Variant order[] = {Variant::Full, Variant::NoTrust, Variant::NoDirichlet,
                             Variant::NoUpdate};
    std::string metrics =
        "scenario,variant,episodes,collisions,sr,rpa,ade_mean,ade_std,fde_mean,fde_std,"
        "reward_mean,reward_std\n";
    for (Variant v : order) {
        const auto it = groups.find(std::string(variant_name(v)));
        if (it == groups.end()) continue;
        const Group& g = it->second;
        const Aggregate ade = aggregate(g.ade), fde = aggregate(g.fde),
                        reward = aggregate(g.reward);
        metrics += g.scenario + ',' + it->first + ',' + std::to_string(g.count) + ',' +
                   std::to_string(g.collisions);
        const double sr = g.count ? static_cast<double>(g.successes) / g.count : 0.0;
        const double rpa = g.rpa_total ? static_cast<double>(g.rpa_correct) / g.rpa_total : 0.0;
        for (double v2 : {sr, rpa, ade.mean, ade.stddev, fde.mean, fde.stddev, reward.mean,
                          reward.stddev}) {
            metrics += ',';
            metrics += format_double(v2);
        }
        metrics += '\n';
    }

    // Trust-vs-time series per variant (Fig. 7-style plot data).
    std::map<std::string, std::map<int, std::pair<double, int>>> series;
    for (const auto& s : steps) {
        auto& cell = series[s.at("variant").get<std::string>()][s.at("t").get<int>()];
        cell.first += s.at("ct").get<double>();
        cell.second += 1;
    }
    std::string trust_series = "variant,t,mean_ct,samples\n";
    for (Variant v : order) {
        const auto it = series.find(std::string(variant_name(v)));
        if (it == series.end()) continue;
        for (const auto& [t, cell] : it->second)
            trust_series += it->first + ',' + std::to_string(t) + ',' +
                            format_double(cell.first / cell.second) + ',' +
                            std::to_string(cell.second) + '\n';
    }

    const fs::path out(out_dir);
    fs::create_directories(out);
    std::vector<std::string> files;
    write_text(out / "metrics.csv", metrics, files);
    write_text(out / "trust_series.csv", trust_series, files);
}

}  // namespace ctrail

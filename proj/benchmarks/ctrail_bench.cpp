#include <benchmark/benchmark.h>

#include <memory>

#include "ctrail/env.hpp"
#include "ctrail/loop.hpp"
#include "ctrail/oracle.hpp"
#include "ctrail/planner.hpp"
#include "ctrail/rng.hpp"
#include "ctrail/trust.hpp"

using namespace ctrail;

namespace {

SceneState bench_scene() {
    EnvConfig cfg;
    cfg.seed = derive_seed(1, 0x5ce7a);
    return TrafficWorld::make(cfg).scene();
}

const std::string kCanonicalResponse =
    "Action: Turn-Left\nRelation: [(659, 992, RightAhead), (659, 712, Ahead)]";

SceneState parse_scene() {
    SceneState s;
    s.lane_count = 4;
    s.ego = {659, 408.13, 4.0, 24.03, 0.0, -0.05, 0.0, 0.0, 1};
    s.others.push_back({992, 422.72, 8.0, 17.25, 0.0, -1.33, 0.0, 0.0, 2});
    s.others.push_back({712, 442.23, 4.0, 22.84, 0.0, -1.49, 0.0, 0.0, 1});
    return s;
}

void bm_parse_response(benchmark::State& state) {
    const SceneState scene = parse_scene();
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_response(kCanonicalResponse, scene));
    }
}
BENCHMARK(bm_parse_response);

void bm_query_batch(benchmark::State& state) {
    const SceneState scene = bench_scene();
    MockOracleConfig cfg;
    cfg.seed = 7;
    cfg.relation_error_rate = 0.2;
    MockOracle oracle(cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(query_batch(scene, oracle, 5));
    }
}
BENCHMARK(bm_query_batch);

void bm_env_step(benchmark::State& state) {
    EnvConfig cfg;
    cfg.seed = derive_seed(1, 0x5ce7a);
    const TrafficWorld world = TrafficWorld::make(cfg);
    for (auto _ : state) {
        auto w = world.clone();
        benchmark::DoNotOptimize(w->step(MetaAction::Idle));
    }
}
BENCHMARK(bm_env_step);

void bm_plan(benchmark::State& state) {
    EnvConfig cfg;
    cfg.seed = derive_seed(1, 0x5ce7a);
    const TrafficWorld world = TrafficWorld::make(cfg);
    std::array<double, kActionCount> policy{};
    policy.fill(1.0 / kActionCount);
    SearchConfig sc;
    sc.simulations = static_cast<int>(state.range(0));
    sc.seed = 11;
    for (auto _ : state) {
        benchmark::DoNotOptimize(plan(world, policy, 0.8, sc));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_plan)->Arg(50)->Arg(200);

void bm_encode(benchmark::State& state) {
    const SceneState scene = bench_scene();
    EncoderConfig ec;
    const StateEncoder encoder(ec);
    const TrustConfig tc;
    CommonsenseGraph graph;
    graph.edges.push_back({scene.ego.id, scene.others[0].id, RelationType::Ahead});
    graph.trust.per_vehicle[scene.others[0].id] = VehicleTrust{0.8, 0.9};
    for (auto _ : state) {
        benchmark::DoNotOptimize(encoder.encode(scene, graph, tc));
    }
}
BENCHMARK(bm_encode);

void bm_full_cycle(benchmark::State& state) {
    // One planner-in-the-loop episode: query, trust update, search, act.
    for (auto _ : state) {
        EnvConfig env;
        env.seed = derive_seed(3, 0x5ce7a);
        MockOracleConfig mc;
        mc.seed = 5;
        mc.relation_error_rate = 0.2;
        MockOracle oracle(mc);
        LoopConfig loop;
        loop.horizon = 3;
        loop.m_queries = 5;
        loop.search.simulations = 50;
        const QueryFn query = [&oracle, &loop](const SceneState& scene, int t) {
            return query_batch(scene, oracle, loop.m_queries,
                               static_cast<std::uint64_t>(t) *
                                   static_cast<std::uint64_t>(loop.m_queries));
        };
        TrafficWorld world = TrafficWorld::make(env);
        benchmark::DoNotOptimize(generate_trajectory(world, query, loop, LoopOptions{}, 3));
    }
}
BENCHMARK(bm_full_cycle)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#pragma once

#include <functional>
#include <map>
#include <vector>

#include "ctrail/env.hpp"
#include "ctrail/planner.hpp"
#include "ctrail/trust.hpp"
#include "ctrail/world.hpp"

namespace ctrail {

enum class Variant : std::uint8_t {
    Full,
    NoTrust,      // all trust scores forced to 1
    NoDirichlet,  // plain UCB selection, uniform prior
    NoUpdate,     // per-cycle fresh trust, alpha_t = target_t
};
std::string_view variant_name(Variant v);
std::optional<Variant> variant_from_string(std::string_view s);

struct LoopConfig {
    int horizon = 10;
    int m_queries = 5;
    double eps_smooth = 0.1;
    double beta = 1.5;
    double gamma_diri = 0.3;
    PolicyMode policy_mode = PolicyMode::Mean;
    bool encode_states = false;  // compute the graph encoding per cycle (diagnostic)
    TrustConfig trust;
    CalibrationConfig calib;
    SearchConfig search;  // per-cycle seed derived from the episode seed
    EnvConfig env;        // dynamics constants shared with the prediction model
    EncoderConfig encoder;
};

struct LoopOptions {
    Variant variant = Variant::Full;
    bool force_ct_zero = false;
    // Overrides the selection rule for non-ablation builds (prior-free comparison).
    std::optional<SelectionRule> selection;
};

struct CycleRecord {
    int t = 0;
    double trust_used = 0.0;
    double scene_llm = 1.0;
    double scene_kin = 1.0;
    std::array<double, kActionCount> freq{};
    std::array<double, kActionCount> alpha{};
    std::array<double, kActionCount> policy{};
    std::array<int, kActionCount> visits{};
    std::array<double, kActionCount> q{};
    std::array<int, kActionCount> action_counts{};
    MetaAction recommended = MetaAction::Idle;
    MetaAction chosen = MetaAction::Idle;
    double reward = 0.0;
    bool collision = false;
    bool degraded = false;
    bool any_alias = false;
    bool rejected_turn = false;
    bool lane_changed = false;
    int effective_m = 0;
    int relations_correct = 0;  // consensus-graph edges matching geometric ground truth
    int relations_total = 0;
    double ego_x = 0.0, ego_y = 0.0, ego_speed = 0.0;
    int ego_lane = 0;
    double z_norm = 0.0;
    std::map<std::int64_t, VehicleTrust> vehicle_trust;
    std::map<std::int64_t, bool> batch_covered;  // vehicle had parsed relations this cycle
};

struct EpisodeResult {
    std::vector<CycleRecord> steps;
    bool collision = false;
    std::int64_t collision_partner = -1;
    int collision_t = -1;
    double total_reward = 0.0;
    VehicleState initial_ego;
    VehicleState final_ego;
    std::vector<std::pair<double, double>> ego_path;  // position after each executed step
};

// Consensus graph: per-vehicle majority relation (ties to the lowest relation index).
CommonsenseGraph build_graph(const QueryBatch& batch, const TrustScores& trust,
                             std::int64_t ego_id, int timestep);

using QueryFn = std::function<QueryBatch(const SceneState&, int)>;

// Executes the closed Recall-Plan-Update loop on a live world handle. The LLM batch is queried
// once per cycle and cached; trust recalibration and the Dirichlet EMA for cycle t complete at
// cycle t+1 when the newly observed scene has been re-queried.
EpisodeResult generate_trajectory(SceneWorld& world, const QueryFn& query, const LoopConfig& cfg,
                                  const LoopOptions& opts, std::uint64_t seed);

}  // namespace ctrail

#include "ctrail/loop.hpp"

#include <cmath>

#include "ctrail/rng.hpp"

namespace ctrail {
namespace {

constexpr std::uint64_t kPolicyStream = 0x706f6c69;
constexpr std::uint64_t kSearchStream = 0x73726368;

std::map<std::int64_t, int> sensor_mask(const SceneState& scene, double radius) {
    std::map<std::int64_t, int> mask;
    for (const auto& v : scene.others) {
        const double d = std::hypot(v.x - scene.ego.x, v.y - scene.ego.y);
        mask[v.id] = d <= radius ? 1 : 0;
    }
    return mask;
}

TrustScores force_unit_trust(const TrustScores& in) {
    TrustScores out = in;
    for (auto& [id, tr] : out.per_vehicle) {
        (void)id;
        tr = {1.0, 1.0};
    }
    out.scene_llm = 1.0;
    out.scene_kin = 1.0;
    out.combined = 1.0;
    return out;
}

}  // namespace

std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoTrust: return "no-trust";
        case Variant::NoDirichlet: return "no-dirichlet";
        case Variant::NoUpdate: return "no-update";
    }
    return "full";
}

std::optional<Variant> variant_from_string(std::string_view s) {
    if (s == "full") return Variant::Full;
    if (s == "no-trust") return Variant::NoTrust;
    if (s == "no-dirichlet") return Variant::NoDirichlet;
    if (s == "no-update") return Variant::NoUpdate;
    return std::nullopt;
}

CommonsenseGraph build_graph(const QueryBatch& batch, const TrustScores& trust,
                             std::int64_t ego_id, int timestep) {
    CommonsenseGraph g;
    g.timestep = timestep;
    g.trust = trust;
    for (const auto& [id, counts] : batch.relation_counts) {
        int best = 0;
        for (int k = 1; k < kRelationCount; ++k) {
            if (counts[k] > counts[best]) best = k;
        }
        g.edges.push_back({ego_id, id, static_cast<RelationType>(best)});
    }
    return g;
}

EpisodeResult generate_trajectory(SceneWorld& world, const QueryFn& query, const LoopConfig& cfg,
                                  const LoopOptions& opts, std::uint64_t seed) {
    EpisodeResult ep;
    ep.initial_ego = world.scene().ego;

    TrustScores trust_state;
    DirichletParams alpha;
    bool have_alpha = false;

    MetaAction prev_recommended = MetaAction::Idle;
    VehicleState prev_ego;
    int prev_lane_count = 0;
    double prev_reward = 0.0;
    bool have_prev = false;

    std::optional<StateEncoder> encoder;
    if (cfg.encode_states) encoder.emplace(cfg.encoder);

    for (int t = 0; t < cfg.horizon; ++t) {
        if (world.terminal()) break;
        const SceneState scene = world.scene();
        // Recall perceives vehicles within the sensor radius; the world itself keeps everything.
        SceneState sensed = scene;
        std::erase_if(sensed.others, [&](const VehicleState& v) {
            return std::hypot(v.x - scene.ego.x, v.y - scene.ego.y) > cfg.calib.sensor_radius;
        });
        const QueryBatch batch = query(sensed, t);

        FreshTrust fresh;
        if (!batch.degraded) fresh.llm = batch_commonsense_trust(batch, cfg.trust.alpha_llm);
        if (have_prev) {
            const VehicleState predicted =
                predict_ego_next(prev_ego, prev_recommended, cfg.env, prev_lane_count);
            fresh.kin = kinematic_trust(predicted, scene.ego, cfg.trust);
        }

        const auto mask = sensor_mask(sensed, cfg.calib.sensor_radius);
        if (opts.variant == Variant::NoUpdate || t == 0) {
            trust_state = trust_from_fresh(fresh, mask, cfg.calib, cfg.trust);
        } else {
            trust_state =
                calibrate_trust(trust_state, fresh, mask, prev_reward, cfg.calib, cfg.trust);
        }
        if (opts.variant == Variant::NoTrust) trust_state = force_unit_trust(trust_state);

        double trust_ct = trust_state.combined;
        if (batch.degraded) trust_ct = 0.0;
        if (opts.variant == Variant::NoTrust) trust_ct = 1.0;
        if (opts.force_ct_zero) trust_ct = 0.0;

        const auto freq = action_frequencies(batch, cfg.eps_smooth);
        const DirichletParams target = dirichlet_target(freq, trust_ct, cfg.beta);
        if (opts.variant == Variant::NoUpdate || !have_alpha) {
            alpha = target;
        } else {
            alpha = update_dirichlet_ema(&alpha, target, cfg.gamma_diri);
        }
        have_alpha = true;

        Rng policy_rng(derive_seed(seed, kPolicyStream + static_cast<std::uint64_t>(t)));
        std::array<double, kActionCount> policy =
            policy_from_params(alpha, cfg.policy_mode, &policy_rng);

        SearchConfig search = cfg.search;
        search.seed = derive_seed(seed, kSearchStream + static_cast<std::uint64_t>(t));
        if (opts.variant == Variant::NoDirichlet) {
            search.rule = SelectionRule::PlainUcb;
        } else if (opts.selection) {
            search.rule = *opts.selection;
        }
        std::array<double, kActionCount> search_policy = policy;
        if (opts.variant == Variant::NoDirichlet)
            search_policy.fill(1.0 / kActionCount);

        const PlanResult result = plan(world, search_policy, trust_ct, search);

        CycleRecord rec;
        rec.t = t;
        rec.trust_used = trust_ct;
        rec.scene_llm = trust_state.scene_llm;
        rec.scene_kin = trust_state.scene_kin;
        rec.freq = freq;
        rec.alpha = alpha.alpha;
        rec.policy = policy;
        rec.visits = result.root_visits;
        rec.q = result.root_q;
        rec.action_counts = batch.action_counts;
        rec.recommended = batch.majority_action();
        rec.chosen = result.action;
        rec.degraded = batch.degraded;
        rec.any_alias = batch.any_alias;
        rec.effective_m = batch.effective_m;
        rec.vehicle_trust = trust_state.per_vehicle;
        for (const auto& [id, counts] : batch.relation_counts) {
            (void)counts;
            rec.batch_covered[id] = true;
        }
        const CommonsenseGraph graph = build_graph(batch, trust_state, sensed.ego.id, t);
        for (const auto& edge : graph.edges) {
            const VehicleState* other = sensed.find(edge.other_id);
            if (!other) continue;
            rec.relations_total += 1;
            if (edge.relation == ground_truth_relation(sensed.ego, *other))
                rec.relations_correct += 1;
        }
        if (encoder) {
            validate_graph(graph, sensed);
            const auto z = encoder->encode(sensed, graph, cfg.trust);
            double norm = 0.0;
            for (double v : z) norm += v * v;
            rec.z_norm = std::sqrt(norm);
        }

        const StepOutcome out = world.step(result.action);
        const SceneState& next = world.scene();
        rec.reward = out.reward;
        rec.collision = out.collision;
        rec.rejected_turn = out.rejected_turn;
        rec.lane_changed = out.lane_changed;
        rec.ego_x = next.ego.x;
        rec.ego_y = next.ego.y;
        rec.ego_lane = next.ego.lane;
        rec.ego_speed = next.ego.speed();
        ep.total_reward += out.reward;
        ep.ego_path.emplace_back(next.ego.x, next.ego.y);
        ep.steps.push_back(std::move(rec));

        if (out.collision) {
            ep.collision = true;
            ep.collision_partner = world.collision_partner();
            ep.collision_t = t;
        }

        prev_recommended = batch.majority_action();
        prev_ego = scene.ego;
        prev_lane_count = scene.lane_count;
        prev_reward = out.reward;
        have_prev = true;

        if (out.terminal) break;
    }

    ep.final_ego = world.scene().ego;
    return ep;
}

}  // namespace ctrail

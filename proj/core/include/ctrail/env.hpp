#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ctrail/world.hpp"

namespace ctrail {

struct EnvConfig {
    ScenarioKind kind = ScenarioKind::Highway;
    std::uint64_t seed = 0;
    int lane_count = 4;
    double lane_width = 4.0;
    double road_length = 200.0;  // NPC placement span
    double density = 2.0;        // vehicles per 100 m per lane
    double dt = 1.0;
    double v_max = 40.0;
    double speed_step = 2.0;
    double collision_gap = 5.0;
    double npc_headway = 10.0;
    double ego_speed = 24.0;
    double npc_speed_min = 12.0;
    double npc_speed_max = 32.0;
    double aggressive_fraction = 0.0;
    double cutin_trigger = 15.0;
    int cutin_duration = 2;
    double merge_end = 120.0;     // ramp terminates here (merge scenario)
    double conflict_x = 60.0;     // conflict cell (roundabout/intersection)
    double conflict_x2 = 90.0;    // second cell (roundabout exit)
    double reward_base = 0.1;
    double reward_speed = 0.4;
    double reward_lane_penalty = 0.05;
    double reward_collision = -1.0;
};

// Shared deterministic meta-action kinematics: also the prediction model for kinematic trust.
VehicleState predict_ego_next(const VehicleState& ego, MetaAction action, const EnvConfig& cfg,
                              int lane_count);

// Unobstructed maximum-acceleration endpoint over `horizon` steps (success reference in
// generated scenarios).
double free_flow_goal(double x0, double v0, const EnvConfig& cfg, int horizon);

class TrafficWorld final : public SceneWorld {
  public:
    // Seeded scenario construction; throws std::invalid_argument on infeasible density.
    static TrafficWorld make(const EnvConfig& cfg);

    std::unique_ptr<WorldModel> clone() const override;
    StepOutcome step(MetaAction action) override;
    bool terminal() const override { return terminal_; }
    const SceneState& scene() const override { return scene_; }

    const EnvConfig& config() const { return cfg_; }
    std::int64_t collision_partner() const override { return collision_partner_; }

  private:
    struct Npc {
        VehicleState v;
        double cruise = 0.0;
        bool aggressive = false;
        int countdown = -1;      // >=0: cut-in in progress, -2: done
        int target_lane = -1;
        bool cross = false;      // lives on a crossing corridor
        double conflict_x = 0.0; // where that corridor meets the ego road
    };

    void rebuild_scene();
    int total_lanes() const;

    EnvConfig cfg_;
    SceneState scene_;
    VehicleState ego_;
    std::vector<Npc> npcs_;
    bool terminal_ = false;
    std::int64_t collision_partner_ = -1;
    int t_ = 0;
};

SceneState make_scenario(const EnvConfig& cfg);

}  // namespace ctrail

#include "ctrail/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctrail/rng.hpp"

namespace ctrail {

VehicleState predict_ego_next(const VehicleState& ego, MetaAction action, const EnvConfig& cfg,
                              int lane_count) {
    VehicleState next = ego;
    const double v0 = ego.speed();
    double v = v0;
    switch (action) {
        case MetaAction::Faster: v = std::min(cfg.v_max, v + cfg.speed_step); break;
        case MetaAction::Slower: v = std::max(0.0, v - cfg.speed_step); break;
        case MetaAction::TurnLeft:
            if (next.lane > 0) next.lane -= 1;
            break;
        case MetaAction::TurnRight:
            if (next.lane < lane_count - 1) next.lane += 1;
            break;
        case MetaAction::Idle: break;
    }
    next.heading = 0.0;
    next.vx = v;
    next.vy = 0.0;
    next.ax = (v - v0) / cfg.dt;
    next.ay = 0.0;
    next.x = ego.x + v * cfg.dt;
    next.y = next.lane * cfg.lane_width;
    return next;
}

double free_flow_goal(double x0, double v0, const EnvConfig& cfg, int horizon) {
    double x = x0;
    double v = v0;
    for (int k = 0; k < horizon; ++k) {
        v = std::min(cfg.v_max, v + cfg.speed_step);
        x += v * cfg.dt;
    }
    return x;
}

int TrafficWorld::total_lanes() const {
    return cfg_.kind == ScenarioKind::Merge ? cfg_.lane_count + 1 : cfg_.lane_count;
}

namespace {

// Jittered slot placement: keeps in-lane gaps >= slot*(1-jitter) deterministic per seed.
std::vector<double> lane_positions(int count, double lo, double span, Rng& rng) {
    std::vector<double> xs;
    xs.reserve(count);
    const double slot = span / std::max(1, count);
    for (int k = 0; k < count; ++k) {
        const double jitter = 0.4 * slot * (rng.uniform() - 0.5);
        xs.push_back(lo + (k + 0.5) * slot + jitter);
    }
    return xs;
}

}  // namespace

TrafficWorld TrafficWorld::make(const EnvConfig& cfg) {
    TrafficWorld w;
    w.cfg_ = cfg;
    Rng rng(derive_seed(cfg.seed, 0x5ce7a));

    const int lanes = cfg.lane_count;
    if (lanes < 1) throw std::invalid_argument("env: lane_count < 1");
    const int per_lane = static_cast<int>(std::lround(cfg.density * cfg.road_length / 100.0));
    const double slot = cfg.road_length / std::max(1, per_lane);
    if (per_lane > 0 && 0.6 * slot < cfg.npc_headway)
        throw std::invalid_argument("env: density too high for minimum headway");

    w.ego_.id = 0;
    w.ego_.lane = lanes / 2;
    w.ego_.x = 0.0;
    w.ego_.vx = cfg.ego_speed;
    w.ego_.heading = 0.0;
    w.ego_.y = w.ego_.lane * cfg.lane_width;

    std::int64_t next_id = 1;
    auto add_npc = [&](int lane, double x, bool cross, double conflict_x) {
        Npc npc;
        npc.v.id = next_id++;
        npc.v.lane = lane;
        npc.v.x = x;
        npc.cruise = rng.uniform(cfg.npc_speed_min, cfg.npc_speed_max);
        npc.v.vx = npc.cruise;
        npc.v.y = lane * cfg.lane_width;
        npc.v.heading = 0.0;
        npc.aggressive = !cross && rng.uniform() < cfg.aggressive_fraction;
        npc.cross = cross;
        npc.conflict_x = conflict_x;
        w.npcs_.push_back(npc);
    };

    const double lo = 25.0;
    switch (cfg.kind) {
        case ScenarioKind::Merge: {
            for (int lane = 0; lane < lanes; ++lane) {
                for (double x : lane_positions(per_lane, lo, cfg.road_length, rng))
                    add_npc(lane, x, false, 0.0);
            }
            const int ramp_n =
                static_cast<int>(std::lround(cfg.density * cfg.merge_end / 100.0));
            for (double x : lane_positions(ramp_n, 5.0, cfg.merge_end - 25.0, rng))
                add_npc(lanes, x, false, 0.0);
            w.ego_.lane = lanes - 1;
            w.ego_.y = w.ego_.lane * cfg.lane_width;
            break;
        }
        case ScenarioKind::Roundabout:
        case ScenarioKind::Intersection: {
            for (int lane = 0; lane < lanes; ++lane) {
                for (double x : lane_positions(per_lane, lo, cfg.road_length, rng))
                    add_npc(lane, x, false, 0.0);
            }
            const int cross_n = std::max(
                1, static_cast<int>(std::lround(cfg.density * cfg.road_length * lanes / 200.0)));
            for (int k = 0; k < cross_n; ++k) {
                const double cx = (cfg.kind == ScenarioKind::Roundabout && k % 2 == 1)
                                      ? cfg.conflict_x2
                                      : cfg.conflict_x;
                const int lane = k % lanes;
                const double x = cx - rng.uniform(15.0, 90.0);
                add_npc(lane, x, true, cx);
            }
            break;
        }
        case ScenarioKind::Highway:
        case ScenarioKind::Replay:
        default: {
            for (int lane = 0; lane < lanes; ++lane) {
                for (double x : lane_positions(per_lane, lo, cfg.road_length, rng)) {
                    if (lane == w.ego_.lane && std::abs(x - w.ego_.x) < 15.0) x += 20.0;
                    add_npc(lane, x, false, 0.0);
                }
            }
            break;
        }
    }

    w.rebuild_scene();
    return w;
}

std::unique_ptr<WorldModel> TrafficWorld::clone() const {
    return std::make_unique<TrafficWorld>(*this);
}

StepOutcome TrafficWorld::step(MetaAction action) {
    if (terminal_) throw std::logic_error("env: step after terminal");
    StepOutcome out;
    const VehicleState ego_before = ego_;
    const int lanes = total_lanes();

    // Ego action.
    double ego_v = ego_.speed();
    const double ego_v_before = ego_v;
    switch (action) {
        case MetaAction::Faster: ego_v = std::min(cfg_.v_max, ego_v + cfg_.speed_step); break;
        case MetaAction::Slower: ego_v = std::max(0.0, ego_v - cfg_.speed_step); break;
        case MetaAction::TurnLeft:
            if (ego_.lane > 0) {
                ego_.lane -= 1;
                out.lane_changed = true;
            } else {
                out.rejected_turn = true;
            }
            break;
        case MetaAction::TurnRight:
            if (ego_.lane < lanes - 1) {
                ego_.lane += 1;
                out.lane_changed = true;
            } else {
                out.rejected_turn = true;
            }
            break;
        case MetaAction::Idle: break;
    }

    // NPC decisions against pre-step speeds.
    std::vector<double> speed_before(npcs_.size());
    for (size_t i = 0; i < npcs_.size(); ++i) speed_before[i] = npcs_[i].v.speed();

    for (size_t i = 0; i < npcs_.size(); ++i) {
        Npc& npc = npcs_[i];
        bool triggered_now = false;
        if (npc.aggressive && npc.countdown == -1) {
            if (std::abs(npc.v.lane - ego_before.lane) == 1 &&
                std::abs(npc.v.x - ego_before.x) <= cfg_.cutin_trigger) {
                npc.countdown = cfg_.cutin_duration;
                npc.target_lane = ego_before.lane;
                triggered_now = true;
            }
        }
        if (npc.countdown > 0 && !triggered_now) {
            if (--npc.countdown == 0) {
                npc.v.lane = npc.target_lane;
                npc.v.y = npc.v.lane * cfg_.lane_width;
                npc.countdown = -2;
            }
        }

        // Leader search within the npc's own corridor.
        double best_gap = 1e300;
        double leader_speed = 0.0;
        auto consider = [&](double x, double speed, bool same_corridor) {
            if (!same_corridor) return;
            const double gap = x - npc.v.x;
            if (gap > 0.0 && gap < best_gap) {
                best_gap = gap;
                leader_speed = speed;
            }
        };
        for (size_t j = 0; j < npcs_.size(); ++j) {
            if (j == i) continue;
            const bool same_corridor =
                npcs_[j].cross == npc.cross &&
                (!npc.cross || npcs_[j].conflict_x == npc.conflict_x) &&
                npcs_[j].v.lane == npc.v.lane;
            consider(npcs_[j].v.x, speed_before[j], same_corridor);
        }
        consider(ego_before.x, ego_v_before, !npc.cross && ego_before.lane == npc.v.lane);

        double v = npc.v.speed();
        if (best_gap < cfg_.npc_headway) {
            v = std::max(0.0, std::min(v, leader_speed * (best_gap / cfg_.npc_headway)));
        } else {
            v = std::min(npc.cruise, v + 1.0 * cfg_.dt);
        }
        v = std::clamp(v, 0.0, cfg_.v_max);
        npc.v.ax = (v - npc.v.speed()) / cfg_.dt;
        npc.v.vx = v;
        npc.v.vy = 0.0;
    }

    // Merge-lane management for NPCs on a terminating ramp.
    if (cfg_.kind == ScenarioKind::Merge) {
        const int ramp = cfg_.lane_count;
        for (Npc& npc : npcs_) {
            if (npc.v.lane != ramp) continue;
            const bool must = npc.v.x >= cfg_.merge_end;
            if (npc.v.x >= cfg_.merge_end - 30.0) {
                bool clear = true;
                const int target = ramp - 1;
                for (const Npc& other : npcs_) {
                    if (&other == &npc || other.v.lane != target) continue;
                    if (std::abs(other.v.x - npc.v.x) < 2.0 * cfg_.collision_gap) clear = false;
                }
                if (ego_.lane == target && std::abs(ego_.x - npc.v.x) < 2.0 * cfg_.collision_gap)
                    clear = false;
                if (clear || must) {
                    npc.v.lane = target;
                    npc.v.y = npc.v.lane * cfg_.lane_width;
                } else {
                    npc.v.vx = std::max(0.0, npc.v.vx - cfg_.speed_step);
                }
            }
        }
    }

    // Advance.
    ego_.vx = ego_v;
    ego_.vy = 0.0;
    ego_.ax = (ego_v - ego_v_before) / cfg_.dt;
    ego_.ay = 0.0;
    ego_.heading = 0.0;
    ego_.x += ego_v * cfg_.dt;
    ego_.y = ego_.lane * cfg_.lane_width;
    for (Npc& npc : npcs_) npc.v.x += npc.v.speed() * cfg_.dt;

    // Ego stranded on a finished ramp gets pushed into the adjacent lane.
    if (cfg_.kind == ScenarioKind::Merge && ego_.lane == cfg_.lane_count &&
        ego_.x >= cfg_.merge_end) {
        ego_.lane -= 1;
        ego_.y = ego_.lane * cfg_.lane_width;
        out.lane_changed = true;
    }

    // Collision check.
    for (const Npc& npc : npcs_) {
        bool hit = false;
        if (npc.cross) {
            hit = npc.v.lane == ego_.lane &&
                  std::abs(ego_.x - npc.conflict_x) <= 0.5 * cfg_.collision_gap &&
                  std::abs(npc.v.x - npc.conflict_x) <= 0.5 * cfg_.collision_gap;
        } else {
            hit = npc.v.lane == ego_.lane && std::abs(npc.v.x - ego_.x) < cfg_.collision_gap;
        }
        if (hit) {
            out.collision = true;
            collision_partner_ = npc.v.id;
            break;
        }
    }

    if (out.collision) {
        out.reward = cfg_.reward_collision;
        terminal_ = true;
    } else {
        out.reward = cfg_.reward_base + cfg_.reward_speed * (ego_.speed() / cfg_.v_max) -
                     (out.lane_changed ? cfg_.reward_lane_penalty : 0.0);
    }
    out.terminal = terminal_;

    ++t_;
    rebuild_scene();
    return out;
}

void TrafficWorld::rebuild_scene() {
    scene_.kind = cfg_.kind;
    scene_.lane_count = total_lanes();
    scene_.lane_width = cfg_.lane_width;
    scene_.timestep = t_;
    scene_.ego = ego_;
    scene_.others.clear();
    scene_.others.reserve(npcs_.size());
    for (const Npc& npc : npcs_) scene_.others.push_back(npc.v);
}

SceneState make_scenario(const EnvConfig& cfg) { return TrafficWorld::make(cfg).scene(); }

}  // namespace ctrail

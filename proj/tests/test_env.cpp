#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "ctrail/env.hpp"
#include "helpers.hpp"

using namespace ctrail;

namespace {

EnvConfig empty_road() {
    EnvConfig cfg;
    cfg.density = 0.1;  // rounds to zero vehicles per lane
    return cfg;
}

}  // namespace

TEST_CASE("predict_ego_next covers every meta action") {
    EnvConfig cfg;  // dt 1, speed_step 2, v_max 40, lane_width 4
    VehicleState ego;
    ego.x = 10.0;
    ego.vx = 24.0;
    ego.lane = 1;
    ego.y = 4.0;

    const VehicleState idle = predict_ego_next(ego, MetaAction::Idle, cfg, 4);
    CHECK(idle.vx == doctest::Approx(24.0));
    CHECK(idle.x == doctest::Approx(34.0));
    CHECK(idle.ax == doctest::Approx(0.0));
    CHECK(idle.lane == 1);
    CHECK(idle.y == doctest::Approx(4.0));
    CHECK(idle.heading == 0.0);

    const VehicleState faster = predict_ego_next(ego, MetaAction::Faster, cfg, 4);
    CHECK(faster.vx == doctest::Approx(26.0));
    CHECK(faster.x == doctest::Approx(36.0));
    CHECK(faster.ax == doctest::Approx(2.0));

    const VehicleState slower = predict_ego_next(ego, MetaAction::Slower, cfg, 4);
    CHECK(slower.vx == doctest::Approx(22.0));
    CHECK(slower.x == doctest::Approx(32.0));
    CHECK(slower.ax == doctest::Approx(-2.0));

    const VehicleState left = predict_ego_next(ego, MetaAction::TurnLeft, cfg, 4);
    CHECK(left.lane == 0);
    CHECK(left.y == doctest::Approx(0.0));
    CHECK(left.vx == doctest::Approx(24.0));

    const VehicleState right = predict_ego_next(ego, MetaAction::TurnRight, cfg, 4);
    CHECK(right.lane == 2);
    CHECK(right.y == doctest::Approx(8.0));
}

TEST_CASE("predict_ego_next clamps speed and lanes") {
    EnvConfig cfg;
    VehicleState ego;
    ego.vx = 39.5;
    ego.lane = 0;
    CHECK(predict_ego_next(ego, MetaAction::Faster, cfg, 4).vx == doctest::Approx(40.0));
    CHECK(predict_ego_next(ego, MetaAction::TurnLeft, cfg, 4).lane == 0);
    ego.vx = 1.0;
    ego.lane = 3;
    CHECK(predict_ego_next(ego, MetaAction::Slower, cfg, 4).vx == doctest::Approx(0.0));
    CHECK(predict_ego_next(ego, MetaAction::TurnRight, cfg, 4).lane == 3);
}

TEST_CASE("free flow goal accumulates capped acceleration") {
    EnvConfig cfg;
    // 26+28+30+32+34+36+38+40+40+40
    CHECK(free_flow_goal(0.0, 24.0, cfg, 10) == doctest::Approx(344.0));
    CHECK(free_flow_goal(100.0, 40.0, cfg, 3) == doctest::Approx(220.0));
    CHECK(free_flow_goal(5.0, 0.0, cfg, 0) == doctest::Approx(5.0));
}

TEST_CASE("highway construction at default density") {
    EnvConfig cfg;
    cfg.seed = 5;
    const TrafficWorld w = TrafficWorld::make(cfg);
    const SceneState& s = w.scene();
    CHECK(s.kind == ScenarioKind::Highway);
    CHECK(s.lane_count == 4);
    CHECK(s.others.size() == 16);  // 2 per 100 m per lane over 200 m
    CHECK(s.ego.id == 0);
    CHECK(s.ego.lane == 2);
    CHECK(s.ego.x == 0.0);
    CHECK(s.ego.vx == doctest::Approx(24.0));
    CHECK_NOTHROW(validate_scene(s));

    std::map<int, int> per_lane;
    for (const auto& v : s.others) {
        per_lane[v.lane] += 1;
        CHECK(v.vx >= cfg.npc_speed_min);
        CHECK(v.vx <= cfg.npc_speed_max);
        CHECK(v.x > 15.0);  // spawn corridor keeps the ego start clear
    }
    for (int lane = 0; lane < 4; ++lane) CHECK(per_lane[lane] == 4);

    // In-lane spacing respects the headway floor at construction time.
    for (const auto& a : s.others)
        for (const auto& b : s.others)
            if (a.id != b.id && a.lane == b.lane)
                CHECK(std::abs(a.x - b.x) >= cfg.npc_headway);
}

TEST_CASE("construction is reproducible per seed") {
    EnvConfig cfg;
    cfg.seed = 12;
    const TrafficWorld a = TrafficWorld::make(cfg);
    const TrafficWorld b = TrafficWorld::make(cfg);
    CHECK(testutil::scene_equal(a.scene(), b.scene()));
    CHECK(testutil::scene_equal(make_scenario(cfg), a.scene()));
    cfg.seed = 13;
    CHECK_FALSE(testutil::scene_equal(TrafficWorld::make(cfg).scene(), a.scene()));
}

TEST_CASE("density controls population and infeasible packing throws") {
    EnvConfig cfg;
    cfg.density = 1.0;
    CHECK(TrafficWorld::make(cfg).scene().others.size() == 8);
    cfg.density = 0.1;
    CHECK(TrafficWorld::make(cfg).scene().others.empty());
    cfg.density = 8.0;  // slots shrink below the minimum headway
    CHECK_THROWS_AS(TrafficWorld::make(cfg), std::invalid_argument);
    cfg.density = 2.0;
    cfg.lane_count = 0;
    CHECK_THROWS_AS(TrafficWorld::make(cfg), std::invalid_argument);
}

TEST_CASE("reward structure on an empty road") {
    EnvConfig cfg = empty_road();
    cfg.ego_speed = 20.0;
    TrafficWorld w = TrafficWorld::make(cfg);

    StepOutcome out = w.step(MetaAction::Idle);
    CHECK(out.reward == doctest::Approx(0.3));  // 0.1 + 0.4 * 20/40
    CHECK_FALSE(out.terminal);
    CHECK_FALSE(out.collision);
    CHECK(w.scene().ego.x == doctest::Approx(20.0));

    out = w.step(MetaAction::TurnLeft);  // lane 2 -> 1 at unchanged speed
    CHECK(out.lane_changed);
    CHECK(out.reward == doctest::Approx(0.25));  // lane-change penalty 0.05
    CHECK(w.scene().ego.lane == 1);

    out = w.step(MetaAction::Faster);  // 20 -> 22
    CHECK(out.reward == doctest::Approx(0.1 + 0.4 * 22.0 / 40.0));
}

TEST_CASE("turns at the road edges are rejected") {
    EnvConfig cfg = empty_road();
    TrafficWorld w = TrafficWorld::make(cfg);
    REQUIRE(w.scene().ego.lane == 2);
    w.step(MetaAction::TurnLeft);
    w.step(MetaAction::TurnLeft);
    REQUIRE(w.scene().ego.lane == 0);
    StepOutcome out = w.step(MetaAction::TurnLeft);
    CHECK(out.rejected_turn);
    CHECK_FALSE(out.lane_changed);
    CHECK(w.scene().ego.lane == 0);

    for (int k = 0; k < 3; ++k) out = w.step(MetaAction::TurnRight);
    REQUIRE(w.scene().ego.lane == 3);
    out = w.step(MetaAction::TurnRight);
    CHECK(out.rejected_turn);
    CHECK(w.scene().ego.lane == 3);
}

TEST_CASE("a slow leader in the ego lane forces a collision under Idle") {
    EnvConfig cfg;
    cfg.seed = 3;
    cfg.npc_speed_min = 15.0;
    cfg.npc_speed_max = 15.0;  // ego closes at 9 m/s, slower than the collision window
    TrafficWorld w = TrafficWorld::make(cfg);
    const int ego_lane = w.scene().ego.lane;

    StepOutcome out;
    bool collided = false;
    for (int k = 0; k < 12 && !collided; ++k) {
        out = w.step(MetaAction::Idle);
        collided = out.collision;
    }
    REQUIRE(collided);
    CHECK(out.reward == doctest::Approx(-1.0));
    CHECK(out.terminal);
    CHECK(w.terminal());
    const std::int64_t partner = w.collision_partner();
    REQUIRE(partner > 0);
    const VehicleState* hit = w.scene().find(partner);
    REQUIRE(hit != nullptr);
    CHECK(hit->lane == ego_lane);
    CHECK(std::abs(hit->x - w.scene().ego.x) < cfg.collision_gap);
    CHECK_THROWS_AS(w.step(MetaAction::Idle), std::logic_error);
}

TEST_CASE("vehicles move continuously and rewards stay bounded") {
    EnvConfig cfg;
    cfg.seed = 9;
    cfg.aggressive_fraction = 0.0;
    TrafficWorld w = TrafficWorld::make(cfg);
    std::map<std::int64_t, VehicleState> prev;
    for (const auto& v : w.scene().others) prev[v.id] = v;
    int ego_lane = w.scene().ego.lane;

    const MetaAction script[] = {MetaAction::Idle,     MetaAction::Faster, MetaAction::TurnLeft,
                                 MetaAction::Slower,   MetaAction::Idle,   MetaAction::TurnRight,
                                 MetaAction::Faster,   MetaAction::Idle,   MetaAction::Slower,
                                 MetaAction::Idle};
    for (MetaAction a : script) {
        if (w.terminal()) break;
        const StepOutcome out = w.step(a);
        CHECK(out.reward >= -1.0);
        CHECK(out.reward <= 0.5);
        const auto& s = w.scene();
        CHECK(std::abs(s.ego.lane - ego_lane) <= 1);
        ego_lane = s.ego.lane;
        for (const auto& v : s.others) {
            REQUIRE(prev.count(v.id) == 1);
            const VehicleState& p = prev.at(v.id);
            CHECK(v.x >= p.x);                          // nobody reverses
            CHECK(v.x - p.x <= cfg.v_max * cfg.dt);     // nobody teleports
            CHECK(v.lane == p.lane);                    // no cut-ins when none are aggressive
            prev[v.id] = v;
        }
    }
}

TEST_CASE("merge scenario exposes a ramp lane that drains") {
    EnvConfig cfg;
    cfg.kind = ScenarioKind::Merge;
    cfg.seed = 4;
    TrafficWorld w = TrafficWorld::make(cfg);
    const SceneState& s0 = w.scene();
    CHECK(s0.lane_count == 5);  // four travel lanes plus the ramp
    CHECK(s0.ego.lane == 3);
    CHECK_NOTHROW(validate_scene(s0));
    int ramp_n = 0;
    for (const auto& v : s0.others)
        if (v.lane == 4) ++ramp_n;
    CHECK(ramp_n > 0);

    // Ramp traffic never travels past the merge point plus one step of overshoot.
    for (int k = 0; k < 20 && !w.terminal(); ++k) {
        w.step(MetaAction::Idle);
        for (const auto& v : w.scene().others)
            if (v.lane == 4) CHECK(v.x < cfg.merge_end + cfg.v_max * cfg.dt);
    }
}

TEST_CASE("aggressive traffic cuts into the ego lane") {
    EnvConfig cfg;
    cfg.seed = 1;
    cfg.aggressive_fraction = 1.0;
    cfg.npc_speed_min = 12.0;
    cfg.npc_speed_max = 12.0;
    TrafficWorld w = TrafficWorld::make(cfg);
    std::map<std::int64_t, int> spawn_lane;
    for (const auto& v : w.scene().others) spawn_lane[v.id] = v.lane;

    bool lane_change_seen = false;
    for (int k = 0; k < 12 && !w.terminal(); ++k) {
        w.step(MetaAction::Idle);
        for (const auto& v : w.scene().others)
            if (v.lane != spawn_lane.at(v.id)) {
                lane_change_seen = true;
                CHECK(v.lane == w.scene().ego.lane);  // the jump targets the ego lane
            }
        if (lane_change_seen) break;
    }
    CHECK(lane_change_seen);
}

TEST_CASE("clones evolve independently") {
    EnvConfig cfg;
    cfg.seed = 6;
    TrafficWorld w = TrafficWorld::make(cfg);
    const auto snapshot = w.scene();
    auto c = w.clone();
    c->step(MetaAction::Faster);
    CHECK(testutil::scene_equal(w.scene(), snapshot));  // original untouched
    w.step(MetaAction::Faster);
    auto* cw = dynamic_cast<TrafficWorld*>(c.get());
    REQUIRE(cw != nullptr);
    CHECK(testutil::scene_equal(w.scene(), cw->scene()));  // same action, same result
}

TEST_CASE("stepping is deterministic") {
    EnvConfig cfg;
    cfg.seed = 31;
    cfg.aggressive_fraction = 0.3;
    TrafficWorld a = TrafficWorld::make(cfg);
    TrafficWorld b = TrafficWorld::make(cfg);
    for (int k = 0; k < 8; ++k) {
        if (a.terminal()) break;
        const StepOutcome oa = a.step(MetaAction::Idle);
        const StepOutcome ob = b.step(MetaAction::Idle);
        CHECK(oa.reward == ob.reward);
        CHECK(oa.collision == ob.collision);
        CHECK(testutil::scene_equal(a.scene(), b.scene()));
    }
}

TEST_CASE("intersection and roundabout scenes carry crossing traffic") {
    for (ScenarioKind kind : {ScenarioKind::Intersection, ScenarioKind::Roundabout}) {
        EnvConfig cfg;
        cfg.kind = kind;
        cfg.seed = 8;
        const SceneState s = make_scenario(cfg);
        CHECK(s.kind == kind);
        CHECK(s.others.size() > 16);  // lane traffic plus the crossing corridor
        CHECK_NOTHROW(validate_scene(s));
    }
}

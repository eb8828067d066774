#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ctrail/domain.hpp"
#include "helpers.hpp"

using namespace ctrail;

TEST_CASE("relation names round trip") {
    for (RelationType r : all_relations()) {
        const auto back = relation_from_string(relation_name(r));
        REQUIRE(back.has_value());
        CHECK(*back == r);
    }
    CHECK(relation_name(RelationType::Ahead) == "Ahead");
    CHECK(relation_name(RelationType::RightAhead) == "RightAhead");
    CHECK(relation_name(RelationType::LeftBack) == "LeftBack");
    CHECK_FALSE(relation_from_string("TopLeft").has_value());
    CHECK_FALSE(relation_from_string("").has_value());
}

TEST_CASE("action names round trip without alias flag") {
    for (MetaAction a : all_actions()) {
        bool alias = true;
        const auto back = action_from_string(action_name(a), &alias);
        REQUIRE(back.has_value());
        CHECK(*back == a);
        CHECK_FALSE(alias);
    }
    CHECK(action_name(MetaAction::Idle) == "IDLE");
    CHECK(action_name(MetaAction::TurnLeft) == "Turn-Left");
    CHECK(action_name(MetaAction::TurnRight) == "Turn-Right");
}

TEST_CASE("action aliases normalize and set the alias flag") {
    struct Case {
        const char* text;
        MetaAction expect;
    };
    const Case cases[] = {
        {"idle", MetaAction::Idle},          {"turn_left", MetaAction::TurnLeft},
        {"LANE_LEFT", MetaAction::TurnLeft}, {"left", MetaAction::TurnLeft},
        {"lane right", MetaAction::TurnRight}, {"RIGHT", MetaAction::TurnRight},
        {"Speed-Up", MetaAction::Faster},    {"accelerate", MetaAction::Faster},
        {"slow down", MetaAction::Slower},   {"DECELERATE", MetaAction::Slower},
        {"faster", MetaAction::Faster},      {"turnright", MetaAction::TurnRight},
    };
    for (const auto& c : cases) {
        bool alias = false;
        const auto got = action_from_string(c.text, &alias);
        REQUIRE_MESSAGE(got.has_value(), c.text);
        CHECK(*got == c.expect);
        CHECK_MESSAGE(alias, c.text);
    }
    CHECK_FALSE(action_from_string("Move-Straight").has_value());
    CHECK_FALSE(action_from_string("stop").has_value());
    CHECK_FALSE(action_from_string("").has_value());
}

TEST_CASE("scenario names round trip") {
    for (ScenarioKind k : {ScenarioKind::Highway, ScenarioKind::Merge, ScenarioKind::Roundabout,
                           ScenarioKind::Intersection, ScenarioKind::Replay}) {
        const auto back = scenario_from_string(scenario_name(k));
        REQUIRE(back.has_value());
        CHECK(*back == k);
    }
    CHECK_FALSE(scenario_from_string("city").has_value());
}

TEST_CASE("ground truth relations on the three-vehicle scene") {
    const SceneState s = testutil::fig3_scene();
    CHECK(ground_truth_relation(s.ego, s.others[0]) == RelationType::RightAhead);
    CHECK(ground_truth_relation(s.ego, s.others[1]) == RelationType::Ahead);
}

TEST_CASE("ground truth lateral bands and ties") {
    VehicleState ego;
    ego.id = 1;
    ego.lane = 1;
    VehicleState other;
    other.id = 2;

    SUBCASE("same lane, zero gap counts as ahead") {
        other.lane = 1;
        other.x = 0.0;
        CHECK(ground_truth_relation(ego, other) == RelationType::Ahead);
        other.x = -0.001;
        CHECK(ground_truth_relation(ego, other) == RelationType::Back);
    }
    SUBCASE("left lane band edges") {
        other.lane = 0;
        other.x = 5.0;  // exactly at the threshold stays lateral
        CHECK(ground_truth_relation(ego, other) == RelationType::Left);
        other.x = 5.001;
        CHECK(ground_truth_relation(ego, other) == RelationType::LeftAhead);
        other.x = -5.001;
        CHECK(ground_truth_relation(ego, other) == RelationType::LeftBack);
    }
    SUBCASE("mirror symmetry across the ego lane") {
        VehicleState left = other, right = other;
        left.lane = 0;
        right.lane = 2;
        for (double dx : {-20.0, -2.0, 0.0, 2.0, 20.0}) {
            left.x = right.x = dx;
            const RelationType l = ground_truth_relation(ego, left);
            const RelationType r = ground_truth_relation(ego, right);
            if (l == RelationType::Left) CHECK(r == RelationType::Right);
            if (l == RelationType::LeftAhead) CHECK(r == RelationType::RightAhead);
            if (l == RelationType::LeftBack) CHECK(r == RelationType::RightBack);
        }
    }
}

TEST_CASE("ground truth is translation and velocity invariant") {
    const SceneState s = testutil::fig3_scene();
    for (const auto& other : s.others) {
        const RelationType base = ground_truth_relation(s.ego, other);
        VehicleState ego2 = s.ego;
        VehicleState oth2 = other;
        ego2.x += 137.5;
        ego2.y -= 12.0;
        oth2.x += 137.5;
        oth2.y -= 12.0;
        oth2.vx *= 3.0;
        oth2.ax = 9.0;
        CHECK(ground_truth_relation(ego2, oth2) == base);
    }
}

TEST_CASE("ground truth follows the ego heading") {
    VehicleState ego;
    ego.id = 1;
    ego.lane = 0;
    ego.heading = std::numbers::pi / 2.0;  // facing +y
    VehicleState other;
    other.id = 2;
    other.lane = 0;
    other.y = 10.0;
    CHECK(ground_truth_relation(ego, other) == RelationType::Ahead);
    other.y = -10.0;
    CHECK(ground_truth_relation(ego, other) == RelationType::Back);
}

TEST_CASE("heading_from_velocity") {
    CHECK(heading_from_velocity(1.0, 1.0) == doctest::Approx(std::numbers::pi / 4.0));
    CHECK(heading_from_velocity(-1.0, 0.0) == doctest::Approx(std::numbers::pi));
    CHECK(heading_from_velocity(0.0, 0.05) == 0.0);  // below the speed floor: fallback
    CHECK(heading_from_velocity(0.0, 0.05, 2.5) == 2.5);
}

TEST_CASE("scene find covers ego and others") {
    const SceneState s = testutil::fig3_scene();
    REQUIRE(s.find(659) != nullptr);
    CHECK(s.find(659)->lane == 1);
    REQUIRE(s.find(992) != nullptr);
    CHECK(s.find(992)->lane == 2);
    CHECK(s.find(555) == nullptr);
}

TEST_CASE("validate_scene accepts the reference scene") {
    CHECK_NOTHROW(validate_scene(testutil::fig3_scene()));
}

TEST_CASE("validate_scene rejections") {
    SceneState s = testutil::fig3_scene();
    SUBCASE("lane_count below one") {
        s.lane_count = 0;
        CHECK_THROWS_AS(validate_scene(s), std::invalid_argument);
    }
    SUBCASE("duplicate vehicle id") {
        s.others[0].id = 659;
        CHECK_THROWS_AS(validate_scene(s), std::invalid_argument);
    }
    SUBCASE("duplicate among others") {
        s.others[1].id = 992;
        CHECK_THROWS_AS(validate_scene(s), std::invalid_argument);
    }
    SUBCASE("lane out of range") {
        s.others[0].lane = 4;
        CHECK_THROWS_AS(validate_scene(s), std::invalid_argument);
    }
    SUBCASE("negative lane") {
        s.ego.lane = -1;
        CHECK_THROWS_AS(validate_scene(s), std::invalid_argument);
    }
    SUBCASE("non-finite kinematics") {
        s.ego.x = std::nan("");
        CHECK_THROWS_AS(validate_scene(s), std::invalid_argument);
    }
    SUBCASE("infinite velocity on an npc") {
        s.others[1].vy = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(validate_scene(s), std::invalid_argument);
    }
}

TEST_CASE("validate_graph") {
    const SceneState s = testutil::fig3_scene();
    CommonsenseGraph g;
    g.timestep = 0;
    g.edges.push_back({659, 992, RelationType::RightAhead});
    g.edges.push_back({659, 712, RelationType::Ahead});
    CHECK_NOTHROW(validate_graph(g, s));

    SUBCASE("ego id mismatch") {
        g.edges[0].ego_id = 1;
        CHECK_THROWS_AS(validate_graph(g, s), std::invalid_argument);
    }
    SUBCASE("unknown partner") {
        g.edges[0].other_id = 404;
        CHECK_THROWS_AS(validate_graph(g, s), std::invalid_argument);
    }
    SUBCASE("duplicate partner") {
        g.edges[1].other_id = 992;
        CHECK_THROWS_AS(validate_graph(g, s), std::invalid_argument);
    }
    SUBCASE("trust outside the unit interval") {
        g.trust.per_vehicle[992] = {1.5, 0.5};
        CHECK_THROWS_AS(validate_graph(g, s), std::invalid_argument);
    }
}

TEST_CASE("vehicle state derived quantities") {
    VehicleState v;
    v.vx = 3.0;
    v.vy = 4.0;
    CHECK(v.speed() == doctest::Approx(5.0));
    v.heading = 0.0;
    v.ax = 1.25;
    v.ay = 99.0;  // ignored at zero heading
    CHECK(v.long_accel() == doctest::Approx(1.25));
    v.heading = std::numbers::pi / 2.0;
    CHECK(v.long_accel() == doctest::Approx(99.0));
}

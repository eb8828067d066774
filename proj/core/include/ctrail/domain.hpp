#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctrail {

enum class RelationType : std::uint8_t {
    Ahead,
    Back,
    Left,
    Right,
    LeftAhead,
    RightAhead,
    LeftBack,
    RightBack,
};
inline constexpr int kRelationCount = 8;

enum class MetaAction : std::uint8_t {
    Idle,
    Faster,
    Slower,
    TurnLeft,
    TurnRight,
};
inline constexpr int kActionCount = 5;

constexpr std::array<RelationType, kRelationCount> all_relations() {
    return {RelationType::Ahead,     RelationType::Back,      RelationType::Left,
            RelationType::Right,     RelationType::LeftAhead, RelationType::RightAhead,
            RelationType::LeftBack,  RelationType::RightBack};
}

constexpr std::array<MetaAction, kActionCount> all_actions() {
    return {MetaAction::Idle, MetaAction::Faster, MetaAction::Slower,
            MetaAction::TurnLeft, MetaAction::TurnRight};
}

std::string_view relation_name(RelationType r);
// Canonical response spellings: IDLE, Faster, Slower, Turn-Left, Turn-Right.
std::string_view action_name(MetaAction a);
std::optional<RelationType> relation_from_string(std::string_view s);

// Accepts the canonical spelling plus common aliases (Turn_left, LANE_LEFT, lowercase...).
// alias_fired is set when the token parsed but was not the canonical spelling.
std::optional<MetaAction> action_from_string(std::string_view s, bool* alias_fired = nullptr);

enum class ScenarioKind : std::uint8_t {
    Highway,
    Merge,
    Roundabout,
    Intersection,
    Replay,
};
std::string_view scenario_name(ScenarioKind k);
std::optional<ScenarioKind> scenario_from_string(std::string_view s);

struct VehicleState {
    std::int64_t id = 0;
    double x = 0.0;
    double y = 0.0;
    double vx = 0.0;
    double vy = 0.0;
    double ax = 0.0;
    double ay = 0.0;
    double heading = 0.0;  // radians, 0 = +x
    int lane = 0;          // 0 = leftmost

    double speed() const { return std::hypot(vx, vy); }
    // Signed acceleration along the heading.
    double long_accel() const { return ax * std::cos(heading) + ay * std::sin(heading); }
};

struct SceneState {
    ScenarioKind kind = ScenarioKind::Highway;
    int lane_count = 4;
    double lane_width = 4.0;
    int timestep = 0;
    VehicleState ego;
    std::vector<VehicleState> others;

    const VehicleState* find(std::int64_t id) const;
};

// Throws std::invalid_argument on duplicate ids, out-of-range lanes or non-finite kinematics.
void validate_scene(const SceneState& scene);

struct RelationEdge {
    std::int64_t ego_id = 0;
    std::int64_t other_id = 0;
    RelationType relation = RelationType::Ahead;

    friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
};

struct VehicleTrust {
    double c_llm = 1.0;
    double c_kin = 1.0;
};

// All stored values are clamped to [0, 1] on write; raw Eq-style commonsense trust can be
// negative and is clamped at the gate.
struct TrustScores {
    std::map<std::int64_t, VehicleTrust> per_vehicle;
    double scene_llm = 1.0;
    double scene_kin = 1.0;
    double combined = 1.0;
};

struct CommonsenseGraph {
    int timestep = 0;
    std::vector<RelationEdge> edges;
    TrustScores trust;
};

// Edges must reference scene vehicles, one edge per (ego, other) pair, ego_id matching.
void validate_graph(const CommonsenseGraph& graph, const SceneState& scene);

// Deterministic geometric relation labeling. Longitudinal displacement is measured along the
// ego heading; |longitudinal| <= long_threshold with a lane offset collapses to pure Left/Right,
// a zero longitudinal gap in the same lane counts as Ahead.
RelationType ground_truth_relation(const VehicleState& ego, const VehicleState& other,
                                   double long_threshold = 5.0);

double heading_from_velocity(double vx, double vy, double fallback = 0.0);

}  // namespace ctrail

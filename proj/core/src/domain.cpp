#include "ctrail/domain.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

namespace ctrail {
namespace {

bool finite(double v) { return std::isfinite(v); }

std::string normalize_token(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '-' || c == '_' || c == ' ' || c == '\t') continue;
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace

std::string_view relation_name(RelationType r) {
    switch (r) {
        case RelationType::Ahead: return "Ahead";
        case RelationType::Back: return "Back";
        case RelationType::Left: return "Left";
        case RelationType::Right: return "Right";
        case RelationType::LeftAhead: return "LeftAhead";
        case RelationType::RightAhead: return "RightAhead";
        case RelationType::LeftBack: return "LeftBack";
        case RelationType::RightBack: return "RightBack";
    }
    return "Ahead";
}

std::string_view action_name(MetaAction a) {
    switch (a) {
        case MetaAction::Idle: return "IDLE";
        case MetaAction::Faster: return "Faster";
        case MetaAction::Slower: return "Slower";
        case MetaAction::TurnLeft: return "Turn-Left";
        case MetaAction::TurnRight: return "Turn-Right";
    }
    return "IDLE";
}

std::optional<RelationType> relation_from_string(std::string_view s) {
    for (RelationType r : all_relations()) {
        if (s == relation_name(r)) return r;
    }
    return std::nullopt;
}

std::optional<MetaAction> action_from_string(std::string_view s, bool* alias_fired) {
    if (alias_fired) *alias_fired = false;
    for (MetaAction a : all_actions()) {
        if (s == action_name(a)) return a;
    }
    const std::string key = normalize_token(s);
    std::optional<MetaAction> hit;
    if (key == "IDLE") hit = MetaAction::Idle;
    else if (key == "FASTER" || key == "SPEEDUP" || key == "ACCELERATE") hit = MetaAction::Faster;
    else if (key == "SLOWER" || key == "SLOWDOWN" || key == "DECELERATE") hit = MetaAction::Slower;
    else if (key == "TURNLEFT" || key == "LANELEFT" || key == "LEFT") hit = MetaAction::TurnLeft;
    else if (key == "TURNRIGHT" || key == "LANERIGHT" || key == "RIGHT") hit = MetaAction::TurnRight;
    if (hit && alias_fired) *alias_fired = true;
    return hit;
}

std::string_view scenario_name(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::Highway: return "highway";
        case ScenarioKind::Merge: return "merge";
        case ScenarioKind::Roundabout: return "roundabout";
        case ScenarioKind::Intersection: return "intersection";
        case ScenarioKind::Replay: return "replay";
    }
    return "highway";
}

std::optional<ScenarioKind> scenario_from_string(std::string_view s) {
    if (s == "highway") return ScenarioKind::Highway;
    if (s == "merge") return ScenarioKind::Merge;
    if (s == "roundabout") return ScenarioKind::Roundabout;
    if (s == "intersection") return ScenarioKind::Intersection;
    if (s == "replay") return ScenarioKind::Replay;
    return std::nullopt;
}

const VehicleState* SceneState::find(std::int64_t id) const {
    if (ego.id == id) return &ego;
    for (const auto& v : others) {
        if (v.id == id) return &v;
    }
    return nullptr;
}

void validate_scene(const SceneState& scene) {
    if (scene.lane_count < 1) throw std::invalid_argument("scene: lane_count < 1");
    std::set<std::int64_t> ids;
    auto check = [&](const VehicleState& v, bool is_ego) {
        if (!ids.insert(v.id).second)
            throw std::invalid_argument("scene: duplicate vehicle id " + std::to_string(v.id));
        if (v.lane < 0 || v.lane >= scene.lane_count)
            throw std::invalid_argument("scene: lane out of range for vehicle " +
                                        std::to_string(v.id));
        if (!finite(v.x) || !finite(v.y) || !finite(v.vx) || !finite(v.vy) || !finite(v.ax) ||
            !finite(v.ay) || !finite(v.heading))
            throw std::invalid_argument("scene: non-finite state for vehicle " +
                                        std::to_string(v.id));
        (void)is_ego;
    };
    check(scene.ego, true);
    for (const auto& v : scene.others) check(v, false);
}

void validate_graph(const CommonsenseGraph& graph, const SceneState& scene) {
    std::set<std::int64_t> seen;
    for (const auto& e : graph.edges) {
        if (e.ego_id != scene.ego.id)
            throw std::invalid_argument("graph: edge ego id mismatch");
        if (scene.find(e.other_id) == nullptr || e.other_id == scene.ego.id)
            throw std::invalid_argument("graph: edge references unknown vehicle " +
                                        std::to_string(e.other_id));
        if (!seen.insert(e.other_id).second)
            throw std::invalid_argument("graph: duplicate edge for vehicle " +
                                        std::to_string(e.other_id));
    }
    for (const auto& [id, tr] : graph.trust.per_vehicle) {
        (void)id;
        if (tr.c_llm < 0.0 || tr.c_llm > 1.0 || tr.c_kin < 0.0 || tr.c_kin > 1.0)
            throw std::invalid_argument("graph: trust outside [0,1]");
    }
}

double heading_from_velocity(double vx, double vy, double fallback) {
    if (std::hypot(vx, vy) < 0.1) return fallback;
    return std::atan2(vy, vx);
}

RelationType ground_truth_relation(const VehicleState& ego, const VehicleState& other,
                                   double long_threshold) {
    const double dx = other.x - ego.x;
    const double dy = other.y - ego.y;
    const double longitudinal = dx * std::cos(ego.heading) + dy * std::sin(ego.heading);
    const int dlane = other.lane - ego.lane;
    if (dlane == 0) return longitudinal >= 0.0 ? RelationType::Ahead : RelationType::Back;
    if (dlane < 0) {
        if (longitudinal > long_threshold) return RelationType::LeftAhead;
        if (longitudinal < -long_threshold) return RelationType::LeftBack;
        return RelationType::Left;
    }
    if (longitudinal > long_threshold) return RelationType::RightAhead;
    if (longitudinal < -long_threshold) return RelationType::RightBack;
    return RelationType::Right;
}

}  // namespace ctrail

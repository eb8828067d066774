#include "ctrail/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "ctrail/rng.hpp"

namespace ctrail {
namespace {

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string_view lane_count_word(int n) {
    switch (n) {
        case 1: return "one";
        case 2: return "two";
        case 3: return "three";
        case 4: return "four";
        case 5: return "five";
        case 6: return "six";
        case 7: return "seven";
        case 8: return "eight";
        case 9: return "nine";
        default: return "";
    }
}

std::string scenario_sentence(const SceneState& scene) {
    std::string lanes{lane_count_word(scene.lane_count)};
    if (lanes.empty()) lanes = std::to_string(scene.lane_count);
    switch (scene.kind) {
        case ScenarioKind::Merge:
            return "The driving scenario is a " + lanes +
                   "-lane highway with an on-ramp merging from the right.";
        case ScenarioKind::Roundabout:
            return "The driving scenario is a roundabout approach with crossing traffic.";
        case ScenarioKind::Intersection:
            return "The driving scenario is an unsignalized intersection with crossing traffic.";
        case ScenarioKind::Highway:
        case ScenarioKind::Replay:
        default:
            return "The driving scenario is a " + lanes + "-lane highway.";
    }
}

std::string positional_sentence(const VehicleState& ego, const VehicleState& other) {
    switch (ground_truth_relation(ego, other)) {
        case RelationType::Ahead:
            return "This vehicle is driving in the same lane as the ego vehicle and is "
                   "positioned ahead.";
        case RelationType::Back:
            return "This vehicle is driving in the same lane as the ego vehicle and is "
                   "positioned behind.";
        case RelationType::Left:
            return "This vehicle is positioned left of the ego vehicle.";
        case RelationType::Right:
            return "This vehicle is positioned right of the ego vehicle.";
        case RelationType::LeftAhead:
            return "This vehicle is positioned ahead and left of the ego vehicle.";
        case RelationType::RightAhead:
            return "This vehicle is positioned ahead and right of the ego vehicle.";
        case RelationType::LeftBack:
            return "This vehicle is positioned behind and left of the ego vehicle.";
        case RelationType::RightBack:
            return "This vehicle is positioned behind and right of the ego vehicle.";
    }
    return {};
}

std::string kinematics_clause(const VehicleState& v) {
    return "Its position is (" + fmt2(v.x) + ", " + fmt2(v.y) + "), with a velocity of " +
           fmt2(v.speed()) + " m/s and an acceleration of " + fmt2(v.long_accel()) + " m/s^2.";
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool iprefix(std::string_view line, std::string_view label) {
    if (line.size() < label.size()) return false;
    for (size_t i = 0; i < label.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(line[i])) != label[i]) return false;
    }
    return true;
}

std::vector<std::string> split_lines(const std::string& raw) {
    std::vector<std::string> lines;
    std::istringstream in(raw);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::optional<std::int64_t> parse_id(std::string_view s) {
    const std::string t = trim(s);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) return std::nullopt;
    return v;
}

// Splits "(a, b, c), (d, e, f)" into element lists; nullopt on bracket/paren damage.
std::optional<std::vector<std::vector<std::string>>> split_tuples(std::string_view body,
                                                                  std::string* why) {
    std::vector<std::vector<std::string>> tuples;
    size_t i = 0;
    auto skip_ws = [&] {
        while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    };
    skip_ws();
    while (i < body.size()) {
        if (body[i] != '(') {
            *why = "expected '(' in relation list";
            return std::nullopt;
        }
        const size_t close = body.find(')', i);
        if (close == std::string_view::npos) {
            *why = "unbalanced parenthesis in relation list";
            return std::nullopt;
        }
        std::vector<std::string> elems;
        std::string_view inner = body.substr(i + 1, close - i - 1);
        size_t start = 0;
        while (true) {
            const size_t comma = inner.find(',', start);
            if (comma == std::string_view::npos) {
                elems.push_back(trim(inner.substr(start)));
                break;
            }
            elems.push_back(trim(inner.substr(start, comma - start)));
            start = comma + 1;
        }
        tuples.push_back(std::move(elems));
        i = close + 1;
        skip_ws();
        if (i < body.size() && body[i] == ',') {
            ++i;
            skip_ws();
        }
    }
    return tuples;
}

MetaAction wrong_action(MetaAction right, Rng& rng) {
    int pick = rng.uniform_int(kActionCount - 1);
    if (pick >= static_cast<int>(right)) ++pick;
    return static_cast<MetaAction>(pick);
}

RelationType wrong_relation(RelationType right, Rng& rng) {
    int pick = rng.uniform_int(kRelationCount - 1);
    if (pick >= static_cast<int>(right)) ++pick;
    return static_cast<RelationType>(pick);
}

std::string render_tuples(const SceneState& scene, const std::vector<RelationEdge>& edges) {
    std::string out = "[";
    for (size_t i = 0; i < edges.size(); ++i) {
        if (i) out += ", ";
        out += "(" + std::to_string(scene.ego.id) + ", " + std::to_string(edges[i].other_id) +
               ", " + std::string(relation_name(edges[i].relation)) + ")";
    }
    return out + "]";
}

}  // namespace

std::string_view parse_error_name(ParseErrorKind k) {
    switch (k) {
        case ParseErrorKind::MissingField: return "missing_field";
        case ParseErrorKind::InvalidAction: return "invalid_action";
        case ParseErrorKind::TupleOrderError: return "tuple_order_error";
        case ParseErrorKind::IllegalRelationType: return "illegal_relation_type";
        case ParseErrorKind::MultipleActions: return "multiple_actions";
        case ParseErrorKind::Malformed: return "malformed";
        case ParseErrorKind::Transport: return "transport";
    }
    return "malformed";
}

std::string build_prompt(const SceneState& scene, std::string_view intention) {
    std::string p;
    p += "[TASK]\n";
    p += "You are given a structured description of a driving environment, including the "
         "driving scenario, the ego vehicle's intention, and a predefined set of high-level "
         "actions and relations. Your task is to analyze the provided context and generate two "
         "types of outputs:\n";
    p += "- [Action] A recommended high-level driving action selected from the available "
         "action set.\n";
    p += "- [Relations] A structured set of spatial relations between the ego vehicle and "
         "neighboring vehicles, using only the predefined relation types.\n";
    p += "\n[DRIVING SCENARIO]\n";
    p += scenario_sentence(scene) + "\n";
    p += "- Ego Vehicle [" + std::to_string(scene.ego.id) + "]: The ego vehicle is driving in "
         "lane " + std::to_string(scene.ego.lane) + ". " + kinematics_clause(scene.ego) + "\n";
    for (const auto& v : scene.others) {
        p += "- Vehicle [" + std::to_string(v.id) + "]: " + positional_sentence(scene.ego, v) +
             " " + kinematics_clause(v) + "\n";
    }
    p += "\n[INTENTION]\n";
    p += std::string(intention) + "\n";
    p += "\n[AVAILABLE ACTIONS]\n";
    p += "Exactly one high-level action must be selected from:\n";
    p += "IDLE | Turn-Right | Turn-Left | Faster | Slower\n";
    p += "\n[AVAILABLE RELATIONS]\n";
    p += "Each relation should be selected from:\n";
    p += "Ahead | Back | Left | Right | LeftAhead | RightAhead | LeftBack | RightBack\n";
    p += "\n[RESPONSE FORMAT]\n";
    p += "Action: ActionName\n";
    p += "Relation: [(Ego Vehicle ID, Surrounding Vehicle ID, Relation)]\n";
    return p;
}

OracleResponse parse_response(const std::string& raw, const SceneState& scene) {
    OracleResponse r;
    r.raw = raw;
    auto fail = [&](ParseErrorKind kind, std::string detail) {
        r.ok = false;
        r.error = kind;
        r.error_detail = std::move(detail);
        return r;
    };

    std::vector<std::string> action_values;
    std::vector<std::string> relation_values;
    for (const auto& line_raw : split_lines(raw)) {
        const std::string line = trim(line_raw);
        if (iprefix(line, "action:")) {
            action_values.push_back(trim(std::string_view(line).substr(7)));
        } else if (iprefix(line, "relation:")) {
            relation_values.push_back(trim(std::string_view(line).substr(9)));
        } else if (iprefix(line, "relations:")) {
            relation_values.push_back(trim(std::string_view(line).substr(10)));
        }
    }

    if (action_values.empty() || relation_values.empty())
        return fail(ParseErrorKind::MissingField,
                    action_values.empty() ? "no Action field" : "no Relation field");

    if (action_values.size() > 1)
        return fail(ParseErrorKind::MultipleActions, "several Action lines");
    std::vector<std::string> action_tokens;
    {
        std::string_view av = action_values.front();
        size_t start = 0;
        while (true) {
            const size_t comma = av.find(',', start);
            std::string tok = trim(comma == std::string_view::npos
                                       ? av.substr(start)
                                       : av.substr(start, comma - start));
            if (!tok.empty()) action_tokens.push_back(std::move(tok));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
    }
    if (action_tokens.size() > 1)
        return fail(ParseErrorKind::MultipleActions, action_values.front());
    if (action_tokens.empty()) return fail(ParseErrorKind::Malformed, "empty Action value");

    bool alias = false;
    const auto action = action_from_string(action_tokens.front(), &alias);
    if (!action) return fail(ParseErrorKind::InvalidAction, action_tokens.front());

    if (relation_values.size() > 1)
        return fail(ParseErrorKind::Malformed, "several Relation lines");
    const std::string& list = relation_values.front();
    if (list.size() < 2 || list.front() != '[' || list.back() != ']')
        return fail(ParseErrorKind::Malformed, "relation list not bracketed");

    std::string why;
    const auto tuples = split_tuples(std::string_view(list).substr(1, list.size() - 2), &why);
    if (!tuples) return fail(ParseErrorKind::Malformed, why);

    // Tuple-level defects, reported by precedence over the entire list.
    std::optional<std::string> order_err, relation_err, malformed_err;
    std::vector<RelationEdge> edges;
    std::set<std::int64_t> seen;
    for (const auto& elems : *tuples) {
        if (elems.size() != 3) {
            if (!malformed_err) malformed_err = "tuple arity " + std::to_string(elems.size());
            continue;
        }
        const auto first = parse_id(elems[0]);
        const auto second = parse_id(elems[1]);
        if (!first || !second) {
            if (!malformed_err) malformed_err = "non-numeric vehicle id";
            continue;
        }
        if (*first != scene.ego.id) {
            if (!order_err) order_err = "tuple starts with " + std::to_string(*first);
            continue;
        }
        const auto rel = relation_from_string(elems[2]);
        if (!rel) {
            if (!relation_err) relation_err = elems[2];
            continue;
        }
        if (*second == scene.ego.id || scene.find(*second) == nullptr) {
            if (!malformed_err) malformed_err = "unknown vehicle id " + std::to_string(*second);
            continue;
        }
        if (!seen.insert(*second).second) {
            if (!malformed_err)
                malformed_err = "duplicate tuple for vehicle " + std::to_string(*second);
            continue;
        }
        edges.push_back({scene.ego.id, *second, *rel});
    }
    if (order_err) return fail(ParseErrorKind::TupleOrderError, *order_err);
    if (relation_err) return fail(ParseErrorKind::IllegalRelationType, *relation_err);
    if (malformed_err) return fail(ParseErrorKind::Malformed, *malformed_err);

    r.ok = true;
    r.action = *action;
    r.alias_fired = alias;
    r.relations = std::move(edges);
    return r;
}

MetaAction default_action_rule(const SceneState& scene, double v_max) {
    const double ego_speed = scene.ego.speed();
    for (const auto& v : scene.others) {
        if (v.lane != scene.ego.lane) continue;
        const double dx = v.x - scene.ego.x;
        const double dy = v.y - scene.ego.y;
        const double lon =
            dx * std::cos(scene.ego.heading) + dy * std::sin(scene.ego.heading);
        if (lon > 0.0 && lon <= 20.0 && v.speed() < ego_speed) return MetaAction::Slower;
    }
    if (ego_speed < 0.8 * v_max) return MetaAction::Faster;
    return MetaAction::Idle;
}

std::string defect_template(ParseErrorKind kind, const SceneState& scene, MetaAction action,
                            const std::vector<RelationEdge>& edges) {
    const std::string act{action_name(action)};
    switch (kind) {
        case ParseErrorKind::MissingField: {
            std::string out = act + "\n[";
            for (size_t i = 0; i < edges.size(); ++i) {
                if (i) out += ", ";
                out += "(" + std::to_string(edges[i].other_id) + ", " +
                       std::string(relation_name(edges[i].relation)) + ")";
            }
            return out + "]";
        }
        case ParseErrorKind::InvalidAction:
            return "Action: Move-Straight\nRelation: " + render_tuples(scene, edges);
        case ParseErrorKind::TupleOrderError: {
            std::string out = "Action: " + act + "\nRelation: [";
            for (size_t i = 0; i < edges.size(); ++i) {
                if (i) out += ", ";
                const auto& e = edges[i];
                if (i == 0) {
                    out += "(" + std::to_string(e.other_id) + ", " + std::to_string(e.ego_id) +
                           ", " + std::string(relation_name(e.relation)) + ")";
                } else {
                    out += "(" + std::to_string(e.ego_id) + ", " + std::to_string(e.other_id) +
                           ", " + std::string(relation_name(e.relation)) + ")";
                }
            }
            return out + "]";
        }
        case ParseErrorKind::IllegalRelationType: {
            std::string out = "Action: " + act + "\nRelation: [";
            for (size_t i = 0; i < edges.size(); ++i) {
                if (i) out += ", ";
                const auto& e = edges[i];
                out += "(" + std::to_string(e.ego_id) + ", " + std::to_string(e.other_id) + ", " +
                       (i == 0 ? std::string("TopLeft")
                               : std::string(relation_name(e.relation))) +
                       ")";
            }
            return out + "]";
        }
        case ParseErrorKind::MultipleActions: {
            const auto second =
                static_cast<MetaAction>((static_cast<int>(action) + 1) % kActionCount);
            return "Action: " + act + ", " + std::string(action_name(second)) +
                   "\nRelation: " + render_tuples(scene, edges);
        }
        default:
            return "Action: " + act + "\nRelation: " + render_tuples(scene, edges);
    }
}

std::optional<std::string> MockOracle::complete(const SceneState& scene, const std::string&,
                                                std::uint64_t query_index) {
    Rng rng(derive_seed(cfg_.seed, query_index));

    MetaAction action = cfg_.action_rule ? cfg_.action_rule(scene)
                                         : default_action_rule(scene, cfg_.v_max);
    const bool confused = rng.bernoulli(cfg_.action_error_rate);
    if (confused) {
        // Systematic misreading: confused queries of the same scene agree on the same wrong
        // action, so low-quality batches carry a concentrated (not washed-out) bad vote.
        Rng scene_rng(derive_seed(cfg_.seed, 0xbadbadULL +
                                                 static_cast<std::uint64_t>(scene.timestep)));
        action = wrong_action(action, scene_rng);
    }

    const double rel_rate =
        confused ? cfg_.confused_relation_error_rate : cfg_.relation_error_rate;
    std::vector<RelationEdge> edges;
    edges.reserve(scene.others.size());
    for (const auto& v : scene.others) {
        RelationType rel = ground_truth_relation(scene.ego, v);
        if (rng.bernoulli(rel_rate)) rel = wrong_relation(rel, rng);
        edges.push_back({scene.ego.id, v.id, rel});
    }

    if (rng.bernoulli(cfg_.format_error_rate)) {
        static constexpr ParseErrorKind kWithTuples[] = {
            ParseErrorKind::MissingField, ParseErrorKind::InvalidAction,
            ParseErrorKind::TupleOrderError, ParseErrorKind::IllegalRelationType,
            ParseErrorKind::MultipleActions};
        static constexpr ParseErrorKind kNoTuples[] = {ParseErrorKind::MissingField,
                                                       ParseErrorKind::InvalidAction,
                                                       ParseErrorKind::MultipleActions};
        ParseErrorKind kind;
        if (edges.empty()) {
            kind = kNoTuples[rng.uniform_int(3)];
        } else {
            kind = kWithTuples[rng.uniform_int(5)];
        }
        return defect_template(kind, scene, action, edges);
    }

    return "Action: " + std::string(action_name(action)) +
           "\nRelation: " + render_tuples(scene, edges);
}

MetaAction QueryBatch::majority_action() const {
    int best = 0;
    for (int a = 1; a < kActionCount; ++a) {
        if (action_counts[a] > action_counts[best]) best = a;
    }
    return static_cast<MetaAction>(best);
}

QueryBatch query_batch(const SceneState& scene, OracleClient& client, int m,
                       std::uint64_t base_index) {
    QueryBatch batch;
    batch.m_requested = m;
    const std::string prompt = build_prompt(scene);
    for (int i = 0; i < m; ++i) {
        auto raw = client.complete(scene, prompt, base_index + static_cast<std::uint64_t>(i));
        OracleResponse resp;
        if (!raw) {
            resp.ok = false;
            resp.error = ParseErrorKind::Transport;
            resp.error_detail = "client failure";
        } else {
            resp = parse_response(*raw, scene);
        }
        if (resp.ok) {
            ++batch.effective_m;
            ++batch.action_counts[static_cast<int>(resp.action)];
            batch.any_alias = batch.any_alias || resp.alias_fired;
            for (const auto& e : resp.relations) {
                auto& counts = batch.relation_counts[e.other_id];
                ++counts[static_cast<int>(e.relation)];
            }
        }
        batch.responses.push_back(std::move(resp));
    }
    batch.degraded = batch.effective_m == 0;
    return batch;
}

}  // namespace ctrail

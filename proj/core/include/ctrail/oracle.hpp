#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctrail/domain.hpp"

namespace ctrail {

enum class ParseErrorKind : std::uint8_t {
    MissingField,         // E1: action or relation label absent
    InvalidAction,        // E2: action token outside the vocabulary
    TupleOrderError,      // E3: tuple does not start with the ego id
    IllegalRelationType,  // E4: relation token outside the vocabulary
    MultipleActions,      // E5: more than one action specified
    Malformed,            // anything else (brackets, arity, unknown ids, ...)
    Transport,            // client-level failure, not a parse outcome
};
std::string_view parse_error_name(ParseErrorKind k);

struct OracleResponse {
    std::string raw;
    bool ok = false;
    MetaAction action = MetaAction::Idle;
    std::vector<RelationEdge> relations;
    bool alias_fired = false;  // action parsed through a non-canonical spelling
    ParseErrorKind error = ParseErrorKind::Malformed;
    std::string error_detail;
};

std::string build_prompt(const SceneState& scene,
                         std::string_view intention = "Drive safely and avoid potential collisions.");

// Tolerant of whitespace and label casing; classification follows the fixed precedence
// MissingField > MultipleActions > InvalidAction > TupleOrderError > IllegalRelationType >
// Malformed evaluated over the whole response.
OracleResponse parse_response(const std::string& raw, const SceneState& scene);

class OracleClient {
  public:
    virtual ~OracleClient() = default;
    // query_index distinguishes the M temperature samples of one batch.
    virtual std::optional<std::string> complete(const SceneState& scene, const std::string& prompt,
                                                std::uint64_t query_index) = 0;
};

using ActionRule = std::function<MetaAction(const SceneState&)>;

// Slower if a same-lane vehicle is ahead within 20 m and closing, else Faster below 0.8 * v_max,
// else Idle.
MetaAction default_action_rule(const SceneState& scene, double v_max = 40.0);

struct MockOracleConfig {
    std::uint64_t seed = 0;
    double relation_error_rate = 0.0;
    double format_error_rate = 0.0;
    // Probability that a query is "confused": its recommendation flips to a wrong action
    // chosen per scene (so confused queries of one scene agree on the same bad action) and
    // its relations are corrupted at confused_relation_error_rate instead.
    double action_error_rate = 0.0;
    double confused_relation_error_rate = 0.9;
    double v_max = 40.0;
    ActionRule action_rule;  // defaults to default_action_rule
};

class MockOracle final : public OracleClient {
  public:
    explicit MockOracle(MockOracleConfig cfg) : cfg_(std::move(cfg)) {}
    std::optional<std::string> complete(const SceneState& scene, const std::string& prompt,
                                        std::uint64_t query_index) override;

    const MockOracleConfig& config() const { return cfg_; }

  private:
    MockOracleConfig cfg_;
};

// Renders one of the E1..E5 defect shapes around otherwise well-formed content.
std::string defect_template(ParseErrorKind kind, const SceneState& scene, MetaAction action,
                            const std::vector<RelationEdge>& edges);

struct QueryBatch {
    int m_requested = 0;
    int effective_m = 0;  // successful parses
    bool degraded = false;
    std::vector<OracleResponse> responses;
    std::map<std::int64_t, std::array<int, kRelationCount>> relation_counts;
    std::array<int, kActionCount> action_counts{};
    bool any_alias = false;

    MetaAction majority_action() const;  // declaration-order ties
};

// base_index offsets the per-query seed streams (cycle t typically passes t*m).
QueryBatch query_batch(const SceneState& scene, OracleClient& client, int m,
                       std::uint64_t base_index = 0);

struct LiveOracleConfig {
    std::string base_url;  // e.g. https://api.openai.com
    std::string api_key;
    std::string model;
    double temperature = 0.7;
    int max_tokens = 4096;
    int timeout_sec = 10;
    int retries = 1;

    // Reads CTRAIL_API_BASE / CTRAIL_API_KEY / CTRAIL_MODEL.
    static LiveOracleConfig from_env();
};

// POSTs {base_url}/v1/chat/completions with the prompt as a single user message.
std::unique_ptr<OracleClient> make_live_oracle(LiveOracleConfig cfg);

}  // namespace ctrail

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <json.hpp>

#include "ctrail/oracle.hpp"

namespace ctrail {
namespace {

std::string env_or(const char* name, const char* fallback) {
    const char* v = std::getenv(name);
    return v ? v : fallback;
}

class LiveOracle final : public OracleClient {
  public:
    explicit LiveOracle(LiveOracleConfig cfg) : cfg_(std::move(cfg)) {}

    std::optional<std::string> complete(const SceneState&, const std::string& prompt,
                                        std::uint64_t) override {
        nlohmann::json body{
            {"model", cfg_.model},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
            {"temperature", cfg_.temperature},
            {"max_tokens", cfg_.max_tokens},
        };
        const std::string payload = body.dump();
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            if (auto text = post_once(payload)) return text;
        }
        return std::nullopt;
    }

  private:
    std::optional<std::string> post_once(const std::string& payload) {
        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.timeout_sec, 0);
        client.set_read_timeout(cfg_.timeout_sec, 0);
        client.set_write_timeout(cfg_.timeout_sec, 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
        if (!res || res->status != 200) return std::nullopt;
        try {
            const auto parsed = nlohmann::json::parse(res->body);
            return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;
        }
    }

    LiveOracleConfig cfg_;
};

}  // namespace

LiveOracleConfig LiveOracleConfig::from_env() {
    LiveOracleConfig cfg;
    cfg.base_url = env_or("CTRAIL_API_BASE", "https://api.openai.com");
    cfg.api_key = env_or("CTRAIL_API_KEY", "");
    cfg.model = env_or("CTRAIL_MODEL", "gpt-4o-mini");
    return cfg;
}

std::unique_ptr<OracleClient> make_live_oracle(LiveOracleConfig cfg) {
    return std::make_unique<LiveOracle>(std::move(cfg));
}

}  // namespace ctrail

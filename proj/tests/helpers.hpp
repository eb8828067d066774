#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "ctrail/domain.hpp"
#include "ctrail/oracle.hpp"
#include "ctrail/world.hpp"

#ifndef CTRAIL_FIXTURE_DIR
#define CTRAIL_FIXTURE_DIR "tests/fixtures"
#endif

namespace testutil {

inline std::string fixture_path(const std::string& name) {
    return std::string(CTRAIL_FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Fresh scratch directory under the system temp root; wiped on creation so reruns are clean.
inline std::string scratch_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("ctrail_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

// Three-vehicle highway snapshot used across the oracle/trust/eval suites: ego 659 in lane 1
// with 992 right-ahead (lane 2) and 712 ahead (same lane). Matches the golden prompt fixture.
inline ctrail::SceneState fig3_scene() {
    ctrail::SceneState s;
    s.kind = ctrail::ScenarioKind::Highway;
    s.lane_count = 4;
    s.timestep = 0;
    s.ego = {659, 408.13, 4.0, 24.03, 0.0, -0.05, 0.0, 0.0, 1};
    s.others.push_back({992, 422.72, 8.0, 17.25, 0.0, -1.33, 0.0, 0.0, 2});
    s.others.push_back({712, 442.23, 4.0, 22.84, 0.0, -1.49, 0.0, 0.0, 1});
    return s;
}

// Deterministic two-step MDP: reward r1[a] on the first step, r2[first][a] on the second,
// terminal afterwards. Actions beyond n_actions alias onto legal ones modulo n_actions.
struct TabularMdp final : ctrail::WorldModel {
    int n_actions = 2;
    std::array<double, 5> r1{};
    std::array<std::array<double, 5>, 5> r2{};
    int depth = 0;
    int first = 0;

    std::unique_ptr<ctrail::WorldModel> clone() const override {
        return std::make_unique<TabularMdp>(*this);
    }
    ctrail::StepOutcome step(ctrail::MetaAction action) override {
        ctrail::StepOutcome out;
        const int a = static_cast<int>(action) % n_actions;
        if (depth == 0) {
            out.reward = r1[a];
            first = a;
        } else {
            out.reward = r2[first][a];
        }
        ++depth;
        out.terminal = depth >= 2;
        return out;
    }
    bool terminal() const override { return depth >= 2; }
};

// One-shot bandit: fixed per-action reward, terminal after a single step.
struct BanditWorld final : ctrail::WorldModel {
    std::array<double, 5> reward{};
    bool done = false;

    std::unique_ptr<ctrail::WorldModel> clone() const override {
        return std::make_unique<BanditWorld>(*this);
    }
    ctrail::StepOutcome step(ctrail::MetaAction action) override {
        ctrail::StepOutcome out;
        out.reward = reward[static_cast<int>(action)];
        done = true;
        out.terminal = true;
        return out;
    }
    bool terminal() const override { return done; }
};

// Oracle client that always fails at the transport level (degraded-batch scenarios).
struct DeadClient final : ctrail::OracleClient {
    std::optional<std::string> complete(const ctrail::SceneState&, const std::string&,
                                        std::uint64_t) override {
        return std::nullopt;
    }
};

// Oracle client that replays a fixed raw response regardless of the query.
struct FixedClient final : ctrail::OracleClient {
    std::string raw;
    explicit FixedClient(std::string r) : raw(std::move(r)) {}
    std::optional<std::string> complete(const ctrail::SceneState&, const std::string&,
                                        std::uint64_t) override {
        return raw;
    }
};

inline bool vehicle_equal(const ctrail::VehicleState& a, const ctrail::VehicleState& b) {
    return a.id == b.id && a.x == b.x && a.y == b.y && a.vx == b.vx && a.vy == b.vy &&
           a.ax == b.ax && a.ay == b.ay && a.heading == b.heading && a.lane == b.lane;
}

inline bool scene_equal(const ctrail::SceneState& a, const ctrail::SceneState& b) {
    if (a.kind != b.kind || a.lane_count != b.lane_count || a.lane_width != b.lane_width ||
        a.timestep != b.timestep || !vehicle_equal(a.ego, b.ego) ||
        a.others.size() != b.others.size())
        return false;
    for (std::size_t i = 0; i < a.others.size(); ++i)
        if (!vehicle_equal(a.others[i], b.others[i])) return false;
    return true;
}

}  // namespace testutil

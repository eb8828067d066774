#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctrail/env.hpp"
#include "ctrail/world.hpp"

namespace ctrail {

struct TrajectoryRecord {
    std::int64_t frame = 0;
    std::int64_t vehicle_id = 0;
    double x = 0.0, y = 0.0;
    double vx = 0.0, vy = 0.0;
    double ax = 0.0, ay = 0.0;
    int lane = 0;

    friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

inline constexpr std::string_view kCsvHeader = "frame,vehicle_id,x,y,vx,vy,ax,ay,lane";

class DataError : public std::runtime_error {
  public:
    enum class Kind { MissingColumn, BadNumeric, DuplicateKey };

    DataError(Kind kind, std::size_t line, const std::string& what)
        : std::runtime_error(what), kind(kind), line(line) {}

    Kind kind;
    std::size_t line;  // 1-based, header = line 1
};

std::vector<TrajectoryRecord> load_csv(std::istream& in);
std::vector<TrajectoryRecord> load_csv_file(const std::string& path);

// Canonical form: exact header, one record per line, shortest round-trip numerics.
std::string serialize_csv(const std::vector<TrajectoryRecord>& records);

struct ReplayEpisode {
    std::int64_t ego_id = 0;
    // frames[k] = all records of retained frame k, ego first.
    std::vector<std::vector<TrajectoryRecord>> frames;
};

// Vehicle with the longest continuous run of retained frames (ties: smaller id).
std::int64_t pick_ego(const std::vector<std::vector<TrajectoryRecord>>& frames);

// Keeps every raw_hz-th frame (1 Hz for a raw_hz recording), splits into non-overlapping
// windows of `horizon` frames and drops windows missing the ego.
std::vector<ReplayEpisode> segment_episodes(const std::vector<TrajectoryRecord>& records,
                                            int raw_hz, int horizon = 10);

std::vector<SceneState> episode_scenes(const ReplayEpisode& episode, double lane_width = 4.0);

// Non-ego vehicles are scripted from the recording; the virtual ego follows the meta-action
// kinematics. Terminal once the recorded frames are exhausted or on collision.
class ReplayWorld final : public SceneWorld {
  public:
    static ReplayWorld make(const ReplayEpisode& episode, const EnvConfig& cfg);

    std::unique_ptr<WorldModel> clone() const override;
    StepOutcome step(MetaAction action) override;
    bool terminal() const override;
    const SceneState& scene() const override { return scene_; }
    std::int64_t collision_partner() const override { return collision_partner_; }

    int frame_index() const { return k_; }
    const VehicleState& recorded_ego(int k) const;

  private:
    void compose_scene();

    std::shared_ptr<const std::vector<SceneState>> recorded_;
    EnvConfig cfg_;
    VehicleState ego_;
    SceneState scene_;
    int k_ = 0;
    bool collided_ = false;
    std::int64_t collision_partner_ = -1;
};

}  // namespace ctrail

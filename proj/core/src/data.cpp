#include "ctrail/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

namespace ctrail {
namespace {

const char* const kColumns[9] = {"frame", "vehicle_id", "x", "y", "vx", "vy", "ax", "ay", "lane"};

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view tok, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(value))
        throw DataError(DataError::Kind::BadNumeric, line,
                        "line " + std::to_string(line) + ": bad numeric '" + std::string(tok) + "'");
    return value;
}

template <class Int>
Int parse_int(std::string_view tok, std::size_t line) {
    Int value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw DataError(DataError::Kind::BadNumeric, line,
                        "line " + std::to_string(line) + ": bad integer '" + std::string(tok) + "'");
    return value;
}

void append_double(std::string& out, double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    out.append(buf, ptr);
}

}  // namespace

std::vector<TrajectoryRecord> load_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;

    if (!std::getline(in, line))
        throw DataError(DataError::Kind::MissingColumn, 1, "empty input: missing header");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        const auto cols = split_commas(line);
        for (std::size_t i = 0; i < 9; ++i) {
            if (i >= cols.size() || cols[i] != kColumns[i])
                throw DataError(DataError::Kind::MissingColumn, 1,
                                std::string("header: missing column '") + kColumns[i] + "'");
        }
        if (cols.size() != 9)
            throw DataError(DataError::Kind::MissingColumn, 1,
                            "header: expected 9 columns, got " + std::to_string(cols.size()));
    }

    std::vector<TrajectoryRecord> records;
    std::set<std::pair<std::int64_t, std::int64_t>> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_commas(line);
        if (f.size() != 9)
            throw DataError(DataError::Kind::MissingColumn, lineno,
                            "line " + std::to_string(lineno) + ": expected 9 fields, got " +
                                std::to_string(f.size()));
        TrajectoryRecord r;
        r.frame = parse_int<std::int64_t>(f[0], lineno);
        r.vehicle_id = parse_int<std::int64_t>(f[1], lineno);
        r.x = parse_double(f[2], lineno);
        r.y = parse_double(f[3], lineno);
        r.vx = parse_double(f[4], lineno);
        r.vy = parse_double(f[5], lineno);
        r.ax = parse_double(f[6], lineno);
        r.ay = parse_double(f[7], lineno);
        r.lane = parse_int<int>(f[8], lineno);
        if (!seen.emplace(r.frame, r.vehicle_id).second)
            throw DataError(DataError::Kind::DuplicateKey, lineno,
                            "line " + std::to_string(lineno) + ": duplicate (frame=" +
                                std::to_string(r.frame) + ", vehicle_id=" +
                                std::to_string(r.vehicle_id) + ")");
        records.push_back(r);
    }
    return records;
}

std::vector<TrajectoryRecord> load_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return load_csv(in);
}

std::string serialize_csv(const std::vector<TrajectoryRecord>& records) {
    std::string out(kCsvHeader);
    out.push_back('\n');
    for (const auto& r : records) {
        out += std::to_string(r.frame);
        out.push_back(',');
        out += std::to_string(r.vehicle_id);
        for (double v : {r.x, r.y, r.vx, r.vy, r.ax, r.ay}) {
            out.push_back(',');
            append_double(out, v);
        }
        out.push_back(',');
        out += std::to_string(r.lane);
        out.push_back('\n');
    }
    return out;
}

std::int64_t pick_ego(const std::vector<std::vector<TrajectoryRecord>>& frames) {
    // Longest run of consecutive retained frames; ties favour the smaller id.
    std::map<std::int64_t, int> run, best;
    for (const auto& frame : frames) {
        std::set<std::int64_t> present;
        for (const auto& r : frame) present.insert(r.vehicle_id);
        for (auto it = run.begin(); it != run.end();) {
            if (!present.count(it->first))
                it = run.erase(it);
            else
                ++it;
        }
        for (std::int64_t id : present) {
            const int len = ++run[id];
            auto& b = best[id];
            b = std::max(b, len);
        }
    }
    std::int64_t ego = -1;
    int longest = 0;
    for (const auto& [id, len] : best) {
        if (len > longest) {
            longest = len;
            ego = id;
        }
    }
    if (ego < 0) throw std::invalid_argument("pick_ego: no vehicles");
    return ego;
}

std::vector<ReplayEpisode> segment_episodes(const std::vector<TrajectoryRecord>& records,
                                            int raw_hz, int horizon) {
    if (raw_hz < 1) throw std::invalid_argument("segment_episodes: raw_hz must be >= 1");
    if (horizon < 2) throw std::invalid_argument("segment_episodes: horizon must be >= 2");

    std::map<std::int64_t, std::vector<TrajectoryRecord>> by_frame;
    for (const auto& r : records) by_frame[r.frame].push_back(r);

    std::vector<std::vector<TrajectoryRecord>> retained;
    std::size_t idx = 0;
    for (auto& [frame, rs] : by_frame) {
        if (idx % static_cast<std::size_t>(raw_hz) == 0) {
            std::sort(rs.begin(), rs.end(), [](const auto& a, const auto& b) {
                return a.vehicle_id < b.vehicle_id;
            });
            retained.push_back(rs);
        }
        ++idx;
    }
    if (retained.empty()) return {};

    const std::int64_t ego = pick_ego(retained);

    std::vector<ReplayEpisode> episodes;
    const std::size_t h = static_cast<std::size_t>(horizon);
    for (std::size_t start = 0; start + h <= retained.size(); start += h) {
        bool ego_everywhere = true;
        for (std::size_t k = start; k < start + h && ego_everywhere; ++k) {
            ego_everywhere = std::any_of(retained[k].begin(), retained[k].end(),
                                         [&](const auto& r) { return r.vehicle_id == ego; });
        }
        if (!ego_everywhere) continue;
        ReplayEpisode ep;
        ep.ego_id = ego;
        for (std::size_t k = start; k < start + h; ++k) {
            auto frame = retained[k];
            auto it = std::find_if(frame.begin(), frame.end(),
                                   [&](const auto& r) { return r.vehicle_id == ego; });
            std::rotate(frame.begin(), it, it + 1);
            ep.frames.push_back(std::move(frame));
        }
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

namespace {

VehicleState record_to_vehicle(const TrajectoryRecord& r) {
    VehicleState v;
    v.id = r.vehicle_id;
    v.x = r.x;
    v.y = r.y;
    v.vx = r.vx;
    v.vy = r.vy;
    v.ax = r.ax;
    v.ay = r.ay;
    v.lane = r.lane;
    v.heading = heading_from_velocity(r.vx, r.vy);
    return v;
}

}  // namespace

std::vector<SceneState> episode_scenes(const ReplayEpisode& episode, double lane_width) {
    if (episode.frames.empty()) throw std::invalid_argument("episode_scenes: empty episode");
    int max_lane = 0;
    for (const auto& frame : episode.frames)
        for (const auto& r : frame) max_lane = std::max(max_lane, r.lane);

    std::vector<SceneState> scenes;
    scenes.reserve(episode.frames.size());
    for (std::size_t k = 0; k < episode.frames.size(); ++k) {
        const auto& frame = episode.frames[k];
        SceneState s;
        s.kind = ScenarioKind::Replay;
        s.lane_count = max_lane + 1;
        s.lane_width = lane_width;
        s.timestep = static_cast<int>(k);
        bool have_ego = false;
        for (const auto& r : frame) {
            if (r.vehicle_id == episode.ego_id) {
                s.ego = record_to_vehicle(r);
                have_ego = true;
            } else {
                s.others.push_back(record_to_vehicle(r));
            }
        }
        if (!have_ego)
            throw std::invalid_argument("episode_scenes: ego missing from frame " +
                                        std::to_string(k));
        scenes.push_back(std::move(s));
    }
    return scenes;
}

ReplayWorld ReplayWorld::make(const ReplayEpisode& episode, const EnvConfig& cfg) {
    ReplayWorld w;
    w.recorded_ = std::make_shared<const std::vector<SceneState>>(episode_scenes(episode, cfg.lane_width));
    w.cfg_ = cfg;
    w.ego_ = w.recorded_->front().ego;
    w.k_ = 0;
    w.compose_scene();
    return w;
}

void ReplayWorld::compose_scene() {
    scene_ = (*recorded_)[static_cast<std::size_t>(k_)];
    scene_.ego = ego_;
}

std::unique_ptr<WorldModel> ReplayWorld::clone() const {
    return std::make_unique<ReplayWorld>(*this);
}

bool ReplayWorld::terminal() const {
    return collided_ || static_cast<std::size_t>(k_) + 1 >= recorded_->size();
}

const VehicleState& ReplayWorld::recorded_ego(int k) const {
    return (*recorded_)[static_cast<std::size_t>(k)].ego;
}

StepOutcome ReplayWorld::step(MetaAction action) {
    if (terminal()) throw std::logic_error("ReplayWorld::step after terminal");

    const int lane_count = scene_.lane_count;
    const bool rejected = (action == MetaAction::TurnLeft && ego_.lane == 0) ||
                          (action == MetaAction::TurnRight && ego_.lane == lane_count - 1);
    const bool lane_changed = !rejected && (action == MetaAction::TurnLeft ||
                                            action == MetaAction::TurnRight);
    ego_ = predict_ego_next(ego_, action, cfg_, lane_count);
    k_ += 1;
    compose_scene();

    StepOutcome out;
    out.rejected_turn = rejected;
    out.lane_changed = lane_changed;
    for (const auto& o : scene_.others) {
        if (o.lane == ego_.lane && std::abs(o.x - ego_.x) < cfg_.collision_gap) {
            out.collision = true;
            collision_partner_ = o.id;
            break;
        }
    }
    collided_ = out.collision;
    if (out.collision) {
        out.reward = cfg_.reward_collision;
    } else {
        out.reward = cfg_.reward_base + cfg_.reward_speed * (ego_.speed() / cfg_.v_max) -
                     (lane_changed ? cfg_.reward_lane_penalty : 0.0);
    }
    out.terminal = terminal();
    return out;
}

}  // namespace ctrail

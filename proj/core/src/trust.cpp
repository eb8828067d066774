#include "ctrail/trust.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctrail/rng.hpp"

namespace ctrail {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double commonsense_trust(const std::array<int, kRelationCount>& counts, double alpha_llm) {
    int total = 0;
    for (int c : counts) total += c;
    if (total == 0) throw std::invalid_argument("commonsense_trust: empty count vector");
    double max_p = 0.0;
    double entropy = 0.0;
    for (int c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        max_p = std::max(max_p, p);
        entropy -= p * std::log(p);
    }
    return max_p - alpha_llm * entropy;
}

std::map<std::int64_t, double> batch_commonsense_trust(const QueryBatch& batch,
                                                       double alpha_llm) {
    std::map<std::int64_t, double> out;
    for (const auto& [id, counts] : batch.relation_counts) {
        out[id] = commonsense_trust(counts, alpha_llm);
    }
    return out;
}

double kinematic_trust(const VehicleState& predicted, const VehicleState& observed,
                       const TrustConfig& cfg) {
    const double dv = std::abs(predicted.speed() - observed.speed());
    const double dacc = std::abs(predicted.long_accel() - observed.long_accel());
    const double dtheta = predicted.heading - observed.heading;
    const double lane_term = predicted.lane == observed.lane ? 1.0 : 0.0;
    const double raw = cfg.omega[0] * (1.0 - dv / cfg.v_max) +
                       cfg.omega[1] * std::exp(-cfg.lambda_acc * dacc) +
                       cfg.omega[2] * std::cos(dtheta) + cfg.omega[3] * lane_term;
    return clamp01(raw);
}

double combined_trust(double c_llm, double c_kin, const TrustConfig& cfg) {
    return clamp01(c_llm) * sigmoid(cfg.kappa * (c_kin - cfg.eta));
}

double vehicle_combined_trust(const VehicleTrust& tr, const TrustConfig& cfg) {
    return combined_trust(tr.c_llm, tr.c_kin, cfg);
}

double reward_gate(double reward, const CalibrationConfig& cfg) {
    return cfg.gamma_decay + (1.0 - cfg.gamma_decay) * sigmoid(cfg.kappa_r * reward);
}

namespace {

void finalize_scene_trust(TrustScores& out, const TrustConfig& cfg) {
    if (out.per_vehicle.empty()) {
        out.scene_llm = 1.0;
        out.scene_kin = 1.0;
    } else {
        double sum_llm = 0.0, sum_kin = 0.0;
        for (const auto& [id, tr] : out.per_vehicle) {
            (void)id;
            sum_llm += tr.c_llm;
            sum_kin += tr.c_kin;
        }
        out.scene_llm = sum_llm / static_cast<double>(out.per_vehicle.size());
        out.scene_kin = sum_kin / static_cast<double>(out.per_vehicle.size());
    }
    out.combined = combined_trust(out.scene_llm, out.scene_kin, cfg);
}

}  // namespace

TrustScores calibrate_trust(const TrustScores& prev, const FreshTrust& fresh,
                            const std::map<std::int64_t, int>& mask, double reward,
                            const CalibrationConfig& calib, const TrustConfig& cfg) {
    const double gamma_t = reward_gate(reward, calib);
    TrustScores out;
    for (const auto& [id, m_raw] : mask) {
        const double m = m_raw ? 1.0 : 0.0;
        const auto prev_it = prev.per_vehicle.find(id);
        const double prev_llm =
            prev_it != prev.per_vehicle.end() ? prev_it->second.c_llm : calib.c0;
        const double prev_kin = prev_it != prev.per_vehicle.end() ? prev_it->second.c_kin : 1.0;

        const auto fresh_it = fresh.llm.find(id);
        double llm;
        if (fresh_it != fresh.llm.end()) {
            llm = gamma_t * (m * fresh_it->second + (1.0 - m) * prev_llm) +
                  (1.0 - gamma_t) * calib.c0;
        } else {
            // No fresh commonsense evidence this cycle: pure decay toward the baseline.
            llm = gamma_t * prev_llm + (1.0 - gamma_t) * calib.c0;
        }
        const double kin = m * fresh.kin + (1.0 - m) * prev_kin;
        out.per_vehicle[id] = {clamp01(llm), clamp01(kin)};
    }
    finalize_scene_trust(out, cfg);
    return out;
}

TrustScores trust_from_fresh(const FreshTrust& fresh, const std::map<std::int64_t, int>& mask,
                             const CalibrationConfig& calib, const TrustConfig& cfg) {
    TrustScores out;
    for (const auto& [id, m] : mask) {
        const auto fresh_it = fresh.llm.find(id);
        const double llm =
            (m && fresh_it != fresh.llm.end()) ? fresh_it->second : calib.c0;
        const double kin = m ? fresh.kin : 1.0;
        out.per_vehicle[id] = {clamp01(llm), clamp01(kin)};
    }
    finalize_scene_trust(out, cfg);
    return out;
}

StateEncoder::StateEncoder(EncoderConfig cfg) : cfg_(cfg) {
    // embed_vehicle always fills the 9 kinematic feature slots; larger f just zero-pads.
    if (cfg_.d_enc < 1 || cfg_.features < 9)
        throw std::invalid_argument("encoder: bad dimensions");
    Rng rng(derive_seed(cfg_.seed, 0xe27c0de));
    const int d = cfg_.d_enc;
    const int f = cfg_.features;
    auto init = [&rng](std::vector<double>& w, int rows, int cols) {
        w.resize(static_cast<size_t>(rows) * cols);
        const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
        for (auto& v : w) v = rng.gaussian() * scale;
    };
    init(w1_, d, f);
    b1_.assign(d, 0.0);
    init(w2_, d, d);
    b2_.assign(d, 0.0);
    for (auto& row : relation_table_) {
        row.resize(d);
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& v : row) v = rng.gaussian() * scale;
    }
}

std::vector<double> StateEncoder::embed_vehicle(const VehicleState& v,
                                                const VehicleState& ego) const {
    const int d = cfg_.d_enc;
    const int f = cfg_.features;
    std::vector<double> x(f, 0.0);
    x[0] = (v.x - ego.x) / 100.0;
    x[1] = (v.y - ego.y) / 100.0;
    x[2] = v.vx / 40.0;
    x[3] = v.vy / 40.0;
    x[4] = v.ax / 10.0;
    x[5] = v.ay / 10.0;
    x[6] = v.heading;
    x[7] = static_cast<double>(v.lane - ego.lane);
    x[8] = v.id == ego.id ? 1.0 : 0.0;

    std::vector<double> h(d, 0.0);
    for (int i = 0; i < d; ++i) {
        double acc = b1_[i];
        for (int j = 0; j < f; ++j) acc += w1_[static_cast<size_t>(i) * f + j] * x[j];
        h[i] = std::tanh(acc);
    }
    std::vector<double> out(d, 0.0);
    for (int i = 0; i < d; ++i) {
        double acc = b2_[i];
        for (int j = 0; j < d; ++j) acc += w2_[static_cast<size_t>(i) * d + j] * h[j];
        out[i] = acc;
    }
    return out;
}

std::vector<double> StateEncoder::encode(const SceneState& scene, const CommonsenseGraph& graph,
                                         const TrustConfig& cfg) const {
    const int d = cfg_.d_enc;
    const std::vector<double> ego_emb = embed_vehicle(scene.ego, scene.ego);
    if (scene.others.empty()) return ego_emb;

    std::map<std::int64_t, const VehicleState*> ordered;
    for (const auto& v : scene.others) ordered[v.id] = &v;

    std::map<std::int64_t, RelationType> edge_of;
    for (const auto& e : graph.edges) edge_of[e.other_id] = e.relation;

    std::vector<std::vector<double>> values;
    values.reserve(ordered.size());
    for (const auto& [id, vptr] : ordered) {
        std::vector<double> val = embed_vehicle(*vptr, scene.ego);
        const auto edge_it = edge_of.find(id);
        if (edge_it != edge_of.end()) {
            double weight = 1.0;
            const auto tr_it = graph.trust.per_vehicle.find(id);
            if (tr_it != graph.trust.per_vehicle.end())
                weight = vehicle_combined_trust(tr_it->second, cfg);
            const auto& rel = relation_table_[static_cast<int>(edge_it->second)];
            for (int i = 0; i < d; ++i) val[i] += weight * rel[i];
        }
        values.push_back(std::move(val));
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> scores(values.size(), 0.0);
    double max_score = -1e300;
    for (size_t i = 0; i < values.size(); ++i) {
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += ego_emb[j] * values[i][j];
        scores[i] = dot * inv_sqrt_d;
        max_score = std::max(max_score, scores[i]);
    }
    double z = 0.0;
    for (auto& s : scores) {
        s = std::exp(s - max_score);
        z += s;
    }
    std::vector<double> out(d, 0.0);
    for (size_t i = 0; i < values.size(); ++i) {
        const double w = scores[i] / z;
        for (int j = 0; j < d; ++j) out[j] += w * values[i][j];
    }
    return out;
}

}  // namespace ctrail

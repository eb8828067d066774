#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "ctrail/domain.hpp"
#include "ctrail/oracle.hpp"

namespace ctrail {

struct TrustConfig {
    double alpha_llm = 0.3;
    std::array<double, 4> omega{0.25, 0.25, 0.25, 0.25};
    double lambda_acc = 0.5;
    double v_max = 40.0;
    double eta = 0.5;    // feasibility threshold
    double kappa = 10.0; // gate steepness
};

struct CalibrationConfig {
    double gamma_decay = 0.95;
    double kappa_r = 1.0;
    double c0 = 0.5;
    double sensor_radius = 100.0;
};

double sigmoid(double x);
double clamp01(double v);

// Cross-query consistency with entropy penalty; natural log, 0*log 0 = 0. Raw value, may be
// negative; callers clamp at the gate. counts must not be all zero.
double commonsense_trust(const std::array<int, kRelationCount>& counts, double alpha_llm);

// Per-vehicle raw commonsense trust for every vehicle with at least one parsed relation.
std::map<std::int64_t, double> batch_commonsense_trust(const QueryBatch& batch,
                                                       double alpha_llm);

// Feasibility of a recommendation: predicted next ego state vs the observed one. Clamped [0,1].
double kinematic_trust(const VehicleState& predicted, const VehicleState& observed,
                       const TrustConfig& cfg);

// C = clamp01(c_llm) * sigmoid(kappa * (c_kin - eta)).
double combined_trust(double c_llm, double c_kin, const TrustConfig& cfg);

double vehicle_combined_trust(const VehicleTrust& tr, const TrustConfig& cfg);

// Fresh per-cycle measurements. llm entries exist only for vehicles the batch actually covered;
// kin is computed once per scene for the recommended action and shared across vehicles.
struct FreshTrust {
    std::map<std::int64_t, double> llm;  // raw Eq-5 values
    double kin = 1.0;
};

double reward_gate(double reward, const CalibrationConfig& cfg);  // gamma_t

// One calibration step. mask holds an entry per vehicle in the current scene (1 = within sensor
// radius); vehicles absent from mask are dropped, vehicles without history start from c0.
// Commonsense trust decays toward c0, kinematic trust is replaced under the mask without decay.
TrustScores calibrate_trust(const TrustScores& prev, const FreshTrust& fresh,
                            const std::map<std::int64_t, int>& mask, double reward,
                            const CalibrationConfig& calib, const TrustConfig& cfg);

// Trust state built directly from fresh measurements (t = 0 and the no-update ablation).
TrustScores trust_from_fresh(const FreshTrust& fresh, const std::map<std::int64_t, int>& mask,
                             const CalibrationConfig& calib, const TrustConfig& cfg);

struct EncoderConfig {
    std::uint64_t seed = 0;
    int d_enc = 128;
    int features = 9;
};

// Fixed random weights (seeded, never trained): a two-layer tanh MLP embeds each vehicle, a
// relation-embedding table is scaled by per-relation trust, and single-head scaled dot-product
// attention with the ego embedding as query pools the set. Vehicles are processed in id order so
// the output is bitwise permutation-invariant.
class StateEncoder {
  public:
    explicit StateEncoder(EncoderConfig cfg);

    std::vector<double> encode(const SceneState& scene, const CommonsenseGraph& graph,
                               const TrustConfig& cfg) const;

    const EncoderConfig& config() const { return cfg_; }

  private:
    std::vector<double> embed_vehicle(const VehicleState& v, const VehicleState& ego) const;

    EncoderConfig cfg_;
    std::vector<double> w1_, b1_, w2_, b2_;
    std::array<std::vector<double>, kRelationCount> relation_table_;
};

}  // namespace ctrail

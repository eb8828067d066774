#include "ctrail/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ctrail {
namespace {

void check_distribution(const std::array<double, 5>& p, const char* label) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(label) + ": negative or non-finite mass");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(label) + ": probabilities sum to " +
                                    std::to_string(sum));
}

}  // namespace

AdeFde ade_fde(const std::vector<Point>& planned, const std::vector<Point>& reference) {
    if (planned.empty() || planned.size() != reference.size())
        throw std::invalid_argument("ade_fde: trajectories must have equal nonzero length");
    double sum = 0.0, last = 0.0;
    for (std::size_t i = 0; i < planned.size(); ++i) {
        last = std::hypot(planned[i].first - reference[i].first,
                          planned[i].second - reference[i].second);
        sum += last;
    }
    return {sum / static_cast<double>(planned.size()), last};
}

bool success(double final_error, bool collided, double delta) {
    return !collided && final_error <= delta;
}

RpaResult rpa(const std::vector<RelationEdge>& predicted, const SceneState& scene) {
    RpaResult r;
    for (const auto& edge : predicted) {
        const VehicleState* other = scene.find(edge.other_id);
        if (!other) continue;  // unmatchable edge: no ground truth to score against
        r.add(edge.relation == ground_truth_relation(scene.ego, *other));
    }
    return r;
}

double trust_loss(const std::vector<TrustSample>& samples) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : samples) {
        const double d = s.q - s.ret;
        sum += s.trust * d * d;
    }
    return sum / static_cast<double>(samples.size());
}

std::array<double, 5> softmax_q(const std::array<double, 5>& q, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("softmax_q: temperature must be > 0");
    const double hi = *std::max_element(q.begin(), q.end());
    std::array<double, 5> out{};
    double z = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        out[i] = std::exp((q[i] - hi) / temperature);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

double kl_divergence(const std::array<double, 5>& p, const std::array<double, 5>& q) {
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;  // 0·ln 0 = 0
        if (q[i] <= 0.0) throw std::invalid_argument("kl_divergence: zero mass in reference");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

double advantage(const std::array<double, 5>& q, const std::array<double, 5>& pi, int action) {
    if (action < 0 || action >= 5) throw std::invalid_argument("advantage: bad action index");
    double baseline = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) baseline += pi[i] * q[i];
    return q[static_cast<std::size_t>(action)] - baseline;
}

double policy_loss(const std::vector<PolicySample>& samples, const LossConfig& cfg) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : samples) {
        check_distribution(s.pi_new, "policy_loss pi_new");
        check_distribution(s.pi_old, "policy_loss pi_old");
        if (s.action < 0 || s.action >= 5)
            throw std::invalid_argument("policy_loss: bad action index");
        const auto a = static_cast<std::size_t>(s.action);
        if (s.pi_old[a] <= 0.0)
            throw std::invalid_argument("policy_loss: pi_old(action) = 0, undefined ratio");
        const double rho = s.pi_new[a] / s.pi_old[a];
        const double clipped =
            std::clamp(rho, 1.0 - cfg.epsilon_clip, 1.0 + cfg.epsilon_clip);
        const double surrogate = std::min(rho * s.advantage, clipped * s.advantage);
        const auto pi_q = softmax_q(s.q, cfg.softmax_temperature);
        sum += -s.trust * surrogate + cfg.lambda_kl * kl_divergence(s.pi_new, pi_q);
    }
    return sum / static_cast<double>(samples.size());
}

double total_loss(double trust_term, double policy_term, const LossConfig& cfg) {
    return cfg.lambda_trust * trust_term + cfg.lambda_policy * policy_term;
}

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    a.count = static_cast<int>(values.size());
    if (values.empty()) return a;
    a.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return a;
}

}  // namespace ctrail

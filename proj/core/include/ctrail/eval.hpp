#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "ctrail/domain.hpp"

namespace ctrail {

struct LossConfig {
    double lambda_trust = 1.0;
    double lambda_policy = 1.0;
    double epsilon_clip = 0.2;
    double lambda_kl = 0.01;
    double softmax_temperature = 1.0;
    double gamma = 0.99;
};

struct MetricReport {
    double ade = 0.0;
    double fde = 0.0;
    double sr = 0.0;
    double rpa = 0.0;
    int episode_count = 0;
};

using Point = std::pair<double, double>;

struct AdeFde {
    double ade = 0.0;
    double fde = 0.0;
};

AdeFde ade_fde(const std::vector<Point>& planned, const std::vector<Point>& reference);

// No collision and final displacement error within delta (inclusive).
bool success(double final_error, bool collided, double delta = 2.0);

struct RpaResult {
    long long correct = 0;
    long long total = 0;
    bool empty() const { return total == 0; }
    double value() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }

    void add(bool match) {
        total += 1;
        if (match) correct += 1;
    }
    RpaResult& operator+=(const RpaResult& o) {
        correct += o.correct;
        total += o.total;
        return *this;
    }
};

RpaResult rpa(const std::vector<RelationEdge>& predicted, const SceneState& scene);

struct TrustSample {
    double q = 0.0;
    double ret = 0.0;
    double trust = 0.0;
};

double trust_loss(const std::vector<TrustSample>& samples);

struct PolicySample {
    std::array<double, 5> pi_new{};
    std::array<double, 5> pi_old{};
    std::array<double, 5> q{};
    int action = 0;
    double advantage = 0.0;
    double trust = 0.0;
};

std::array<double, 5> softmax_q(const std::array<double, 5>& q, double temperature);
double kl_divergence(const std::array<double, 5>& p, const std::array<double, 5>& q);
double advantage(const std::array<double, 5>& q, const std::array<double, 5>& pi, int action);

double policy_loss(const std::vector<PolicySample>& samples, const LossConfig& cfg);
double total_loss(double trust_term, double policy_term, const LossConfig& cfg);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample stddev, 0 for n < 2
    int count = 0;
};

Aggregate aggregate(const std::vector<double>& values);

}  // namespace ctrail

#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "ctrail/oracle.hpp"
#include "ctrail/world.hpp"

namespace ctrail {

struct DirichletParams {
    std::array<double, kActionCount> alpha{};
};

enum class PolicyMode : std::uint8_t { Mean, Sample };

enum class SelectionRule : std::uint8_t {
    TrustPuct,  // Q + lambda * C * pi * sqrt(N(h)) / (1 + N(h,a))
    PlainUcb,   // Q + lambda * sqrt(N(h)) / (1 + N(h,a)); no-prior ablation
    QOnly,      // Q alone; prior term omitted entirely
};

// f(a) = count(a) / effective_m + eps; a degraded batch yields the uniform eps vector.
std::array<double, kActionCount> action_frequencies(const QueryBatch& batch, double eps);

DirichletParams dirichlet_target(const std::array<double, kActionCount>& freq, double trust,
                                 double beta);

// prev absent (t = 0) adopts the target outright.
DirichletParams update_dirichlet_ema(const DirichletParams* prev, const DirichletParams& target,
                                     double gamma_diri);

class Rng;
// Mean: alpha / sum(alpha). Sample: normalized per-component Gamma(alpha_i, 1) draws.
std::array<double, kActionCount> policy_from_params(const DirichletParams& params,
                                                    PolicyMode mode, Rng* rng);

struct ActionStats {
    int n = 0;
    double q = 0.0;
};

struct NodeStats {
    int n = 0;
    std::array<ActionStats, kActionCount> arm{};
};

struct SearchTrace {
    // (node key, action, backpropagated return) per simulate unwind step.
    std::vector<std::tuple<std::uint64_t, int, double>> backprops;
};

struct SearchConfig {
    int simulations = 50;
    int depth_cap = 10;
    double gamma = 0.99;
    double tau = 0.01;
    double lambda_uct = 1.0;
    SelectionRule rule = SelectionRule::TrustPuct;
    std::uint64_t seed = 0;
    SearchTrace* trace = nullptr;  // optional diagnostics, not owned
};

// Ties: score, then prior pi (all rules), then declaration order.
int puct_select(const NodeStats& node, const std::array<double, kActionCount>& policy,
                double trust, double lambda, SelectionRule rule);

struct PlanResult {
    MetaAction action = MetaAction::Idle;
    std::array<double, kActionCount> policy{};
    double trust = 0.0;
    std::array<int, kActionCount> root_visits{};
    std::array<double, kActionCount> root_q{};
    int expansions = 0;
};

// Runs K simulations from a pre-expanded root; the world handle is cloned per simulation.
// Final action maximizes root visit count (ties: higher Q, then declaration order).
PlanResult plan(const WorldModel& world, const std::array<double, kActionCount>& policy,
                double trust, const SearchConfig& cfg);

}  // namespace ctrail

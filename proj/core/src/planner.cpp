#include "ctrail/planner.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "ctrail/rng.hpp"

namespace ctrail {
namespace {

constexpr std::uint64_t kRootKey = 0;

// Action-history key: base-(kActionCount+1) digits, root = 0. Depth is bounded by the cap,
// so this never overflows.
std::uint64_t child_key(std::uint64_t key, int action) {
    return key * (kActionCount + 1) + static_cast<std::uint64_t>(action) + 1;
}

void validate_params(const DirichletParams& p) {
    for (double a : p.alpha) {
        if (!(a > 0.0) || !std::isfinite(a))
            throw std::invalid_argument("dirichlet: alpha must be positive and finite");
    }
}

}  // namespace

std::array<double, kActionCount> action_frequencies(const QueryBatch& batch, double eps) {
    std::array<double, kActionCount> f{};
    if (batch.degraded) {
        f.fill(eps);
        return f;
    }
    for (int a = 0; a < kActionCount; ++a) {
        f[a] = static_cast<double>(batch.action_counts[a]) /
                   static_cast<double>(batch.effective_m) +
               eps;
    }
    return f;
}

DirichletParams dirichlet_target(const std::array<double, kActionCount>& freq, double trust,
                                 double beta) {
    const double scale = 1.0 + beta * std::clamp(trust, 0.0, 1.0);
    DirichletParams p;
    for (int a = 0; a < kActionCount; ++a) p.alpha[a] = freq[a] * scale;
    return p;
}

DirichletParams update_dirichlet_ema(const DirichletParams* prev, const DirichletParams& target,
                                     double gamma_diri) {
    if (prev == nullptr) return target;
    DirichletParams p;
    for (int a = 0; a < kActionCount; ++a)
        p.alpha[a] = (1.0 - gamma_diri) * prev->alpha[a] + gamma_diri * target.alpha[a];
    return p;
}

std::array<double, kActionCount> policy_from_params(const DirichletParams& params,
                                                    PolicyMode mode, Rng* rng) {
    validate_params(params);
    std::array<double, kActionCount> pi{};
    if (mode == PolicyMode::Mean) {
        double sum = 0.0;
        for (double a : params.alpha) sum += a;
        for (int i = 0; i < kActionCount; ++i) pi[i] = params.alpha[i] / sum;
        return pi;
    }
    if (rng == nullptr) throw std::invalid_argument("policy: Sample mode needs an rng");
    double sum = 0.0;
    for (int i = 0; i < kActionCount; ++i) {
        std::gamma_distribution<double> gamma(params.alpha[i], 1.0);
        pi[i] = gamma(rng->engine());
        sum += pi[i];
    }
    if (sum <= 0.0) {
        pi.fill(1.0 / kActionCount);
        return pi;
    }
    for (auto& v : pi) v /= sum;
    return pi;
}

int puct_select(const NodeStats& node, const std::array<double, kActionCount>& policy,
                double trust, double lambda, SelectionRule rule) {
    const double sqrt_n = std::sqrt(static_cast<double>(node.n));
    int best = 0;
    double best_score = -1e300;
    double best_prior = -1e300;
    for (int a = 0; a < kActionCount; ++a) {
        const ActionStats& st = node.arm[a];
        double score = st.q;
        switch (rule) {
            case SelectionRule::TrustPuct:
                score += lambda * trust * policy[a] * sqrt_n / (1.0 + st.n);
                break;
            case SelectionRule::PlainUcb:
                score += lambda * sqrt_n / (1.0 + st.n);
                break;
            case SelectionRule::QOnly:
                break;
        }
        if (score > best_score ||
            (score == best_score && policy[a] > best_prior)) {
            best = a;
            best_score = score;
            best_prior = policy[a];
        }
    }
    return best;
}

PlanResult plan(const WorldModel& world, const std::array<double, kActionCount>& policy,
                double trust, const SearchConfig& cfg) {
    if (cfg.simulations < 1) throw std::invalid_argument("plan: simulations < 1");
    if (cfg.depth_cap < 1) throw std::invalid_argument("plan: depth_cap < 1");

    std::unordered_map<std::uint64_t, NodeStats> tree;
    tree.emplace(kRootKey, NodeStats{});
    Rng rng(cfg.seed);
    int expansions = 0;

    auto rollout = [&](WorldModel& w, int depth, double disc_global) {
        double ret = 0.0;
        double disc = 1.0;
        while (depth < cfg.depth_cap && disc_global >= cfg.tau && !w.terminal()) {
            const auto a = static_cast<MetaAction>(rng.uniform_int(kActionCount));
            const StepOutcome out = w.step(a);
            ret += disc * out.reward;
            disc *= cfg.gamma;
            disc_global *= cfg.gamma;
            ++depth;
        }
        return ret;
    };

    std::function<double(WorldModel&, std::uint64_t, int, double)> simulate =
        [&](WorldModel& w, std::uint64_t key, int depth, double disc_global) -> double {
        if (depth >= cfg.depth_cap || disc_global < cfg.tau || w.terminal()) return 0.0;
        auto it = tree.find(key);
        if (it == tree.end()) {
            tree.emplace(key, NodeStats{});
            ++expansions;
            return rollout(w, depth, disc_global);
        }
        const int a = puct_select(it->second, policy, trust, cfg.lambda_uct, cfg.rule);
        const StepOutcome out = w.step(static_cast<MetaAction>(a));
        const double ret =
            out.reward +
            cfg.gamma * simulate(w, child_key(key, a), depth + 1, disc_global * cfg.gamma);
        NodeStats& node = tree[key];  // re-fetch: recursion may rehash
        ActionStats& arm = node.arm[a];
        node.n += 1;
        arm.n += 1;
        arm.q += (ret - arm.q) / arm.n;
        if (cfg.trace) cfg.trace->backprops.emplace_back(key, a, ret);
        return ret;
    };

    for (int k = 0; k < cfg.simulations; ++k) {
        auto w = world.clone();
        simulate(*w, kRootKey, 0, 1.0);
    }

    PlanResult result;
    result.policy = policy;
    result.trust = trust;
    result.expansions = expansions;
    const NodeStats& root = tree[kRootKey];
    int best = 0;
    for (int a = 0; a < kActionCount; ++a) {
        result.root_visits[a] = root.arm[a].n;
        result.root_q[a] = root.arm[a].q;
        if (a == 0) continue;
        if (root.arm[a].n > root.arm[best].n ||
            (root.arm[a].n == root.arm[best].n && root.arm[a].q > root.arm[best].q)) {
            best = a;
        }
    }
    result.action = static_cast<MetaAction>(best);
    return result;
}

}  // namespace ctrail

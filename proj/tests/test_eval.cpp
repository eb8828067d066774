#include <doctest.h>

#include <cmath>

#include "ctrail/eval.hpp"
#include "helpers.hpp"

using namespace ctrail;

TEST_CASE("ade_fde averages pointwise displacement and keeps the endpoint") {
    const std::vector<Point> planned{{0, 0}, {1, 0}, {2, 0}};
    SUBCASE("single deviating waypoint") {
        const std::vector<Point> ref{{0, 0}, {1, 1}, {2, 0}};
        const AdeFde m = ade_fde(planned, ref);
        CHECK(m.ade == doctest::Approx(1.0 / 3.0));
        CHECK(m.fde == doctest::Approx(0.0));
    }
    SUBCASE("constant 3-4-5 offset") {
        std::vector<Point> ref;
        for (const auto& p : planned) ref.push_back({p.first + 3.0, p.second + 4.0});
        const AdeFde m = ade_fde(planned, ref);
        CHECK(m.ade == doctest::Approx(5.0));
        CHECK(m.fde == doctest::Approx(5.0));
    }
    SUBCASE("length mismatch and empty input throw") {
        CHECK_THROWS_AS(ade_fde(planned, {{0, 0}}), std::invalid_argument);
        CHECK_THROWS_AS(ade_fde({}, {}), std::invalid_argument);
    }
}

TEST_CASE("success is inclusive at the displacement threshold") {
    CHECK(success(2.0, false));
    CHECK_FALSE(success(2.0 + 1e-9, false));
    CHECK_FALSE(success(0.0, true));  // collisions always fail
    CHECK(success(4.9, false, 5.0));
}

TEST_CASE("rpa scores predicted edges against scene geometry") {
    const SceneState scene = testutil::fig3_scene();
    SUBCASE("all correct") {
        const std::vector<RelationEdge> edges{
            {scene.ego.id, 992, RelationType::RightAhead},
            {scene.ego.id, 712, RelationType::Ahead},
        };
        const RpaResult r = rpa(edges, scene);
        CHECK(r.correct == 2);
        CHECK(r.total == 2);
        CHECK(r.value() == doctest::Approx(1.0));
    }
    SUBCASE("one wrong edge gives two thirds") {
        const std::vector<RelationEdge> edges{
            {scene.ego.id, 992, RelationType::RightAhead},
            {scene.ego.id, 712, RelationType::Ahead},
            {scene.ego.id, 992, RelationType::Left},
        };
        CHECK(rpa(edges, scene).value() == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("edges to unknown vehicles are unmatchable, not wrong") {
        const std::vector<RelationEdge> edges{
            {scene.ego.id, 555, RelationType::Ahead},
        };
        const RpaResult r = rpa(edges, scene);
        CHECK(r.empty());
        CHECK(r.value() == doctest::Approx(0.0));
    }
    SUBCASE("accumulation merges counters") {
        RpaResult a;
        a.add(true);
        a.add(false);
        RpaResult b;
        b.add(true);
        a += b;
        CHECK(a.correct == 2);
        CHECK(a.total == 3);
    }
}

TEST_CASE("trust_loss is the trust-weighted squared value error") {
    CHECK(trust_loss({}) == doctest::Approx(0.0));
    CHECK(trust_loss({{1.0, 0.0, 0.5}}) == doctest::Approx(0.5));
    // Mean of 1.0*(2-1)^2 and 0.0*(7-0)^2: zero trust mutes the second sample.
    CHECK(trust_loss({{2.0, 1.0, 1.0}, {7.0, 0.0, 0.0}}) == doctest::Approx(0.5));
}

TEST_CASE("softmax_q normalizes and shifts cleanly") {
    const auto uniform = softmax_q({0, 0, 0, 0, 0}, 1.0);
    for (double v : uniform) CHECK(v == doctest::Approx(0.2));

    const std::array<double, 5> q{std::log(1.0), std::log(2.0), std::log(3.0), std::log(4.0),
                                  std::log(10.0)};
    const auto p = softmax_q(q, 1.0);
    CHECK(p[0] == doctest::Approx(1.0 / 20.0));
    CHECK(p[4] == doctest::Approx(10.0 / 20.0));

    std::array<double, 5> shifted = q;
    for (double& v : shifted) v += 7.0;
    const auto p2 = softmax_q(shifted, 1.0);
    for (int i = 0; i < 5; ++i) CHECK(p2[i] == doctest::Approx(p[i]).epsilon(1e-12));

    // Max subtraction keeps huge logits finite.
    const auto big = softmax_q({1000.0, 0.0, 0.0, 0.0, 0.0}, 1.0);
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));

    CHECK_THROWS_AS(softmax_q(q, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax_q(q, -1.0), std::invalid_argument);
}

TEST_CASE("kl_divergence follows the usual conventions") {
    const std::array<double, 5> onehot{0, 1, 0, 0, 0};
    const std::array<double, 5> half{0.5, 0.5, 0, 0, 0};
    CHECK(kl_divergence(onehot, half) == doctest::Approx(std::log(2.0)));
    CHECK(kl_divergence(half, half) == doctest::Approx(0.0));
    // Nonnegative for a generic pair.
    const std::array<double, 5> p{0.1, 0.2, 0.3, 0.15, 0.25};
    const std::array<double, 5> q{0.3, 0.3, 0.2, 0.1, 0.1};
    CHECK(kl_divergence(p, q) >= 0.0);
    CHECK(kl_divergence(q, p) >= 0.0);
    // Reference must cover the support.
    CHECK_THROWS_AS(kl_divergence(onehot, {1, 0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("advantage subtracts the policy baseline") {
    const std::array<double, 5> q{1, 2, 3, 4, 5};
    const std::array<double, 5> uniform{0.2, 0.2, 0.2, 0.2, 0.2};
    CHECK(advantage(q, uniform, 4) == doctest::Approx(2.0));
    CHECK(advantage(q, uniform, 0) == doctest::Approx(-2.0));
    CHECK_THROWS_AS(advantage(q, uniform, 5), std::invalid_argument);
    CHECK_THROWS_AS(advantage(q, uniform, -1), std::invalid_argument);
}

namespace {

PolicySample base_sample() {
    PolicySample s;
    s.pi_new = {0.2, 0.2, 0.2, 0.2, 0.2};
    s.pi_old = {0.2, 0.2, 0.2, 0.2, 0.2};
    s.q = {0, 0, 0, 0, 0};
    s.action = 0;
    s.advantage = 1.0;
    s.trust = 1.0;
    return s;
}

}  // namespace

TEST_CASE("policy_loss matches hand-computed surrogates") {
    LossConfig cfg;

    SUBCASE("unit ratio, zero KL") {
        // rho = 1, surrogate = advantage, KL(uniform || softmax(0)) = 0.
        CHECK(policy_loss({base_sample()}, cfg) == doctest::Approx(-1.0));
    }
    SUBCASE("ratio above the clip ceiling") {
        PolicySample s = base_sample();
        s.pi_new = {0.4, 0.15, 0.15, 0.15, 0.15};
        cfg.lambda_kl = 0.0;
        // rho = 2 clipped to 1.2 with positive advantage.
        CHECK(policy_loss({s}, cfg) == doctest::Approx(-1.2));
    }
    SUBCASE("negative advantage takes the pessimistic unclipped branch") {
        PolicySample s = base_sample();
        s.pi_new = {0.4, 0.15, 0.15, 0.15, 0.15};
        s.advantage = -1.0;
        cfg.lambda_kl = 0.0;
        // min(2 * -1, 1.2 * -1) = -2, negated by the loss sign.
        CHECK(policy_loss({s}, cfg) == doctest::Approx(2.0));
    }
    SUBCASE("trust scales the surrogate term") {
        PolicySample s = base_sample();
        s.trust = 0.5;
        CHECK(policy_loss({s}, cfg) == doctest::Approx(-0.5));
    }
    SUBCASE("mean over samples") {
        PolicySample a = base_sample();
        PolicySample b = base_sample();
        b.trust = 0.0;
        CHECK(policy_loss({a, b}, cfg) == doctest::Approx(-0.5));
    }
    SUBCASE("KL regularizer pulls toward the value-implied policy") {
        PolicySample s = base_sample();
        s.pi_new = {1.0, 0.0, 0.0, 0.0, 0.0};
        s.pi_old = {0.5, 0.125, 0.125, 0.125, 0.125};
        s.advantage = 0.0;
        cfg.lambda_kl = 1.0;
        // Surrogate vanishes; KL(onehot || uniform) = ln 5.
        CHECK(policy_loss({s}, cfg) == doctest::Approx(std::log(5.0)));
    }
    SUBCASE("empty batch") { CHECK(policy_loss({}, cfg) == doctest::Approx(0.0)); }
    SUBCASE("zero old probability on the taken action") {
        PolicySample s = base_sample();
        s.pi_old = {0.0, 0.25, 0.25, 0.25, 0.25};
        CHECK_THROWS_AS(policy_loss({s}, cfg), std::invalid_argument);
    }
    SUBCASE("non-distributions are rejected") {
        PolicySample s = base_sample();
        s.pi_new = {0.2, 0.2, 0.2, 0.2, 0.1};
        CHECK_THROWS_AS(policy_loss({s}, cfg), std::invalid_argument);
        s = base_sample();
        s.pi_new = {-0.1, 0.3, 0.3, 0.3, 0.2};
        CHECK_THROWS_AS(policy_loss({s}, cfg), std::invalid_argument);
    }
    SUBCASE("bad action index") {
        PolicySample s = base_sample();
        s.action = 9;
        CHECK_THROWS_AS(policy_loss({s}, cfg), std::invalid_argument);
    }
    SUBCASE("temperature is forwarded to the softmax") {
        PolicySample s = base_sample();
        cfg.softmax_temperature = 0.0;
        CHECK_THROWS_AS(policy_loss({s}, cfg), std::invalid_argument);
    }
}

TEST_CASE("total_loss is a weighted sum of the two terms") {
    LossConfig cfg;
    CHECK(total_loss(2.0, -0.5, cfg) == doctest::Approx(1.5));
    cfg.lambda_trust = 0.7;
    cfg.lambda_policy = 2.0;
    CHECK(total_loss(2.0, -0.5, cfg) == doctest::Approx(0.4));
}

TEST_CASE("aggregate reports mean and sample spread") {
    const Aggregate a = aggregate({1.0, 2.0, 3.0});
    CHECK(a.mean == doctest::Approx(2.0));
    CHECK(a.stddev == doctest::Approx(1.0));
    CHECK(a.count == 3);

    const Aggregate single = aggregate({5.0});
    CHECK(single.mean == doctest::Approx(5.0));
    CHECK(single.stddev == doctest::Approx(0.0));
    CHECK(single.count == 1);

    const Aggregate none = aggregate({});
    CHECK(none.count == 0);
    CHECK(none.mean == doctest::Approx(0.0));
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fedorl/envs.hpp"
#include "fedorl/mdp.hpp"
#include "fedorl/theory.hpp"
#include "oracles.hpp"

using namespace fedorl;

namespace {

Mdp single_state_mdp(double reward, double gamma) {
    Mdp m;
    m.num_states = 1;
    m.num_actions = 1;
    m.transition = MatrixXd::Ones(1, 1);
    m.reward = MatrixXd::Constant(1, 1, reward);
    m.initial_dist = VectorXd::Ones(1);
    m.discount = gamma;
    m.r_max = std::max(reward, 1.0);
    m.validate();
    return m;
}

TabularPolicy row_policy(std::initializer_list<double> row) {
    TabularPolicy pi;
    pi.probs.resize(1, static_cast<long>(row.size()));
    int a = 0;
    for (const double v : row) pi.probs(0, a++) = v;
    return pi;
}

}  // namespace

TEST_CASE("policy_return on closed-form cases") {
    const TabularPolicy pi = TabularPolicy::uniform(1, 1);
    CHECK(policy_return(single_state_mdp(1.0, 0.99), pi) == Catch::Approx(100.0).epsilon(1e-12));
    CHECK(policy_return(single_state_mdp(0.0, 0.5), pi) == 0.0);
}

TEST_CASE("policy_return matches the truncated-sum oracle on a chain") {
    // Deterministic 2-state chain: state 0 pays 1 and moves to the absorbing
    // zero-reward state 1. The discounted return from state 0 is exactly 1.
    Mdp m;
    m.num_states = 2;
    m.num_actions = 1;
    m.transition.resize(2, 2);
    m.transition << 0.0, 1.0, 0.0, 1.0;
    m.reward.resize(2, 1);
    m.reward << 1.0, 0.0;
    m.initial_dist.resize(2);
    m.initial_dist << 1.0, 0.0;
    m.discount = 0.5;
    m.validate();
    const TabularPolicy pi = TabularPolicy::uniform(2, 1);
    const double j = policy_return(m, pi);
    CHECK(std::abs(j - 1.0) < 1e-12);
    CHECK(std::abs(j - oracles::truncated_return(m, pi, 2000)) < 1e-9);
}

TEST_CASE("policy_return matches the oracle on random MDPs") {
    Rng rng(11);
    for (int k = 0; k < 25; ++k) {
        const int S = 2 + rng.uniform_int(5);
        const int A = 1 + rng.uniform_int(3);
        const Mdp m = random_mdp(S, A, std::min(S, 2), 0.9, 1000 + k);
        const TabularPolicy pi = random_policy(S, A, rng);
        CHECK(std::abs(policy_return(m, pi) - oracles::truncated_return(m, pi, 400)) < 1e-9);
    }
}

TEST_CASE("q_function closed forms and fixed-point oracle") {
    const TabularPolicy one = TabularPolicy::uniform(1, 1);
    CHECK(q_function(single_state_mdp(1.0, 0.9), one).values(0, 0) ==
          Catch::Approx(10.0).epsilon(1e-12));
    CHECK(q_function(single_state_mdp(0.0, 0.9), one).values(0, 0) == 0.0);

    Rng rng(12);
    const Mdp m = random_mdp(4, 2, 3, 0.9, 77);
    const TabularPolicy pi = random_policy(4, 2, rng);
    const MatrixXd oracle = oracles::q_fixed_point(m, pi, 400);
    CHECK((q_function(m, pi).values - oracle).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("occupancy trivial and symmetric cases") {
    const TabularPolicy one = TabularPolicy::uniform(1, 1);
    const OccupancyMeasure occ = occupancy(single_state_mdp(1.0, 0.7), one);
    CHECK(occ.rho(0, 0) == Catch::Approx(1.0).epsilon(1e-12));

    // Doubly stochastic two-state MDP with uniform start: occupancy stays uniform.
    Mdp m;
    m.num_states = 2;
    m.num_actions = 2;
    m.transition.resize(4, 2);
    m.transition << 0.7, 0.3, 0.3, 0.7, 0.3, 0.7, 0.7, 0.3;
    m.reward = MatrixXd::Zero(2, 2);
    m.r_max = 1.0;
    m.initial_dist = VectorXd::Constant(2, 0.5);
    m.discount = 0.9;
    m.validate();
    const OccupancyMeasure u = occupancy(m, TabularPolicy::uniform(2, 2));
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) CHECK(std::abs(u.rho(s, a) - 0.25) < 1e-12);
}

TEST_CASE("occupancy matches the truncated-horizon oracle") {
    Rng rng(13);
    const Mdp m = random_mdp(3, 2, 2, 0.99, 5);
    const TabularPolicy pi = random_policy(3, 2, rng);
    const OccupancyMeasure occ = occupancy(m, pi);
    occ.validate();
    const MatrixXd oracle = oracles::occupancy_truncated(m, pi, 2000);
    CHECK((occ.rho - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("max_tv_distance basics") {
    CHECK(max_tv_distance(row_policy({0.8, 0.2}), row_policy({0.8, 0.2})) == 0.0);
    CHECK(max_tv_distance(row_policy({0.8, 0.2}), row_policy({0.4, 0.6})) ==
          Catch::Approx(0.4).epsilon(1e-12));

    TabularPolicy det1, det2;
    det1.probs.resize(2, 2);
    det1.probs << 1, 0, 1, 0;
    det2.probs.resize(2, 2);
    det2.probs << 1, 0, 0, 1;  // differs only in state 1, disjoint support there
    CHECK(max_tv_distance(det1, det2) == 1.0);

    TabularPolicy wrong;
    wrong.probs.resize(1, 3);
    wrong.probs << 1, 0, 0;
    CHECK_THROWS_AS(max_tv_distance(det1, wrong), std::invalid_argument);
}

TEST_CASE("max_tv_distance is a metric on random triples") {
    Rng rng(14);
    for (int k = 0; k < 200; ++k) {
        const int S = 1 + rng.uniform_int(4);
        const int A = 2 + rng.uniform_int(3);
        const TabularPolicy x = random_policy(S, A, rng);
        const TabularPolicy y = random_policy(S, A, rng);
        const TabularPolicy z = random_policy(S, A, rng);
        const double dxy = max_tv_distance(x, y);
        const double dyx = max_tv_distance(y, x);
        CHECK(dxy == dyx);
        CHECK(max_tv_distance(x, x) == 0.0);
        CHECK(dxy <= max_tv_distance(x, z) + max_tv_distance(z, y) + 1e-12);
        if (dxy == 0.0) CHECK((x.probs - y.probs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("occupancy_tv basics and direct-sum oracle") {
    OccupancyMeasure a, b;
    a.rho.resize(1, 2);
    a.rho << 1.0, 0.0;
    b.rho.resize(1, 2);
    b.rho << 0.0, 1.0;
    CHECK(occupancy_tv(a, a) == 0.0);
    CHECK(occupancy_tv(a, b) == 1.0);

    Rng rng(15);
    const Mdp m = random_mdp(4, 2, 2, 0.9, 21);
    const OccupancyMeasure r1 = occupancy(m, random_policy(4, 2, rng));
    const OccupancyMeasure r2 = occupancy(m, random_policy(4, 2, rng));
    double direct = 0.0;
    for (int s = 0; s < 4; ++s)
        for (int act = 0; act < 2; ++act) direct += std::abs(r1.rho(s, act) - r2.rho(s, act));
    direct *= 0.5;
    CHECK(occupancy_tv(r1, r2) == Catch::Approx(direct).epsilon(1e-14));
}

TEST_CASE("d_cql values and support error") {
    const VectorXd w = VectorXd::Ones(1);
    CHECK(d_cql(w, row_policy({0.3, 0.7}), row_policy({0.3, 0.7})) ==
          Catch::Approx(1.0).epsilon(1e-12));
    CHECK(d_cql(w, row_policy({1.0, 0.0}), row_policy({0.5, 0.5})) ==
          Catch::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(d_cql(w, row_policy({0.5, 0.5}), row_policy({1.0, 0.0})),
                    UnsupportedSupport);

    Rng rng(16);
    for (int k = 0; k < 20; ++k) {
        const int S = 1 + rng.uniform_int(3);
        const int A = 2 + rng.uniform_int(3);
        const TabularPolicy p1 = random_policy(S, A, rng);
        const TabularPolicy p2 = random_policy(S, A, rng);
        const VectorXd weights = random_distribution(S, rng);
        double direct = 0.0;
        for (int s = 0; s < S; ++s) {
            double per = 1.0;
            for (int a = 0; a < A; ++a)
                per += p1.probs(s, a) * (p1.probs(s, a) / p2.probs(s, a) - 1.0);
            direct += weights(s) * per;
            CHECK(per >= 1.0 - 1e-12);  // one plus a chi-square divergence
        }
        CHECK(d_cql(weights, p1, p2) == Catch::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("return, occupancy and Q are mutually consistent") {
    Rng rng(17);
    for (int k = 0; k < 40; ++k) {
        const int S = 2 + rng.uniform_int(5);
        const int A = 1 + rng.uniform_int(3);
        const double gamma = (k % 3 == 0) ? 0.5 : (k % 3 == 1 ? 0.9 : 0.99);
        const Mdp m = random_mdp(S, A, std::min(S, 2), gamma, 300 + k);
        const TabularPolicy pi = random_policy(S, A, rng);
        const double j = policy_return(m, pi);

        const OccupancyMeasure occ = occupancy(m, pi);
        const double j_occ = (occ.rho.array() * m.reward.array()).sum() / (1.0 - gamma);
        CHECK(std::abs(j - j_occ) < 1e-8);

        const QTable q = q_function(m, pi);
        double j_q = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                j_q += m.initial_dist(s) * pi.probs(s, a) * q.values(s, a);
        CHECK(std::abs(j - j_q) < 1e-8);
    }
}

TEST_CASE("occupancy TV obeys the policy-distance bound across gammas") {
    const SuiteReport rep = run_occupancy_lemma_suite(1000, 4242);
    CHECK(rep.trials == 1000);
    CHECK(rep.violations == 0);
    CHECK(rep.worst_ratio <= 1.0 + 1e-12);
}

TEST_CASE("Mdp validation rejects malformed tables") {
    Mdp m = single_state_mdp(1.0, 0.9);
    m.transition(0, 0) = 0.5;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = single_state_mdp(1.0, 0.9);
    m.discount = 1.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = single_state_mdp(1.0, 0.9);
    m.reward(0, 0) = m.r_max + 1.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("value iteration recovers an optimal policy") {
    Rng rng(18);
    for (int k = 0; k < 10; ++k) {
        const Mdp m = random_mdp(5, 3, 2, 0.9, 900 + k);
        const ValueIterationResult vi = value_iteration(m);
        const TabularPolicy star = greedy_policy(vi.q);
        CHECK(policy_return(m, star) >= policy_return(m, random_policy(5, 3, rng)) - 1e-9);
        CHECK(policy_return(m, star) >= policy_return(m, TabularPolicy::uniform(5, 3)) - 1e-9);
    }
}

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fedorl/errors.hpp"

namespace fedorl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Shared numeric tolerances; validation and the property suites read these
/// so there is a single source of truth.
namespace tol {
inline constexpr double probability_row = 1e-12;
inline constexpr double occupancy_mass = 1e-10;
inline constexpr double linear_solve = 1e-10;
}  // namespace tol

namespace detail {
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

/** Finite MDP with dense tables.
 *
 * Transitions are stored as an (S*A) x S matrix whose row s*num_actions + a
 * holds the next-state distribution of pair (s, a). Rewards are deterministic
 * per pair and live in [0, r_max]. Instances are immutable by convention once
 * validated; every operation below takes const references.
 */
struct Mdp {
    int num_states = 0;
    int num_actions = 0;
    MatrixXd transition;    // (S*A) x S
    MatrixXd reward;        // S x A
    VectorXd initial_dist;  // S
    double discount = 0.9;
    double r_max = 1.0;

    int pair_index(int s, int a) const { return s * num_actions + a; }

    void validate() const {
        detail::require(num_states > 0 && num_actions > 0, "Mdp: empty state or action space");
        detail::require(transition.rows() == static_cast<long>(num_states) * num_actions &&
                            transition.cols() == num_states,
                        "Mdp: transition shape mismatch");
        detail::require(reward.rows() == num_states && reward.cols() == num_actions,
                        "Mdp: reward shape mismatch");
        detail::require(initial_dist.size() == num_states, "Mdp: initial_dist shape mismatch");
        detail::require(discount > 0.0 && discount < 1.0, "Mdp: discount must be in (0,1)");
        detail::require(r_max > 0.0, "Mdp: r_max must be positive");
        for (long r = 0; r < transition.rows(); ++r) {
            detail::require(transition.row(r).minCoeff() >= 0.0, "Mdp: negative transition probability");
            detail::require(std::abs(transition.row(r).sum() - 1.0) <= tol::probability_row,
                            "Mdp: transition row does not sum to 1");
        }
        detail::require(reward.minCoeff() >= 0.0 && reward.maxCoeff() <= r_max,
                        "Mdp: reward outside [0, r_max]");
        detail::require(initial_dist.minCoeff() >= 0.0 &&
                            std::abs(initial_dist.sum() - 1.0) <= tol::probability_row,
                        "Mdp: initial_dist is not a distribution");
    }
};

/// Per-state probability row over actions; the unit exchanged in federation.
struct TabularPolicy {
    MatrixXd probs;  // S x A

    static TabularPolicy uniform(int num_states, int num_actions) {
        TabularPolicy p;
        p.probs = MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions);
        return p;
    }

    void validate() const {
        detail::require(probs.rows() > 0 && probs.cols() > 0, "TabularPolicy: empty table");
        for (long s = 0; s < probs.rows(); ++s) {
            detail::require(probs.row(s).minCoeff() >= 0.0, "TabularPolicy: negative probability");
            detail::require(std::abs(probs.row(s).sum() - 1.0) <= tol::probability_row,
                            "TabularPolicy: row does not sum to 1");
        }
    }
};

struct QTable {
    MatrixXd values;  // S x A
};

/// Discounted state-action visitation distribution, total mass 1.
struct OccupancyMeasure {
    MatrixXd rho;  // S x A

    void validate() const {
        detail::require(rho.minCoeff() >= -tol::occupancy_mass, "OccupancyMeasure: negative mass");
        detail::require(std::abs(rho.sum() - 1.0) <= tol::occupancy_mass,
                        "OccupancyMeasure: total mass is not 1");
    }
};

namespace detail {
inline void require_same_shape(const MatrixXd& a, const MatrixXd& b, const std::string& what) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), what + ": shape mismatch");
}
}  // namespace detail

/// State-to-state transition matrix under `pi`: P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
inline MatrixXd policy_transition(const Mdp& mdp, const TabularPolicy& pi) {
    MatrixXd p = MatrixXd::Zero(mdp.num_states, mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            p.row(s) += pi.probs(s, a) * mdp.transition.row(mdp.pair_index(s, a));
    return p;
}

/// Expected one-step reward per state under `pi`.
inline VectorXd policy_reward(const Mdp& mdp, const TabularPolicy& pi) {
    return (mdp.reward.array() * pi.probs.array()).rowwise().sum();
}

/// V^pi by direct solve of (I - gamma P_pi) V = R_pi. The system is strictly
/// diagonally dominant for gamma < 1; LU cannot hit a zero pivot.
inline VectorXd policy_values(const Mdp& mdp, const TabularPolicy& pi) {
    const MatrixXd p = policy_transition(mdp, pi);
    const MatrixXd lhs = MatrixXd::Identity(mdp.num_states, mdp.num_states) - mdp.discount * p;
    return lhs.partialPivLu().solve(policy_reward(mdp, pi));
}

/// J(M, pi): the unnormalized discounted return from the initial distribution.
inline double policy_return(const Mdp& mdp, const TabularPolicy& pi) {
    return mdp.initial_dist.dot(policy_values(mdp, pi));
}

/// Q^pi(s,a) = R(s,a) + gamma <P(.|s,a), V^pi>, with V^pi solved exactly.
inline QTable q_function(const Mdp& mdp, const TabularPolicy& pi) {
    const VectorXd v = policy_values(mdp, pi);
    QTable q;
    q.values.resize(mdp.num_states, mdp.num_actions);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            q.values(s, a) =
                mdp.reward(s, a) + mdp.discount * mdp.transition.row(mdp.pair_index(s, a)).dot(v);
    return q;
}

/** Occupancy measure rho^pi, exactly normalized to total mass 1.
 *
 * Solves the discounted flow equations for the state marginal,
 * (I - gamma P_pi^T) d = (1 - gamma) mu0, and multiplies by the policy.
 */
inline OccupancyMeasure occupancy(const Mdp& mdp, const TabularPolicy& pi) {
    const MatrixXd p = policy_transition(mdp, pi);
    const MatrixXd lhs =
        MatrixXd::Identity(mdp.num_states, mdp.num_states) - mdp.discount * p.transpose();
    const VectorXd d = lhs.partialPivLu().solve((1.0 - mdp.discount) * mdp.initial_dist);
    OccupancyMeasure occ;
    occ.rho = d.asDiagonal() * pi.probs;
    return occ;
}

/// D(pi1, pi2) = max_s TV(pi1(.|s) || pi2(.|s)), in [0, 1].
inline double max_tv_distance(const TabularPolicy& pi1, const TabularPolicy& pi2) {
    detail::require_same_shape(pi1.probs, pi2.probs, "max_tv_distance");
    double worst = 0.0;
    for (long s = 0; s < pi1.probs.rows(); ++s)
        worst = std::max(worst, 0.5 * (pi1.probs.row(s) - pi2.probs.row(s)).cwiseAbs().sum());
    return worst;
}

/// Total variation between two occupancy measures.
inline double occupancy_tv(const OccupancyMeasure& rho1, const OccupancyMeasure& rho2) {
    detail::require_same_shape(rho1.rho, rho2.rho, "occupancy_tv");
    return 0.5 * (rho1.rho - rho2.rho).cwiseAbs().sum();
}

/** E_{s~weights}[D_CQL(s; pi1, pi2)] with
 * D_CQL(s) = 1 + sum_a pi1(a|s) (pi1(a|s)/pi2(a|s) - 1), i.e. one plus the
 * chi-square divergence, so the per-state value is always >= 1.
 */
inline double d_cql(const VectorXd& state_weights, const TabularPolicy& pi1,
                    const TabularPolicy& pi2) {
    detail::require_same_shape(pi1.probs, pi2.probs, "d_cql");
    detail::require(state_weights.size() == pi1.probs.rows(), "d_cql: weight shape mismatch");
    double total = 0.0;
    for (long s = 0; s < pi1.probs.rows(); ++s) {
        double per_state = 1.0;
        for (long a = 0; a < pi1.probs.cols(); ++a) {
            const double p1 = pi1.probs(s, a);
            if (p1 <= 0.0) continue;
            const double p2 = pi2.probs(s, a);
            if (p2 <= 0.0)
                throw UnsupportedSupport("d_cql: pi1 puts mass where pi2 has none (state " +
                                         std::to_string(s) + ")");
            per_state += p1 * (p1 / p2 - 1.0);
        }
        total += state_weights(s) * per_state;
    }
    return total;
}

struct ValueIterationResult {
    VectorXd v;
    MatrixXd q;          // S x A
    int iterations = 0;
    double residual = 0.0;
};

/// Optimal value function by value iteration to sup-norm tolerance.
inline ValueIterationResult value_iteration(const Mdp& mdp, double tolerance = 1e-10,
                                            int max_iters = 1000000) {
    ValueIterationResult out;
    out.v = VectorXd::Zero(mdp.num_states);
    out.q.resize(mdp.num_states, mdp.num_actions);
    for (out.iterations = 1; out.iterations <= max_iters; ++out.iterations) {
        double change = 0.0;
        for (int s = 0; s < mdp.num_states; ++s)
            for (int a = 0; a < mdp.num_actions; ++a)
                out.q(s, a) = mdp.reward(s, a) +
                              mdp.discount * mdp.transition.row(mdp.pair_index(s, a)).dot(out.v);
        for (int s = 0; s < mdp.num_states; ++s) {
            const double nv = out.q.row(s).maxCoeff();
            change = std::max(change, std::abs(nv - out.v(s)));
            out.v(s) = nv;
        }
        out.residual = change;
        if (change <= tolerance) break;
    }
    return out;
}

/// Deterministic policy on argmax_a q(s, a); ties break to the lowest index.
inline TabularPolicy greedy_policy(const MatrixXd& q) {
    TabularPolicy pi;
    pi.probs = MatrixXd::Zero(q.rows(), q.cols());
    for (long s = 0; s < q.rows(); ++s) {
        int best = 0;
        for (long a = 1; a < q.cols(); ++a)
            if (q(s, a) > q(s, best)) best = static_cast<int>(a);
        pi.probs(s, best) = 1.0;
    }
    return pi;
}

}  // namespace fedorl

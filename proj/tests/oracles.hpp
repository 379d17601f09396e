// Test-only oracles: independent routes to the quantities the library
// computes by direct linear solves. These stay deliberately naive (truncated
// sums, fixed-point sweeps, dense solves over the flat state-action space,
// grid search) so agreement is meaningful.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "fedorl/drpo.hpp"
#include "fedorl/mdp.hpp"
#include "fedorl/offline_data.hpp"

namespace fedorl::oracles {

/// Truncated discounted return via marginal propagation.
inline double truncated_return(const Mdp& mdp, const TabularPolicy& pi, int horizon) {
    const MatrixXd p = policy_transition(mdp, pi);
    const VectorXd r = policy_reward(mdp, pi);
    VectorXd marginal = mdp.initial_dist;
    double total = 0.0;
    double discount = 1.0;
    for (int h = 0; h < horizon; ++h) {
        total += discount * marginal.dot(r);
        marginal = p.transpose() * marginal;
        discount *= mdp.discount;
    }
    return total;
}

/// Q^pi by plain fixed-point sweeps from zero.
inline MatrixXd q_fixed_point(const Mdp& mdp, const TabularPolicy& pi, int iterations) {
    MatrixXd q = MatrixXd::Zero(mdp.num_states, mdp.num_actions);
    VectorXd v(mdp.num_states);
    for (int it = 0; it < iterations; ++it) {
        v = (pi.probs.array() * q.array()).rowwise().sum();
        for (int s = 0; s < mdp.num_states; ++s)
            for (int a = 0; a < mdp.num_actions; ++a)
                q(s, a) = mdp.reward(s, a) +
                          mdp.discount * mdp.transition.row(mdp.pair_index(s, a)).dot(v);
    }
    return q;
}

/// Occupancy by truncated-horizon summation.
inline MatrixXd occupancy_truncated(const Mdp& mdp, const TabularPolicy& pi, int horizon) {
    const MatrixXd p = policy_transition(mdp, pi);
    VectorXd marginal = mdp.initial_dist;
    VectorXd acc = VectorXd::Zero(mdp.num_states);
    double discount = 1.0;
    for (int h = 0; h < horizon; ++h) {
        acc += discount * marginal;
        marginal = p.transpose() * marginal;
        discount *= mdp.discount;
    }
    acc *= (1.0 - mdp.discount);
    return acc.asDiagonal() * pi.probs;
}

/** Direct dense solve of the penalized evaluation fixed point over the flat
 * (s,a) index: (I - gamma P~ Pi) Q = R~ - beta (rho~ - d)/d.
 * Everything is rebuilt from the dense tables; the implementation's CSR path
 * is never touched.
 */
inline MatrixXd penalized_q_linear_solve(const EmpiricalModel& emp, const Mdp& tmpl,
                                         const TabularPolicy& pi, double beta) {
    const int S = emp.num_states;
    const int A = emp.num_actions;
    const int n = S * A;
    MatrixXd m = MatrixXd::Zero(n, n);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            for (int sp = 0; sp < S; ++sp)
                for (int ap = 0; ap < A; ++ap)
                    m(s * A + a, sp * A + ap) =
                        tmpl.discount * emp.transition_hat(s * A + a, sp) * pi.probs(sp, ap);
    const MatrixXd pen = penalty_table(emp, pi, beta);
    VectorXd rhs(n);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) rhs(s * A + a) = emp.reward_hat(s, a) - pen(s, a);
    const VectorXd q = (MatrixXd::Identity(n, n) - m).partialPivLu().solve(rhs);
    MatrixXd out(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) out(s, a) = q(s * A + a);
    return out;
}

/// Per-state simplex grid search maximizing p.q + sum_a w(a) log p(a); the
/// independent route that certifies the closed-form improvement step.
inline VectorXd grid_search_row(const Eigen::RowVectorXd& q, const Eigen::RowVectorXd& w,
                                int points_budget) {
    const int n = static_cast<int>(q.size());
    // Resolution so the composition count stays near the budget.
    int ticks = points_budget;
    if (n == 3) ticks = static_cast<int>(std::sqrt(2.0 * points_budget));
    if (n >= 4) ticks = static_cast<int>(std::cbrt(6.0 * points_budget));
    std::vector<int> part(n, 0);
    VectorXd best = VectorXd::Constant(n, 1.0 / n);
    double best_val = -std::numeric_limits<double>::infinity();
    VectorXd p(n);
    const std::function<void(int, int)> rec = [&](int index, int remaining) {
        if (index == n - 1) {
            part[index] = remaining;
            double val = 0.0;
            for (int a = 0; a < n; ++a) {
                p(a) = static_cast<double>(part[a]) / ticks;
                val += p(a) * q(a);
                if (w(a) > 0.0) {
                    if (p(a) <= 0.0) {
                        val = -std::numeric_limits<double>::infinity();
                        break;
                    }
                    val += w(a) * std::log(p(a));
                }
            }
            if (val > best_val) {
                best_val = val;
                best = p;
            }
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            part[index] = k;
            rec(index + 1, remaining - k);
        }
    };
    rec(0, ticks);
    return best;
}

}  // namespace fedorl::oracles

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedorl/mdp.hpp"
#include "fedorl/rng.hpp"

namespace fedorl {

/** Slippery gridworld compiled to a flat Mdp.
 *
 * Cells index row-major, s = y*width + x. Actions are N/S/E/W; with
 * probability slip_prob the move goes to a uniformly random perpendicular
 * direction. Off-grid moves stay in place. The goal cell (bottom-right) pays
 * goal_reward on every action and self-loops; all other rewards are zero.
 * The start distribution is a point mass on the top-left cell.
 */
struct Gridworld {
    int width = 8;
    int height = 8;
    double slip_prob = 0.1;
    double goal_reward = 1.0;
    double gamma = 0.99;

    Mdp compile() const {
        detail::require(width >= 1 && height >= 1, "Gridworld: invalid dimensions");
        detail::require(slip_prob >= 0.0 && slip_prob < 1.0, "Gridworld: slip_prob outside [0,1)");
        detail::require(goal_reward > 0.0, "Gridworld: goal_reward must be positive");
        const int S = width * height;
        const int A = 4;
        const int goal = S - 1;
        Mdp m;
        m.num_states = S;
        m.num_actions = A;
        m.discount = gamma;
        m.r_max = goal_reward;
        m.transition = MatrixXd::Zero(static_cast<long>(S) * A, S);
        m.reward = MatrixXd::Zero(S, A);
        m.initial_dist = VectorXd::Zero(S);
        m.initial_dist(0) = 1.0;
        // dx/dy per action: N, S, E, W
        const int dx[4] = {0, 0, 1, -1};
        const int dy[4] = {-1, 1, 0, 0};
        const int perp[4][2] = {{2, 3}, {2, 3}, {0, 1}, {0, 1}};
        const auto move = [&](int s, int dir) {
            const int x = s % width;
            const int y = s / width;
            const int nx = x + dx[dir];
            const int ny = y + dy[dir];
            if (nx < 0 || nx >= width || ny < 0 || ny >= height) return s;
            return ny * width + nx;
        };
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const int row = s * A + a;
                if (s == goal) {
                    m.transition(row, goal) = 1.0;
                    m.reward(s, a) = goal_reward;
                    continue;
                }
                m.transition(row, move(s, a)) += 1.0 - slip_prob;
                m.transition(row, move(s, perp[a][0])) += 0.5 * slip_prob;
                m.transition(row, move(s, perp[a][1])) += 0.5 * slip_prob;
            }
        }
        m.validate();
        return m;
    }
};

/** Seeded random MDP: every (s,a) row picks `branching` distinct successors
 * with Dirichlet(1) weights; rewards are uniform in [0, 1].
 */
inline Mdp random_mdp(int num_states, int num_actions, int branching, double gamma,
                      std::uint64_t seed) {
    detail::require(num_states >= 1 && num_actions >= 1, "random_mdp: invalid sizes");
    detail::require(branching >= 1 && branching <= num_states, "random_mdp: invalid branching");
    Rng rng(seed);
    Mdp m;
    m.num_states = num_states;
    m.num_actions = num_actions;
    m.discount = gamma;
    m.r_max = 1.0;
    m.transition = MatrixXd::Zero(static_cast<long>(num_states) * num_actions, num_states);
    m.reward.resize(num_states, num_actions);
    m.initial_dist = VectorXd::Constant(num_states, 1.0 / num_states);
    std::vector<int> successors;
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            successors.clear();
            while (static_cast<int>(successors.size()) < branching) {
                const int cand = rng.uniform_int(num_states);
                if (std::find(successors.begin(), successors.end(), cand) == successors.end())
                    successors.push_back(cand);
            }
            // Dirichlet(1) row via normalized exponentials.
            double total = 0.0;
            std::vector<double> weights(successors.size());
            for (std::size_t k = 0; k < successors.size(); ++k) {
                weights[k] = -std::log(1.0 - rng.uniform());
                total += weights[k];
            }
            const int row = s * num_actions + a;
            for (std::size_t k = 0; k < successors.size(); ++k)
                m.transition(row, successors[k]) = weights[k] / total;
            m.reward(s, a) = rng.uniform();
        }
    }
    m.validate();
    return m;
}

/// Random policy with Dirichlet(1) rows.
inline TabularPolicy random_policy(int num_states, int num_actions, Rng& rng) {
    TabularPolicy pi;
    pi.probs.resize(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        double total = 0.0;
        for (int a = 0; a < num_actions; ++a) {
            pi.probs(s, a) = -std::log(1.0 - rng.uniform());
            total += pi.probs(s, a);
        }
        pi.probs.row(s) /= total;
    }
    return pi;
}

/// Random distribution over n cells (Dirichlet(1)).
inline VectorXd random_distribution(int n, Rng& rng) {
    VectorXd v(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        v(i) = -std::log(1.0 - rng.uniform());
        total += v(i);
    }
    return v / total;
}

}  // namespace fedorl

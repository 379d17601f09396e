#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "fedorl/errors.hpp"
#include "fedorl/mdp.hpp"
#include "fedorl/rng.hpp"

namespace fedorl {

struct TransitionRecord {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

/// One agent's private offline dataset, in sampling order.
struct TransitionDataset {
    std::vector<TransitionRecord> records;
    int agent_id = 0;
    std::string provenance;  // behavior tier, seed, ... free-form
};

/** Count-based empirical MDP estimates plus the floored state-action
 * distribution d(s,a) used as the conservatism-penalty denominator.
 *
 * Unseen pairs get a uniform transition row and zero reward; d is floored at
 * delta_floor only (transition_hat is not floored). The nz_* arrays are a CSR
 * view of transition_hat rows for seen pairs; the penalized Bellman iteration
 * walks them instead of the dense rows. For unseen pairs the uniform row
 * reduces to the mean of the value vector.
 */
struct EmpiricalModel {
    int num_states = 0;
    int num_actions = 0;
    Eigen::MatrixXi counts;   // S x A
    MatrixXd transition_hat;  // (S*A) x S
    MatrixXd reward_hat;      // S x A
    MatrixXd d;               // S x A, >= delta_floor entrywise
    double delta_floor = 0.0;
    long long dataset_size = 0;

    std::vector<int> nz_ptr;                // size S*A+1
    std::vector<int> nz_col;
    std::vector<double> nz_val;
    std::vector<unsigned char> pair_seen;   // size S*A

    int pair_index(int s, int a) const { return s * num_actions + a; }

    /// Un-floored empirical state marginal D(s) = sum_a N(s,a) / |D|.
    VectorXd state_marginal() const {
        VectorXd m(num_states);
        for (int s = 0; s < num_states; ++s) {
            long long row = 0;
            for (int a = 0; a < num_actions; ++a) row += counts(s, a);
            m(s) = static_cast<double>(row) / static_cast<double>(dataset_size);
        }
        return m;
    }
};

/** Rolls out `num_trajectories` episodes of fixed `horizon` from mdp.initial_dist
 * under `behavior`. Recorded rewards are R(s,a) plus uniform noise in
 * [-reward_noise, +reward_noise], clamped at 0 from below. Deterministic
 * given the seed.
 */
inline TransitionDataset generate_dataset(const Mdp& mdp, const TabularPolicy& behavior,
                                          int num_trajectories, int horizon, double reward_noise,
                                          std::uint64_t seed) {
    detail::require(horizon >= 1, "generate_dataset: horizon must be >= 1");
    detail::require(reward_noise >= 0.0, "generate_dataset: negative reward noise");
    detail::require(behavior.probs.rows() == mdp.num_states &&
                        behavior.probs.cols() == mdp.num_actions,
                    "generate_dataset: behavior policy shape mismatch");
    TransitionDataset ds;
    ds.records.reserve(static_cast<std::size_t>(std::max(0, num_trajectories)) * horizon);
    Rng rng(seed);
    for (int traj = 0; traj < num_trajectories; ++traj) {
        int s = rng.categorical(mdp.initial_dist);
        for (int h = 0; h < horizon; ++h) {
            const int a = rng.categorical(behavior.probs.row(s));
            double r = mdp.reward(s, a);
            if (reward_noise > 0.0) r += rng.uniform(-reward_noise, reward_noise);
            r = std::max(0.0, r);
            const int sp = rng.categorical(mdp.transition.row(mdp.pair_index(s, a)));
            ds.records.push_back({s, a, r, sp});
            s = sp;
        }
    }
    return ds;
}

/// Empirical action frequencies per state; states absent from the data get a
/// uniform row.
inline TabularPolicy behavioral_policy(const TransitionDataset& ds, int num_states,
                                       int num_actions) {
    MatrixXd counts = MatrixXd::Zero(num_states, num_actions);
    for (const auto& rec : ds.records) {
        detail::require(rec.state >= 0 && rec.state < num_states && rec.action >= 0 &&
                            rec.action < num_actions,
                        "behavioral_policy: record index out of range");
        counts(rec.state, rec.action) += 1.0;
    }
    TabularPolicy pi;
    pi.probs.resize(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        const double total = counts.row(s).sum();
        if (total > 0.0)
            pi.probs.row(s) = counts.row(s) / total;
        else
            pi.probs.row(s).setConstant(1.0 / num_actions);
    }
    return pi;
}

inline EmpiricalModel build_empirical_model(const TransitionDataset& ds, int num_states,
                                            int num_actions, double delta_floor) {
    if (ds.records.empty()) throw EmptyDataset("build_empirical_model: dataset is empty");
    detail::require(delta_floor > 0.0 &&
                        delta_floor < 1.0 / (static_cast<double>(num_states) * num_actions),
                    "build_empirical_model: delta_floor must be in (0, 1/(|S||A|))");
    EmpiricalModel m;
    m.num_states = num_states;
    m.num_actions = num_actions;
    m.delta_floor = delta_floor;
    m.dataset_size = static_cast<long long>(ds.records.size());
    m.counts = Eigen::MatrixXi::Zero(num_states, num_actions);
    m.transition_hat = MatrixXd::Zero(static_cast<long>(num_states) * num_actions, num_states);
    m.reward_hat = MatrixXd::Zero(num_states, num_actions);
    for (const auto& rec : ds.records) {
        detail::require(rec.state >= 0 && rec.state < num_states && rec.action >= 0 &&
                            rec.action < num_actions && rec.next_state >= 0 &&
                            rec.next_state < num_states,
                        "build_empirical_model: record index out of range");
        m.counts(rec.state, rec.action) += 1;
        m.transition_hat(m.pair_index(rec.state, rec.action), rec.next_state) += 1.0;
        m.reward_hat(rec.state, rec.action) += rec.reward;
    }
    m.d.resize(num_states, num_actions);
    m.pair_seen.assign(static_cast<std::size_t>(num_states) * num_actions, 0);
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            const int n = m.counts(s, a);
            const int row = m.pair_index(s, a);
            if (n > 0) {
                m.transition_hat.row(row) /= static_cast<double>(n);
                m.reward_hat(s, a) /= static_cast<double>(n);
                m.pair_seen[row] = 1;
            } else {
                m.transition_hat.row(row).setConstant(1.0 / num_states);
            }
            m.d(s, a) = std::max(static_cast<double>(n) / static_cast<double>(m.dataset_size),
                                 delta_floor);
        }
    }
    // CSR view of the seen rows, columns ascending.
    m.nz_ptr.assign(static_cast<std::size_t>(num_states) * num_actions + 1, 0);
    for (int row = 0; row < num_states * num_actions; ++row) {
        m.nz_ptr[row] = static_cast<int>(m.nz_col.size());
        if (!m.pair_seen[row]) continue;
        for (int sp = 0; sp < num_states; ++sp)
            if (m.transition_hat(row, sp) > 0.0) {
                m.nz_col.push_back(sp);
                m.nz_val.push_back(m.transition_hat(row, sp));
            }
    }
    m.nz_ptr[static_cast<std::size_t>(num_states) * num_actions] =
        static_cast<int>(m.nz_col.size());
    return m;
}

/** The empirical MDP <S, A, P~, R~, mu0, gamma> built over the template's
 * initial distribution, discount and r_max. Reward estimates are clipped into
 * [0, r_max] so the result satisfies the Mdp invariants even when dataset
 * rewards carried noise.
 */
inline Mdp empirical_mdp(const EmpiricalModel& model, const Mdp& tmpl) {
    detail::require(model.num_states == tmpl.num_states && model.num_actions == tmpl.num_actions,
                    "empirical_mdp: shape mismatch");
    Mdp m = tmpl;
    m.transition = model.transition_hat;
    m.reward = model.reward_hat.cwiseMax(0.0).cwiseMin(tmpl.r_max);
    return m;
}

enum class BehaviorTier { kExpert, kMedium, kRandom };

inline const char* tier_name(BehaviorTier t) {
    switch (t) {
        case BehaviorTier::kExpert: return "expert";
        case BehaviorTier::kMedium: return "medium";
        default: return "random";
    }
}

/** Tabular stand-ins for dataset quality tiers: epsilon-greedy mixtures
 * around the optimal policy (expert eps=0.05, medium eps=0.3) and the uniform
 * policy for the random tier.
 */
inline TabularPolicy make_behavior_tier(const Mdp& mdp, BehaviorTier tier,
                                        std::optional<double> epsilon_override = std::nullopt) {
    if (tier == BehaviorTier::kRandom && !epsilon_override)
        return TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
    double eps = 0.0;
    switch (tier) {
        case BehaviorTier::kExpert: eps = 0.05; break;
        case BehaviorTier::kMedium: eps = 0.3; break;
        case BehaviorTier::kRandom: eps = 1.0; break;
    }
    if (epsilon_override) eps = *epsilon_override;
    detail::require(eps >= 0.0 && eps <= 1.0, "make_behavior_tier: epsilon outside [0,1]");
    const ValueIterationResult vi = value_iteration(mdp);
    const TabularPolicy greedy = greedy_policy(vi.q);
    TabularPolicy pi;
    pi.probs = (1.0 - eps) * greedy.probs +
               eps * MatrixXd::Constant(mdp.num_states, mdp.num_actions, 1.0 / mdp.num_actions);
    return pi;
}

}  // namespace fedorl

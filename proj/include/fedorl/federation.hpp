#pragma once

#include <chrono>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedorl/drpo.hpp"
#include "fedorl/mdp.hpp"
#include "fedorl/offline_data.hpp"
#include "fedorl/parallel.hpp"

namespace fedorl {

enum class Strategy { kDrpo, kFedCql, kFedBc, kIndividualCql };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::kDrpo: return "drpo";
        case Strategy::kFedCql: return "fed_cql";
        case Strategy::kFedBc: return "fed_bc";
        default: return "individual_cql";
    }
}

/// Entropy-like anchor toward the behavioral policy used by the Fed-CQL
/// baseline; without it the unregularized improvement collapses to one-hot
/// rows and averaging them at round 1 is meaningless.
inline constexpr double kFedCqlEntropyAnchor = 1e-3;

struct FederationConfig {
    int num_agents = 1;
    int num_rounds = 1;
    Strategy strategy = Strategy::kDrpo;
    LocalConfig local;
    int eval_every = 1;
    std::uint64_t seed = 0;       // recorded for provenance; the round loop is deterministic
    double delta_floor = 1e-3;    // floor for the empirical state-action distribution
    int num_threads = 0;          // 0 = hardware concurrency
    bool report_wall_time = false;  // keep the CSV column deterministic by default

    void validate() const {
        detail::require(num_agents >= 1, "FederationConfig: num_agents must be >= 1");
        detail::require(num_rounds >= 0, "FederationConfig: negative num_rounds");
        detail::require(eval_every >= 1, "FederationConfig: eval_every must be >= 1");
        local.validate();
    }
};

struct AgentRoundDetail {
    int agent_id = 0;
    double local_return = 0.0;
    bool improved_global = false;
    bool improved_behavior = false;
    double tv_to_global = 0.0;
    int eval_iterations = 0;
    double eval_residual = 0.0;
    bool not_converged = false;
};

/// Per-round metrics; returns are measured on the true MDP for reporting
/// only, the learners never see it.
struct RoundReport {
    int round = 0;
    double global_return = 0.0;  // J(M, pi_bar) after this round's aggregation
    std::vector<double> per_agent_local_return;
    std::vector<bool> improvement_over_global;    // J(M, pi_i) > J(M, broadcast pi_bar)
    std::vector<bool> improvement_over_behavior;  // J(M, pi_i) > J(M, pi_b_i)
    double mean_tv_to_global = 0.0;               // mean_i D(pi_i, broadcast pi_bar)
    long long wall_time_ms = 0;
    std::vector<AgentRoundDetail> agents;
};

/// Eq.-style FedAvg for tabular policies: the entrywise mean of probability
/// tables. Rows stay on the simplex by convexity.
inline TabularPolicy aggregate(const std::vector<TabularPolicy>& policies) {
    detail::require(!policies.empty(), "aggregate: empty policy list");
    TabularPolicy out = policies.front();
    for (std::size_t i = 1; i < policies.size(); ++i) {
        detail::require_same_shape(out.probs, policies[i].probs, "aggregate");
        out.probs += policies[i].probs;
    }
    out.probs /= static_cast<double>(policies.size());
    return out;
}

/// Fed-BC local update: a pure behavior clone; global information enters only
/// through aggregation.
inline TabularPolicy local_strategy_fed_bc(const TransitionDataset& ds, const TabularPolicy& pibar,
                                           const FederationConfig& cfg) {
    (void)cfg;
    return behavioral_policy(ds, static_cast<int>(pibar.probs.rows()),
                             static_cast<int>(pibar.probs.cols()));
}

/// Fed-CQL local update: conservative evaluation plus greedy-softening
/// improvement (lambda1 = kFedCqlEntropyAnchor, lambda2 = 0).
inline TabularPolicy local_strategy_fed_cql(const EmpiricalModel& emp, const Mdp& tmpl,
                                            const TabularPolicy& pibar, const TabularPolicy& pib,
                                            const LocalConfig& cfg,
                                            LocalRoundStats* stats = nullptr) {
    LocalConfig local = cfg;
    local.lambda1 = kFedCqlEntropyAnchor;
    local.lambda2 = 0.0;
    return drpo_local_round(emp, tmpl, pibar, pib, local, stats);
}

/** Runs the synchronous round protocol: broadcast the global policy, let
 * every agent run its strategy's local update on its own dataset, aggregate
 * the results, and evaluate on the true MDP every `eval_every` rounds.
 *
 * Agents execute concurrently (fan-out/fan-in barrier per round) and write to
 * per-agent slots, so the result is deterministic regardless of scheduling.
 * For the individual_cql baseline no broadcast happens: each agent continues
 * from its own previous policy and the aggregate is computed for reporting
 * only.
 */
inline std::vector<RoundReport> run_federation(const Mdp& mdp,
                                               const std::vector<TransitionDataset>& datasets,
                                               const FederationConfig& cfg) {
    cfg.validate();
    mdp.validate();
    detail::require(static_cast<int>(datasets.size()) == cfg.num_agents,
                    "run_federation: need exactly one dataset per agent");
    const int n = cfg.num_agents;
    const int jobs = cfg.num_threads > 0 ? cfg.num_threads : default_jobs();

    std::vector<EmpiricalModel> models(n);
    std::vector<TabularPolicy> behaviors(n);
    std::vector<double> behavior_return(n);
    for (int i = 0; i < n; ++i) {
        try {
            models[i] = build_empirical_model(datasets[i], mdp.num_states, mdp.num_actions,
                                              cfg.delta_floor);
        } catch (const std::exception& e) {
            throw std::runtime_error("run_federation: agent " + std::to_string(i) + " failed: " +
                                     e.what());
        }
        behaviors[i] = behavioral_policy(datasets[i], mdp.num_states, mdp.num_actions);
        behavior_return[i] = policy_return(mdp, behaviors[i]);
    }

    TabularPolicy global = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
    std::vector<TabularPolicy> own(n, global);  // individual_cql state
    std::vector<RoundReport> reports;

    for (int round = 1; round <= cfg.num_rounds; ++round) {
        const auto tick = std::chrono::steady_clock::now();
        const TabularPolicy broadcast = global;
        std::vector<TabularPolicy> locals(n);
        std::vector<LocalRoundStats> stats(n);
        std::string failure;
        std::mutex failure_mutex;
        parallel_for(n, jobs, [&](int i) {
            try {
                switch (cfg.strategy) {
                    case Strategy::kDrpo:
                        locals[i] = drpo_local_round(models[i], mdp, broadcast, behaviors[i],
                                                     cfg.local, &stats[i]);
                        break;
                    case Strategy::kFedCql:
                        locals[i] = local_strategy_fed_cql(models[i], mdp, broadcast, behaviors[i],
                                                           cfg.local, &stats[i]);
                        break;
                    case Strategy::kFedBc:
                        locals[i] = local_strategy_fed_bc(datasets[i], broadcast, cfg);
                        break;
                    case Strategy::kIndividualCql:
                        locals[i] = local_strategy_fed_cql(models[i], mdp, own[i], behaviors[i],
                                                           cfg.local, &stats[i]);
                        break;
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (failure.empty())
                    failure = "run_federation: agent " + std::to_string(i) +
                              " failed in round " + std::to_string(round) + ": " + e.what();
            }
        });
        if (!failure.empty()) throw std::runtime_error(failure);

        if (cfg.strategy == Strategy::kIndividualCql) own = locals;
        const TabularPolicy aggregated = aggregate(locals);
        if (cfg.strategy != Strategy::kIndividualCql) global = aggregated;

        if (round % cfg.eval_every == 0 || round == cfg.num_rounds) {
            RoundReport rep;
            rep.round = round;
            rep.per_agent_local_return.resize(n);
            rep.improvement_over_global.resize(n);
            rep.improvement_over_behavior.resize(n);
            rep.agents.resize(n);
            const double broadcast_return = policy_return(mdp, broadcast);
            parallel_for(n, jobs, [&](int i) {
                AgentRoundDetail d;
                d.agent_id = datasets[i].agent_id;
                d.local_return = policy_return(mdp, locals[i]);
                d.improved_global = d.local_return > broadcast_return;
                d.improved_behavior = d.local_return > behavior_return[i];
                d.tv_to_global = max_tv_distance(locals[i], broadcast);
                d.eval_iterations = stats[i].total_eval_iterations;
                d.eval_residual = stats[i].last_residual;
                d.not_converged = stats[i].evals_not_converged > 0;
                rep.agents[i] = d;
                rep.per_agent_local_return[i] = d.local_return;
                rep.improvement_over_global[i] = d.improved_global;
                rep.improvement_over_behavior[i] = d.improved_behavior;
            });
            rep.global_return = policy_return(mdp, aggregated);
            double tv_sum = 0.0;
            for (const auto& d : rep.agents) tv_sum += d.tv_to_global;
            rep.mean_tv_to_global = tv_sum / n;
            const auto tock = std::chrono::steady_clock::now();
            rep.wall_time_ms =
                std::chrono::duration_cast<std::chrono::milliseconds>(tock - tick).count();
            reports.push_back(std::move(rep));
        }
    }
    return reports;
}

/// First reported round whose global return reaches 95% of the final one;
/// returns -1 for an empty report list.
inline int rounds_to_95pct(const std::vector<RoundReport>& reports) {
    if (reports.empty()) return -1;
    const double target = 0.95 * reports.back().global_return;
    for (const auto& rep : reports)
        if (rep.global_return >= target) return rep.round;
    return reports.back().round;
}

}  // namespace fedorl

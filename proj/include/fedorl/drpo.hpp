#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedorl/logging.hpp"
#include "fedorl/mdp.hpp"
#include "fedorl/offline_data.hpp"

namespace fedorl {

enum class ImprovementMode { kClosedForm, kExponentiatedGradient };

/// Coefficients and solver knobs for one agent's local update.
struct LocalConfig {
    double beta = 10.0;     // conservatism weight on the Bellman penalty
    double lambda1 = 0.1;   // anchor to the local behavioral policy
    double lambda2 = 0.2;   // anchor to the global aggregated policy
    double eval_tolerance = 1e-8;
    int eval_max_iters = 100000;
    int improve_alternations = 5;
    ImprovementMode improvement_mode = ImprovementMode::kClosedForm;
    bool warm_start = false;  // carry Q across alternations instead of restarting at 0

    void validate() const {
        detail::require(beta >= 0.0 && lambda1 >= 0.0 && lambda2 >= 0.0,
                        "LocalConfig: coefficients must be nonnegative");
        detail::require(eval_tolerance > 0.0, "LocalConfig: eval_tolerance must be positive");
        detail::require(eval_max_iters >= 1, "LocalConfig: eval_max_iters must be >= 1");
        detail::require(improve_alternations >= 0, "LocalConfig: negative improve_alternations");
    }
};

struct PenalizedQ {
    QTable q;
    double residual = 0.0;   // sup-norm change at exit
    int iterations_used = 0;
    bool converged = true;   // false when the iteration cap was hit
};

/// The CQL-style penalty table beta * (rho~(s,a) - d(s,a)) / d(s,a), where
/// rho~(s,a) = D(s) pi(a|s) uses the un-floored state marginal and d is the
/// floored state-action distribution.
inline MatrixXd penalty_table(const EmpiricalModel& emp, const TabularPolicy& pi, double beta) {
    if (beta == 0.0) return MatrixXd::Zero(emp.num_states, emp.num_actions);
    const VectorXd marginal = emp.state_marginal();
    MatrixXd pen(emp.num_states, emp.num_actions);
    for (int s = 0; s < emp.num_states; ++s)
        for (int a = 0; a < emp.num_actions; ++a) {
            const double rho = marginal(s) * pi.probs(s, a);
            pen(s, a) = beta * (rho - emp.d(s, a)) / emp.d(s, a);
        }
    return pen;
}

/** Conservative policy evaluation on the empirical model.
 *
 * Iterates Q <- T~^pi Q - beta (rho~ - d)/d from Q = 0 (or from `warm` when
 * given) until the sup-norm change drops to eval_tolerance. T~^pi uses the
 * count-based transition and reward estimates; only the template's discount
 * is read, never its transitions or rewards, so the learner stays offline.
 */
inline PenalizedQ conservative_evaluate(const EmpiricalModel& emp, const Mdp& tmpl,
                                        const TabularPolicy& pi, const LocalConfig& cfg,
                                        const MatrixXd* warm = nullptr) {
    detail::require(emp.num_states == tmpl.num_states && emp.num_actions == tmpl.num_actions,
                    "conservative_evaluate: model/template shape mismatch");
    detail::require(pi.probs.rows() == emp.num_states && pi.probs.cols() == emp.num_actions,
                    "conservative_evaluate: policy shape mismatch");
    const int S = emp.num_states;
    const int A = emp.num_actions;
    const double gamma = tmpl.discount;
    const MatrixXd target = emp.reward_hat - penalty_table(emp, pi, cfg.beta);

    PenalizedQ out;
    out.q.values = warm != nullptr ? *warm : MatrixXd::Zero(S, A);
    MatrixXd& q = out.q.values;
    VectorXd v(S);
    out.converged = false;
    for (int iter = 1; iter <= cfg.eval_max_iters; ++iter) {
        v = (pi.probs.array() * q.array()).rowwise().sum();
        const double v_mean = v.mean();  // value of the uniform row on unseen pairs
        double change = 0.0;
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const int row = s * A + a;
                double next = v_mean;
                if (emp.pair_seen[row]) {
                    next = 0.0;
                    for (int k = emp.nz_ptr[row]; k < emp.nz_ptr[row + 1]; ++k)
                        next += emp.nz_val[k] * v(emp.nz_col[k]);
                }
                const double nq = target(s, a) + gamma * next;
                change = std::max(change, std::abs(nq - q(s, a)));
                q(s, a) = nq;
            }
        }
        out.residual = change;
        out.iterations_used = iter;
        if (change <= cfg.eval_tolerance) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged)
        log_warn("conservative_evaluate: NotConverged after " +
                 std::to_string(out.iterations_used) +
                 " iterations, residual " + std::to_string(out.residual));
    return out;
}

/** The dual-regularized surrogate objective
 *   sum_s D(s) [ sum_a pi(a|s) Q(s,a) + lambda1 sum_a pi_b(a|s) log pi(a|s)
 *                + lambda2 sum_a pi_bar(a|s) log pi(a|s) ].
 * Returns -inf when pi has no mass somewhere the anchors do.
 */
inline double local_objective(const EmpiricalModel& emp, const TabularPolicy& pi, const QTable& q,
                              const TabularPolicy& pib, const TabularPolicy& pibar,
                              const LocalConfig& cfg) {
    const VectorXd marginal = emp.state_marginal();
    double total = 0.0;
    for (int s = 0; s < emp.num_states; ++s) {
        if (marginal(s) == 0.0) continue;
        double per_state = 0.0;
        for (int a = 0; a < emp.num_actions; ++a) {
            const double p = pi.probs(s, a);
            per_state += p * q.values(s, a);
            const double anchor = cfg.lambda1 * pib.probs(s, a) + cfg.lambda2 * pibar.probs(s, a);
            if (anchor > 0.0) {
                if (p <= 0.0) return -std::numeric_limits<double>::infinity();
                per_state += anchor * std::log(p);
            }
        }
        total += marginal(s) * per_state;
    }
    return total;
}

namespace detail {

/** Maximizes sum_a p(a) q(a) + sum_a w(a) log p(a) over the simplex for
 * w >= 0, w not identically zero.
 *
 * Stationarity gives p(a) = w(a) / (c - q(a)) with the normalizing root c
 * found by safeguarded Newton/bisection. Actions with w(a) = 0 carry mass
 * only in the KKT corner case where their q tops every barriered action; the
 * leftover mass then goes to the lowest-index argmax.
 */
inline VectorXd regularized_row_maximizer(const Eigen::RowVectorXd& q,
                                          const Eigen::RowVectorXd& w) {
    const int n = static_cast<int>(q.size());
    const double w_total = w.sum();
    double q_pos_max = -std::numeric_limits<double>::infinity();
    double q_zero_max = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
        if (w(a) > 0.0)
            q_pos_max = std::max(q_pos_max, q(a));
        else
            q_zero_max = std::max(q_zero_max, q(a));
    }
    double w_at_top = 0.0;
    for (int a = 0; a < n; ++a)
        if (w(a) > 0.0 && q(a) == q_pos_max) w_at_top += w(a);

    const auto g = [&](double c) {
        double sum = 0.0;
        for (int a = 0; a < n; ++a)
            if (w(a) > 0.0) sum += w(a) / (c - q(a));
        return sum;
    };

    if (q_zero_max > q_pos_max) {
        const double mass = g(q_zero_max);
        if (mass <= 1.0) {
            // c pins to the top unbarriered action; it absorbs the leftover.
            VectorXd p = VectorXd::Zero(n);
            for (int a = 0; a < n; ++a)
                if (w(a) > 0.0) p(a) = w(a) / (q_zero_max - q(a));
            for (int a = 0; a < n; ++a)
                if (w(a) == 0.0 && q(a) == q_zero_max) {
                    p(a) = 1.0 - mass;
                    break;
                }
            return p / p.sum();
        }
    }

    // Bracket the root of g(c) = 1: g(lo) >= 1 >= g(hi).
    double lo = q_pos_max + w_at_top;
    if (q_zero_max > lo) lo = q_zero_max;
    double hi = q_pos_max + w_total;
    if (hi <= lo) hi = lo + w_total + 1e-300;
    double c = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double val = 0.0, slope = 0.0;
        for (int a = 0; a < n; ++a)
            if (w(a) > 0.0) {
                const double inv = 1.0 / (c - q(a));
                val += w(a) * inv;
                slope -= w(a) * inv * inv;
            }
        if (std::abs(val - 1.0) <= 1e-13) break;
        if (val > 1.0)
            lo = std::max(lo, c);
        else
            hi = std::min(hi, c);
        double step = (val - 1.0) / slope;
        double next = c - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // bisection safeguard
        if (std::abs(next - c) <= 1e-15 * std::max(1.0, std::abs(c))) {
            c = next;
            break;
        }
        c = next;
    }
    VectorXd p = VectorXd::Zero(n);
    for (int a = 0; a < n; ++a)
        if (w(a) > 0.0) p(a) = w(a) / (c - q(a));
    return p / p.sum();
}

/// Multiplicative-weights ascent on the same per-state objective; kept as a
/// cross-check for the closed form.
inline VectorXd exponentiated_gradient_row(const Eigen::RowVectorXd& q,
                                           const Eigen::RowVectorXd& w, int max_iters = 20000,
                                           double tolerance = 1e-12) {
    const int n = static_cast<int>(q.size());
    VectorXd p = VectorXd::Constant(n, 1.0 / n);
    const auto objective = [&](const VectorXd& x) {
        double f = 0.0;
        for (int a = 0; a < n; ++a) {
            f += x(a) * q(a);
            if (w(a) > 0.0) f += w(a) * std::log(std::max(x(a), 1e-300));
        }
        return f;
    };
    double step = 1.0 / (q.cwiseAbs().maxCoeff() + w.sum() * n + 1.0);
    double f = objective(p);
    VectorXd grad(n), trial(n);
    for (int it = 0; it < max_iters; ++it) {
        for (int a = 0; a < n; ++a)
            grad(a) = q(a) + (w(a) > 0.0 ? w(a) / std::max(p(a), 1e-300) : 0.0);
        const double shift = grad.maxCoeff();
        bool accepted = false;
        for (int bt = 0; bt < 40 && !accepted; ++bt) {
            for (int a = 0; a < n; ++a) trial(a) = p(a) * std::exp(step * (grad(a) - shift));
            trial /= trial.sum();
            const double ft = objective(trial);
            if (ft >= f) {
                accepted = true;
                const double delta = (trial - p).cwiseAbs().maxCoeff();
                p = trial;
                f = ft;
                if (delta <= tolerance) return p;
            } else {
                step *= 0.5;
            }
        }
        if (!accepted) break;
        step *= 1.05;
    }
    return p;
}

}  // namespace detail

/** Exact maximizer of the dual-regularized surrogate objective.
 *
 * Per state the barrier weights are w = lambda1 pi_b + lambda2 pi_bar; states
 * carrying no data keep the global row. With lambda1 = lambda2 = 0 the
 * problem degenerates to greedy argmax; that fallback is reported via a
 * warning because averaging one-hot rows is rarely what a caller wants.
 */
inline TabularPolicy improve_policy(const EmpiricalModel& emp, const QTable& q,
                                    const TabularPolicy& pib, const TabularPolicy& pibar,
                                    const LocalConfig& cfg) {
    detail::require(q.values.rows() == emp.num_states && q.values.cols() == emp.num_actions,
                    "improve_policy: Q shape mismatch");
    detail::require_same_shape(pib.probs, pibar.probs, "improve_policy");
    if (cfg.lambda1 + cfg.lambda2 <= 0.0) {
        log_warn("improve_policy: DegenerateRegularization (lambda1 = lambda2 = 0); "
                 "falling back to greedy argmax with lowest-index tie-break");
        return greedy_policy(q.values);
    }
    const VectorXd marginal = emp.state_marginal();
    TabularPolicy out = pibar;
    for (int s = 0; s < emp.num_states; ++s) {
        if (marginal(s) == 0.0) continue;
        const Eigen::RowVectorXd w =
            cfg.lambda1 * pib.probs.row(s) + cfg.lambda2 * pibar.probs.row(s);
        if (cfg.improvement_mode == ImprovementMode::kClosedForm)
            out.probs.row(s) = detail::regularized_row_maximizer(q.values.row(s), w).transpose();
        else
            out.probs.row(s) = detail::exponentiated_gradient_row(q.values.row(s), w).transpose();
    }
    return out;
}

struct LocalRoundStats {
    int evals_not_converged = 0;
    int total_eval_iterations = 0;
    double last_residual = 0.0;
};

/// One agent's local round: alternate conservative evaluation and policy
/// improvement `improve_alternations` times starting from the global policy.
inline TabularPolicy drpo_local_round(const EmpiricalModel& emp, const Mdp& tmpl,
                                      const TabularPolicy& pibar, const TabularPolicy& pib,
                                      const LocalConfig& cfg, LocalRoundStats* stats = nullptr) {
    cfg.validate();
    TabularPolicy pi = pibar;
    MatrixXd warm;
    for (int cycle = 0; cycle < cfg.improve_alternations; ++cycle) {
        const PenalizedQ pq = conservative_evaluate(emp, tmpl, pi, cfg,
                                                    cfg.warm_start && cycle > 0 ? &warm : nullptr);
        if (stats != nullptr) {
            stats->total_eval_iterations += pq.iterations_used;
            stats->last_residual = pq.residual;
            if (!pq.converged) ++stats->evals_not_converged;
        }
        if (cfg.warm_start) warm = pq.q.values;
        pi = improve_policy(emp, pq.q, pib, pibar, cfg);
    }
    return pi;
}

}  // namespace fedorl

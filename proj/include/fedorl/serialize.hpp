#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedorl/errors.hpp"
#include "fedorl/federation.hpp"
#include "fedorl/mdp.hpp"
#include "fedorl/offline_data.hpp"
#include "fedorl/theory.hpp"

namespace fedorl {

using nlohmann::json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// MDP and policy JSON
// ---------------------------------------------------------------------------

/// {num_states, num_actions, gamma, r_max, mu0, reward[s][a], transition[s][a][s']}
inline json mdp_to_json(const Mdp& mdp) {
    json j;
    j["num_states"] = mdp.num_states;
    j["num_actions"] = mdp.num_actions;
    j["gamma"] = mdp.discount;
    j["r_max"] = mdp.r_max;
    j["mu0"] = std::vector<double>(mdp.initial_dist.data(),
                                   mdp.initial_dist.data() + mdp.initial_dist.size());
    json reward = json::array();
    json transition = json::array();
    for (int s = 0; s < mdp.num_states; ++s) {
        json reward_row = json::array();
        json transition_row = json::array();
        for (int a = 0; a < mdp.num_actions; ++a) {
            reward_row.push_back(mdp.reward(s, a));
            json next = json::array();
            for (int sp = 0; sp < mdp.num_states; ++sp)
                next.push_back(mdp.transition(mdp.pair_index(s, a), sp));
            transition_row.push_back(next);
        }
        reward.push_back(reward_row);
        transition.push_back(transition_row);
    }
    j["reward"] = reward;
    j["transition"] = transition;
    return j;
}

inline Mdp mdp_from_json(const json& j) {
    Mdp mdp;
    try {
        mdp.num_states = j.at("num_states").get<int>();
        mdp.num_actions = j.at("num_actions").get<int>();
        mdp.discount = j.at("gamma").get<double>();
        mdp.r_max = j.at("r_max").get<double>();
        const auto mu0 = j.at("mu0").get<std::vector<double>>();
        mdp.initial_dist = Eigen::Map<const VectorXd>(mu0.data(), mu0.size());
        mdp.reward.resize(mdp.num_states, mdp.num_actions);
        mdp.transition.resize(static_cast<long>(mdp.num_states) * mdp.num_actions,
                              mdp.num_states);
        for (int s = 0; s < mdp.num_states; ++s)
            for (int a = 0; a < mdp.num_actions; ++a) {
                mdp.reward(s, a) = j.at("reward").at(s).at(a).get<double>();
                for (int sp = 0; sp < mdp.num_states; ++sp)
                    mdp.transition(mdp.pair_index(s, a), sp) =
                        j.at("transition").at(s).at(a).at(sp).get<double>();
            }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("mdp_from_json: ") + e.what());
    }
    mdp.validate();
    return mdp;
}

inline json policy_to_json(const TabularPolicy& pi) {
    json rows = json::array();
    for (long s = 0; s < pi.probs.rows(); ++s) {
        json row = json::array();
        for (long a = 0; a < pi.probs.cols(); ++a) row.push_back(pi.probs(s, a));
        rows.push_back(row);
    }
    return json{{"probs", rows}};
}

inline TabularPolicy policy_from_json(const json& j) {
    TabularPolicy pi;
    try {
        const auto& rows = j.at("probs");
        const long S = static_cast<long>(rows.size());
        detail::require(S > 0, "policy_from_json: empty table");
        const long A = static_cast<long>(rows.at(0).size());
        pi.probs.resize(S, A);
        for (long s = 0; s < S; ++s)
            for (long a = 0; a < A; ++a) pi.probs(s, a) = rows.at(s).at(a).get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("policy_from_json: ") + e.what());
    }
    pi.validate();
    return pi;
}

// ---------------------------------------------------------------------------
// Dataset JSONL and manifest
// ---------------------------------------------------------------------------

/// One record per line: {"s":int,"a":int,"r":float,"sp":int}.
inline std::string dataset_to_jsonl(const TransitionDataset& ds) {
    std::ostringstream out;
    for (const auto& rec : ds.records) {
        json j{{"s", rec.state}, {"a", rec.action}, {"r", rec.reward}, {"sp", rec.next_state}};
        out << j.dump() << "\n";
    }
    return out.str();
}

inline TransitionDataset dataset_from_jsonl(const std::string& text, int agent_id = 0) {
    TransitionDataset ds;
    ds.agent_id = agent_id;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            ds.records.push_back({j.at("s").get<int>(), j.at("a").get<int>(),
                                  j.at("r").get<double>(), j.at("sp").get<int>()});
        } catch (const json::exception& e) {
            throw ConfigError(std::string("dataset_from_jsonl: bad record: ") + e.what());
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline json read_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("bad JSON in " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Round reports: CSV stream plus JSONL per-agent detail
// ---------------------------------------------------------------------------

inline constexpr const char* kRoundReportCsvHeader =
    "round,global_return,mean_local_return,frac_improved_global,frac_improved_behavior,"
    "mean_tv_to_global,wall_time_ms";

inline std::string round_reports_to_csv(const std::vector<RoundReport>& reports,
                                        bool include_wall_time) {
    std::ostringstream out;
    out << kRoundReportCsvHeader << "\n";
    for (const auto& rep : reports) {
        const int n = static_cast<int>(rep.per_agent_local_return.size());
        double mean_local = 0.0;
        int improved_global = 0;
        int improved_behavior = 0;
        for (int i = 0; i < n; ++i) {
            mean_local += rep.per_agent_local_return[i];
            improved_global += rep.improvement_over_global[i] ? 1 : 0;
            improved_behavior += rep.improvement_over_behavior[i] ? 1 : 0;
        }
        mean_local = n > 0 ? mean_local / n : 0.0;
        out << rep.round << ',' << format_double(rep.global_return) << ','
            << format_double(mean_local) << ','
            << format_double(n > 0 ? static_cast<double>(improved_global) / n : 0.0) << ','
            << format_double(n > 0 ? static_cast<double>(improved_behavior) / n : 0.0) << ','
            << format_double(rep.mean_tv_to_global) << ','
            << (include_wall_time ? rep.wall_time_ms : 0) << "\n";
    }
    return out.str();
}

inline std::string round_reports_to_jsonl(const std::vector<RoundReport>& reports) {
    std::ostringstream out;
    for (const auto& rep : reports) {
        json agents = json::array();
        for (const auto& d : rep.agents)
            agents.push_back({{"agent_id", d.agent_id},
                              {"local_return", d.local_return},
                              {"improved_global", d.improved_global},
                              {"improved_behavior", d.improved_behavior},
                              {"tv_to_global", d.tv_to_global},
                              {"eval_iterations", d.eval_iterations},
                              {"eval_residual", d.eval_residual},
                              {"not_converged", d.not_converged}});
        json j{{"round", rep.round},
               {"global_return", rep.global_return},
               {"mean_tv_to_global", rep.mean_tv_to_global},
               {"wall_time_ms", rep.wall_time_ms},
               {"agents", agents}};
        out << j.dump() << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Theory suite reports
// ---------------------------------------------------------------------------

inline json suite_report_to_json(const SuiteReport& rep) {
    return json{{"name", rep.name},
                {"trials", rep.trials},
                {"violations", rep.violations},
                {"worst_ratio", rep.worst_ratio},
                {"examples_of_failure", rep.failure_examples}};
}

inline json theorem1_report_to_json(const Theorem1Report& rep) {
    json per_lambda = json::array();
    for (const double mult : rep.config.lambda2_multipliers) {
        long long eligible = 0;
        long long strict = 0;
        for (const auto& c : rep.cases) {
            if (c.lambda2_multiplier != mult || !c.preconditions_ok) continue;
            ++eligible;
            if (c.verdict.strict_improvement) ++strict;
        }
        per_lambda.push_back(
            {{"lambda2_multiplier", mult},
             {"eligible", eligible},
             {"strict", strict},
             {"success_rate", eligible == 0 ? 0.0 : static_cast<double>(strict) / eligible}});
    }
    return json{{"name", "theorem1_strict_improvement"},
                {"trials", static_cast<long long>(rep.cases.size())},
                {"eligible", rep.eligible},
                {"strict", rep.strict},
                {"success_rate", rep.success_rate()},
                {"g_order_holds", rep.g_order_holds},
                {"grid_resolution", rep.config.grid_resolution},
                {"per_lambda2", per_lambda},
                {"examples_of_failure", rep.failure_dumps}};
}

}  // namespace fedorl

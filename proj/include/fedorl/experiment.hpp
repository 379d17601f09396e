#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedorl/envs.hpp"
#include "fedorl/errors.hpp"
#include "fedorl/federation.hpp"
#include "fedorl/logging.hpp"
#include "fedorl/parallel.hpp"
#include "fedorl/serialize.hpp"
#include "fedorl/theory.hpp"

namespace fedorl {

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct RandomMdpSpec {
    int num_states = 8;
    int num_actions = 2;
    int branching = 2;
    double gamma = 0.99;
    std::uint64_t seed = 0;
};

struct EnvSpec {
    enum class Type { kGridworld, kRandomMdp };
    Type type = Type::kGridworld;
    Gridworld gridworld;
    RandomMdpSpec random;
};

struct DatasetSpec {
    int trajectories_per_agent = 5;
    int horizon = 200;
    double reward_noise = 0.0;
    std::uint64_t seed = 0;
};

struct SweepSpec {
    std::string parameter;
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
};

struct TheorySpec {
    int lemma1_seeds = 500;
    int lemma2_pairs = 500;
    int lemma2_horizon = 50;
    int lemma3_triples = 1000;
    int lipschitz_pairs = 1000;
    double lipschitz_delta = 1e-3;
    std::uint64_t seed = 97;
    Theorem1Config theorem1;
};

struct ExperimentConfig {
    EnvSpec env;
    std::vector<std::string> tiers = {"medium"};
    DatasetSpec dataset;
    FederationConfig federation;
    std::string output_dir = "out";
    std::optional<SweepSpec> sweep;
    TheorySpec theory;
};

inline BehaviorTier tier_from_name(const std::string& name) {
    if (name == "expert") return BehaviorTier::kExpert;
    if (name == "medium") return BehaviorTier::kMedium;
    if (name == "random") return BehaviorTier::kRandom;
    throw ConfigError("unknown behavior tier: " + name);
}

inline Strategy strategy_from_name(const std::string& name) {
    if (name == "drpo") return Strategy::kDrpo;
    if (name == "fed_cql") return Strategy::kFedCql;
    if (name == "fed_bc") return Strategy::kFedBc;
    if (name == "individual_cql") return Strategy::kIndividualCql;
    throw ConfigError("unknown strategy: " + name);
}

inline ImprovementMode improvement_mode_from_name(const std::string& name) {
    if (name == "closed_form") return ImprovementMode::kClosedForm;
    if (name == "exponentiated_gradient") return ImprovementMode::kExponentiatedGradient;
    throw ConfigError("unknown improvement_mode: " + name);
}

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

inline json experiment_config_to_json(const ExperimentConfig& cfg) {
    json env;
    if (cfg.env.type == EnvSpec::Type::kGridworld) {
        env = {{"type", "gridworld"},
               {"width", cfg.env.gridworld.width},
               {"height", cfg.env.gridworld.height},
               {"slip_prob", cfg.env.gridworld.slip_prob},
               {"goal_reward", cfg.env.gridworld.goal_reward},
               {"gamma", cfg.env.gridworld.gamma}};
    } else {
        env = {{"type", "random_mdp"},
               {"num_states", cfg.env.random.num_states},
               {"num_actions", cfg.env.random.num_actions},
               {"branching", cfg.env.random.branching},
               {"gamma", cfg.env.random.gamma},
               {"seed", cfg.env.random.seed}};
    }
    const LocalConfig& lc = cfg.federation.local;
    json local{{"beta", lc.beta},
               {"lambda1", lc.lambda1},
               {"lambda2", lc.lambda2},
               {"eval_tolerance", lc.eval_tolerance},
               {"eval_max_iters", lc.eval_max_iters},
               {"improve_alternations", lc.improve_alternations},
               {"improvement_mode", lc.improvement_mode == ImprovementMode::kClosedForm
                                        ? "closed_form"
                                        : "exponentiated_gradient"},
               {"warm_start", lc.warm_start}};
    json federation{{"num_agents", cfg.federation.num_agents},
                    {"num_rounds", cfg.federation.num_rounds},
                    {"strategy", strategy_name(cfg.federation.strategy)},
                    {"eval_every", cfg.federation.eval_every},
                    {"seed", cfg.federation.seed},
                    {"delta_floor", cfg.federation.delta_floor},
                    {"num_threads", cfg.federation.num_threads},
                    {"report_wall_time", cfg.federation.report_wall_time},
                    {"local", local}};
    json dataset{{"trajectories_per_agent", cfg.dataset.trajectories_per_agent},
                 {"horizon", cfg.dataset.horizon},
                 {"reward_noise", cfg.dataset.reward_noise},
                 {"seed", cfg.dataset.seed}};
    json theorem1{{"instances", cfg.theory.theorem1.instances},
                  {"grid_resolution", cfg.theory.theorem1.grid_resolution},
                  {"num_states", cfg.theory.theorem1.num_states},
                  {"num_actions", cfg.theory.theorem1.num_actions},
                  {"gamma", cfg.theory.theorem1.gamma},
                  {"beta", cfg.theory.theorem1.beta},
                  {"lambda2_multipliers", cfg.theory.theorem1.lambda2_multipliers},
                  {"min_pair_count", cfg.theory.theorem1.min_pair_count},
                  {"trajectories", cfg.theory.theorem1.trajectories},
                  {"horizon", cfg.theory.theorem1.horizon},
                  {"seed", cfg.theory.theorem1.seed}};
    json theory{{"lemma1_seeds", cfg.theory.lemma1_seeds},
                {"lemma2_pairs", cfg.theory.lemma2_pairs},
                {"lemma2_horizon", cfg.theory.lemma2_horizon},
                {"lemma3_triples", cfg.theory.lemma3_triples},
                {"lipschitz_pairs", cfg.theory.lipschitz_pairs},
                {"lipschitz_delta", cfg.theory.lipschitz_delta},
                {"seed", cfg.theory.seed},
                {"theorem1", theorem1}};
    json j{{"env", env},
           {"tiers", cfg.tiers},
           {"dataset", dataset},
           {"federation", federation},
           {"output_dir", cfg.output_dir},
           {"theory", theory}};
    if (cfg.sweep)
        j["sweep"] = json{{"parameter", cfg.sweep->parameter},
                          {"values", cfg.sweep->values},
                          {"seeds", cfg.sweep->seeds}};
    return j;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig cfg;
    try {
        if (j.contains("env")) {
            const json& env = j.at("env");
            const std::string type = env.value("type", "gridworld");
            if (type == "gridworld") {
                cfg.env.type = EnvSpec::Type::kGridworld;
                cfg.env.gridworld.width = env.value("width", cfg.env.gridworld.width);
                cfg.env.gridworld.height = env.value("height", cfg.env.gridworld.height);
                cfg.env.gridworld.slip_prob = env.value("slip_prob", cfg.env.gridworld.slip_prob);
                cfg.env.gridworld.goal_reward =
                    env.value("goal_reward", cfg.env.gridworld.goal_reward);
                cfg.env.gridworld.gamma = env.value("gamma", cfg.env.gridworld.gamma);
            } else if (type == "random_mdp") {
                cfg.env.type = EnvSpec::Type::kRandomMdp;
                cfg.env.random.num_states = env.value("num_states", cfg.env.random.num_states);
                cfg.env.random.num_actions = env.value("num_actions", cfg.env.random.num_actions);
                cfg.env.random.branching = env.value("branching", cfg.env.random.branching);
                cfg.env.random.gamma = env.value("gamma", cfg.env.random.gamma);
                cfg.env.random.seed = env.value("seed", cfg.env.random.seed);
            } else {
                throw ConfigError("unknown env type: " + type);
            }
        }
        if (j.contains("tiers")) cfg.tiers = j.at("tiers").get<std::vector<std::string>>();
        if (cfg.tiers.empty()) throw ConfigError("tiers must be nonempty");
        for (const auto& t : cfg.tiers) tier_from_name(t);  // validates names
        if (j.contains("dataset")) {
            const json& ds = j.at("dataset");
            cfg.dataset.trajectories_per_agent =
                ds.value("trajectories_per_agent", cfg.dataset.trajectories_per_agent);
            cfg.dataset.horizon = ds.value("horizon", cfg.dataset.horizon);
            cfg.dataset.reward_noise = ds.value("reward_noise", cfg.dataset.reward_noise);
            cfg.dataset.seed = ds.value("seed", cfg.dataset.seed);
        }
        if (j.contains("federation")) {
            const json& f = j.at("federation");
            cfg.federation.num_agents = f.value("num_agents", cfg.federation.num_agents);
            cfg.federation.num_rounds = f.value("num_rounds", cfg.federation.num_rounds);
            cfg.federation.strategy = strategy_from_name(f.value("strategy", "drpo"));
            cfg.federation.eval_every = f.value("eval_every", cfg.federation.eval_every);
            cfg.federation.seed = f.value("seed", cfg.federation.seed);
            cfg.federation.delta_floor = f.value("delta_floor", cfg.federation.delta_floor);
            cfg.federation.num_threads = f.value("num_threads", cfg.federation.num_threads);
            cfg.federation.report_wall_time =
                f.value("report_wall_time", cfg.federation.report_wall_time);
            if (f.contains("local")) {
                const json& l = f.at("local");
                LocalConfig& lc = cfg.federation.local;
                lc.beta = l.value("beta", lc.beta);
                lc.lambda1 = l.value("lambda1", lc.lambda1);
                lc.lambda2 = l.value("lambda2", lc.lambda2);
                lc.eval_tolerance = l.value("eval_tolerance", lc.eval_tolerance);
                lc.eval_max_iters = l.value("eval_max_iters", lc.eval_max_iters);
                lc.improve_alternations =
                    l.value("improve_alternations", lc.improve_alternations);
                lc.improvement_mode =
                    improvement_mode_from_name(l.value("improvement_mode", "closed_form"));
                lc.warm_start = l.value("warm_start", lc.warm_start);
            }
        }
        cfg.output_dir = j.value("output_dir", cfg.output_dir);
        if (j.contains("sweep")) {
            SweepSpec sweep;
            sweep.parameter = j.at("sweep").at("parameter").get<std::string>();
            sweep.values = j.at("sweep").at("values").get<std::vector<double>>();
            if (j.at("sweep").contains("seeds"))
                sweep.seeds = j.at("sweep").at("seeds").get<std::vector<std::uint64_t>>();
            if (sweep.seeds.empty()) sweep.seeds = {cfg.federation.seed};
            cfg.sweep = sweep;
        }
        if (j.contains("theory")) {
            const json& t = j.at("theory");
            TheorySpec& th = cfg.theory;
            th.lemma1_seeds = t.value("lemma1_seeds", th.lemma1_seeds);
            th.lemma2_pairs = t.value("lemma2_pairs", th.lemma2_pairs);
            th.lemma2_horizon = t.value("lemma2_horizon", th.lemma2_horizon);
            th.lemma3_triples = t.value("lemma3_triples", th.lemma3_triples);
            th.lipschitz_pairs = t.value("lipschitz_pairs", th.lipschitz_pairs);
            th.lipschitz_delta = t.value("lipschitz_delta", th.lipschitz_delta);
            th.seed = t.value("seed", th.seed);
            if (t.contains("theorem1")) {
                const json& t1 = t.at("theorem1");
                Theorem1Config& c1 = th.theorem1;
                c1.instances = t1.value("instances", c1.instances);
                c1.grid_resolution = t1.value("grid_resolution", c1.grid_resolution);
                c1.num_states = t1.value("num_states", c1.num_states);
                c1.num_actions = t1.value("num_actions", c1.num_actions);
                c1.gamma = t1.value("gamma", c1.gamma);
                c1.beta = t1.value("beta", c1.beta);
                if (t1.contains("lambda2_multipliers"))
                    c1.lambda2_multipliers =
                        t1.at("lambda2_multipliers").get<std::vector<double>>();
                c1.min_pair_count = t1.value("min_pair_count", c1.min_pair_count);
                c1.trajectories = t1.value("trajectories", c1.trajectories);
                c1.horizon = t1.value("horizon", c1.horizon);
                c1.seed = t1.value("seed", c1.seed);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return experiment_config_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Building blocks shared by the commands
// ---------------------------------------------------------------------------

inline Mdp build_env(const EnvSpec& spec) {
    if (spec.type == EnvSpec::Type::kGridworld) return spec.gridworld.compile();
    return random_mdp(spec.random.num_states, spec.random.num_actions, spec.random.branching,
                      spec.random.gamma, spec.random.seed);
}

/// Tier of agent i; shorter tier lists cycle so agent-count sweeps keep the
/// tier mix.
inline BehaviorTier agent_tier(const ExperimentConfig& cfg, int agent) {
    return tier_from_name(cfg.tiers[agent % cfg.tiers.size()]);
}

inline std::vector<TransitionDataset> generate_all_datasets(const ExperimentConfig& cfg,
                                                            const Mdp& env) {
    std::vector<TransitionDataset> out(cfg.federation.num_agents);
    for (int i = 0; i < cfg.federation.num_agents; ++i) {
        const BehaviorTier tier = agent_tier(cfg, i);
        const TabularPolicy behavior = make_behavior_tier(env, tier);
        out[i] = generate_dataset(env, behavior, cfg.dataset.trajectories_per_agent,
                                  cfg.dataset.horizon, cfg.dataset.reward_noise,
                                  mix_seed(cfg.dataset.seed, i));
        out[i].agent_id = i;
        out[i].provenance = std::string(tier_name(tier)) + ":" +
                            std::to_string(mix_seed(cfg.dataset.seed, i));
    }
    return out;
}

inline std::filesystem::path env_path(const ExperimentConfig& cfg) {
    return std::filesystem::path(cfg.output_dir) / "env.json";
}

inline std::filesystem::path manifest_path(const ExperimentConfig& cfg) {
    return std::filesystem::path(cfg.output_dir) / "manifest.json";
}

// ---------------------------------------------------------------------------
// Commands. Each returns what it produced so tests can drive them directly.
// ---------------------------------------------------------------------------

inline Mdp cmd_gen_env(const ExperimentConfig& cfg) {
    const Mdp env = build_env(cfg.env);
    write_text_file(env_path(cfg), mdp_to_json(env).dump(2) + "\n");
    log_info("wrote " + env_path(cfg).string());
    return env;
}

/// Generates per-agent datasets from the tier behavior policies and writes
/// them as JSONL plus a manifest. Requires env.json (run gen-env first).
inline std::vector<TransitionDataset> cmd_gen_data(const ExperimentConfig& cfg) {
    if (!std::filesystem::exists(env_path(cfg)))
        throw ConfigError("missing env file " + env_path(cfg).string() + "; run gen-env first");
    const Mdp env = mdp_from_json(read_json_file(env_path(cfg)));
    std::vector<TransitionDataset> datasets = generate_all_datasets(cfg, env);
    json agents = json::array();
    for (int i = 0; i < cfg.federation.num_agents; ++i) {
        const std::string file = "agent_" + std::to_string(i) + ".jsonl";
        write_text_file(std::filesystem::path(cfg.output_dir) / file,
                        dataset_to_jsonl(datasets[i]));
        agents.push_back({{"agent_id", i},
                          {"file", file},
                          {"tier", tier_name(agent_tier(cfg, i))},
                          {"seed", mix_seed(cfg.dataset.seed, i)},
                          {"num_trajectories", cfg.dataset.trajectories_per_agent},
                          {"horizon", cfg.dataset.horizon}});
    }
    write_text_file(manifest_path(cfg), json{{"agents", agents}}.dump(2) + "\n");
    log_info("wrote " + manifest_path(cfg).string());
    return datasets;
}

struct TrainResult {
    std::vector<RoundReport> reports;
    double final_global_return = 0.0;
    int rounds_to_95 = -1;
    std::string csv_path;
};

/// Loads env/datasets from the output directory when present, otherwise
/// derives them from the config, then runs the federation and writes the
/// frozen-schema CSV plus the per-agent JSONL detail.
inline TrainResult cmd_train(const ExperimentConfig& cfg, bool write_outputs = true) {
    Mdp env;
    if (std::filesystem::exists(env_path(cfg)))
        env = mdp_from_json(read_json_file(env_path(cfg)));
    else
        env = build_env(cfg.env);

    std::vector<TransitionDataset> datasets;
    if (std::filesystem::exists(manifest_path(cfg))) {
        const json manifest = read_json_file(manifest_path(cfg));
        for (const auto& entry : manifest.at("agents")) {
            const std::filesystem::path file =
                std::filesystem::path(cfg.output_dir) / entry.at("file").get<std::string>();
            datasets.push_back(
                dataset_from_jsonl(read_text_file(file), entry.at("agent_id").get<int>()));
        }
        if (static_cast<int>(datasets.size()) != cfg.federation.num_agents)
            throw ConfigError("manifest agent count does not match federation.num_agents");
    } else {
        datasets = generate_all_datasets(cfg, env);
    }

    TrainResult result;
    result.reports = run_federation(env, datasets, cfg.federation);
    if (!result.reports.empty()) result.final_global_return = result.reports.back().global_return;
    result.rounds_to_95 = rounds_to_95pct(result.reports);
    if (write_outputs) {
        const std::string name = strategy_name(cfg.federation.strategy);
        const auto csv = std::filesystem::path(cfg.output_dir) / (name + "_report.csv");
        write_text_file(csv, round_reports_to_csv(result.reports,
                                                  cfg.federation.report_wall_time));
        write_text_file(std::filesystem::path(cfg.output_dir) / (name + "_detail.jsonl"),
                        round_reports_to_jsonl(result.reports));
        result.csv_path = csv.string();
        log_info("wrote " + result.csv_path);
    }
    return result;
}

inline constexpr const char* kSweepCsvHeader =
    "parameter,value,seed,strategy,final_global_return,rounds_to_95pct,mean_final_local_return";

/// Applies one sweep point to a copy of the base config.
inline ExperimentConfig apply_sweep_point(const ExperimentConfig& base,
                                          const std::string& parameter, double value,
                                          std::uint64_t seed) {
    ExperimentConfig cfg = base;
    cfg.sweep.reset();
    if (parameter == "num_agents")
        cfg.federation.num_agents = static_cast<int>(value);
    else if (parameter == "num_rounds")
        cfg.federation.num_rounds = static_cast<int>(value);
    else if (parameter == "trajectories_per_agent")
        cfg.dataset.trajectories_per_agent = static_cast<int>(value);
    else if (parameter == "improve_alternations")
        cfg.federation.local.improve_alternations = static_cast<int>(value);
    else if (parameter == "lambda1")
        cfg.federation.local.lambda1 = value;
    else if (parameter == "lambda2")
        cfg.federation.local.lambda2 = value;
    else if (parameter == "beta")
        cfg.federation.local.beta = value;
    else
        throw ConfigError("unknown sweep parameter: " + parameter);
    cfg.dataset.seed = seed;
    cfg.federation.seed = seed;
    return cfg;
}

/// Runs the sweep grid (values x seeds) in a worker pool and writes one tidy
/// CSV row per point, merged in sorted (value, seed) order.
inline std::string cmd_sweep(const ExperimentConfig& cfg, int jobs = 1) {
    if (!cfg.sweep) throw ConfigError("config has no sweep section");
    const SweepSpec& sweep = *cfg.sweep;
    struct Point {
        double value;
        std::uint64_t seed;
    };
    std::vector<Point> points;
    for (const double v : sweep.values)
        for (const std::uint64_t s : sweep.seeds) points.push_back({v, s});
    std::vector<std::string> rows(points.size());
    parallel_for(static_cast<int>(points.size()), jobs, [&](int k) {
        ExperimentConfig point_cfg =
            apply_sweep_point(cfg, sweep.parameter, points[k].value, points[k].seed);
        if (jobs > 1) point_cfg.federation.num_threads = 1;  // the pool owns the cores
        const TrainResult res = cmd_train(point_cfg, /*write_outputs=*/false);
        double mean_local = 0.0;
        if (!res.reports.empty()) {
            for (const double r : res.reports.back().per_agent_local_return) mean_local += r;
            mean_local /= static_cast<double>(res.reports.back().per_agent_local_return.size());
        }
        std::ostringstream row;
        row << sweep.parameter << ',' << format_double(points[k].value) << ',' << points[k].seed
            << ',' << strategy_name(point_cfg.federation.strategy) << ','
            << format_double(res.final_global_return) << ',' << res.rounds_to_95 << ','
            << format_double(mean_local);
        rows[k] = row.str();
    });
    std::ostringstream csv;
    csv << kSweepCsvHeader << "\n";
    for (const auto& row : rows) csv << row << "\n";
    const auto path = std::filesystem::path(cfg.output_dir) / "sweep.csv";
    write_text_file(path, csv.str());
    log_info("wrote " + path.string());
    return csv.str();
}

struct TheoryRunResult {
    std::vector<SuiteReport> hard_suites;
    Theorem1Report theorem1;
    bool hard_pass = true;
};

/// Runs the lemma/theorem verification suites and writes one JSON report per
/// check. Hard assertions are the lemma and Lipschitz suites; the strict
/// improvement rate is reported but thresholded by callers.
inline TheoryRunResult cmd_verify_theory(const ExperimentConfig& cfg, int jobs = 1) {
    const TheorySpec& th = cfg.theory;
    TheoryRunResult result;
    result.hard_suites.push_back(run_lemma1_suite(th.lemma1_seeds, mix_seed(th.seed, 1), jobs));
    result.hard_suites.push_back(
        run_markov_lemma_suite(th.lemma2_pairs, th.lemma2_horizon, mix_seed(th.seed, 2), jobs));
    result.hard_suites.push_back(
        run_occupancy_lemma_suite(th.lemma3_triples, mix_seed(th.seed, 3), jobs));
    result.hard_suites.push_back(
        run_lipschitz_suite(th.lipschitz_pairs, th.lipschitz_delta, mix_seed(th.seed, 4), jobs));
    result.theorem1 = run_theorem1_suite(th.theorem1, jobs);
    for (const auto& rep : result.hard_suites) {
        write_text_file(std::filesystem::path(cfg.output_dir) / ("theory_" + rep.name + ".json"),
                        suite_report_to_json(rep).dump(2) + "\n");
        if (!rep.passed()) result.hard_pass = false;
    }
    write_text_file(
        std::filesystem::path(cfg.output_dir) / "theory_theorem1_strict_improvement.json",
        theorem1_report_to_json(result.theorem1).dump(2) + "\n");
    return result;
}

}  // namespace fedorl

// Command-line harness: environment construction, data generation, federated
// training, parameter sweeps, and numerical verification of the theory.
//
// Exit codes: 0 success, 1 usage/config error, 2 theory-assertion failure,
// 3 runtime failure.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedorl/experiment.hpp"

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

fedorl::ExperimentConfig load_config(const GlobalOptions& opts) {
    fedorl::ExperimentConfig cfg = fedorl::load_experiment_config(opts.config_path);
    if (opts.output_dir) cfg.output_dir = *opts.output_dir;
    if (opts.seed) {
        cfg.dataset.seed = *opts.seed;
        cfg.federation.seed = *opts.seed;
        cfg.theory.seed = *opts.seed;
    }
    return cfg;
}

void add_common(CLI::App* cmd, GlobalOptions& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", [&opts](const std::vector<std::string>& v) {
        opts.output_dir = v.front();
        return true;
    }, "override output_dir from the config");
    cmd->add_option("--seed", [&opts](const std::vector<std::string>& v) {
        opts.seed = std::stoull(v.front());
        return true;
    }, "override dataset/federation/theory seeds");
    cmd->add_option("--jobs", opts.jobs, "parallel shard count")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular federated offline policy optimization harness"};
    app.require_subcommand(1);
    GlobalOptions opts;

    CLI::App* gen_env = app.add_subcommand("gen-env", "build the environment and write env.json");
    CLI::App* gen_data = app.add_subcommand("gen-data", "generate per-agent datasets + manifest");
    CLI::App* train = app.add_subcommand("train", "run the federated training loop");
    CLI::App* sweep = app.add_subcommand("sweep", "run the configured parameter sweep");
    CLI::App* verify = app.add_subcommand("verify-theory", "run the theory verification suites");
    for (CLI::App* cmd : {gen_env, gen_data, train, sweep, verify}) add_common(cmd, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const fedorl::ExperimentConfig cfg = load_config(opts);
        if (gen_env->parsed()) {
            fedorl::cmd_gen_env(cfg);
        } else if (gen_data->parsed()) {
            fedorl::cmd_gen_data(cfg);
        } else if (train->parsed()) {
            const fedorl::TrainResult res = fedorl::cmd_train(cfg);
            std::printf("strategy=%s final_global_return=%s rounds_to_95pct=%d\n",
                        fedorl::strategy_name(cfg.federation.strategy),
                        fedorl::format_double(res.final_global_return).c_str(),
                        res.rounds_to_95);
        } else if (sweep->parsed()) {
            fedorl::cmd_sweep(cfg, opts.jobs);
        } else if (verify->parsed()) {
            const fedorl::TheoryRunResult res = fedorl::cmd_verify_theory(cfg, opts.jobs);
            for (const auto& rep : res.hard_suites)
                std::printf("%s: trials=%lld violations=%lld worst_ratio=%s\n", rep.name.c_str(),
                            rep.trials, rep.violations,
                            fedorl::format_double(rep.worst_ratio).c_str());
            std::printf("theorem1_strict_improvement: eligible=%lld strict=%lld rate=%s\n",
                        res.theorem1.eligible, res.theorem1.strict,
                        fedorl::format_double(res.theorem1.success_rate()).c_str());
            if (!res.hard_pass) {
                std::fprintf(stderr, "theory assertion failure\n");
                return 2;
            }
        }
    } catch (const fedorl::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime failure: %s\n", e.what());
        return 3;
    }
    return 0;
}

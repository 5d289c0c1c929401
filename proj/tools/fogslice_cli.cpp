// fogslice: command-line driver for single runs, the scenario matrix, the
// dynamic-environment run and the exact solver for tiny instances.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "fogslice/config.hpp"
#include "fogslice/harness.hpp"
#include "fogslice/oracle.hpp"

namespace fs = std::filesystem;
using namespace fogslice;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> horizon;
    std::string out;
    std::string policy;
    std::string scenario;
    std::string environment;
    std::string snapshot;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config, "YAML experiment config");
        app->add_option("--seed", seed, "master seed");
        app->add_option("--horizon", horizon, "time steps");
        app->add_option("-o,--out", out, "output directory");
        app->add_option("--policy", policy, "dqn | sau | shu | ql_nec | random");
        app->add_option("--scenario", scenario, "reward scenario R1 | R2 | R3");
        app->add_option("--environment", environment, "environment profile (E1..E5 or a config-defined id)");
        app->add_option("--snapshot", snapshot, "write the final DQN policy to this file");
    }

    ExperimentConfig load(ExperimentConfig cfg) const {
        if (!config.empty()) cfg = load_config(config);
        if (seed) cfg.seed = *seed;
        if (horizon) cfg.horizon = *horizon;
        if (!out.empty()) cfg.output_dir = out;
        if (!policy.empty()) cfg.policy = parse_policy(policy);
        if (!environment.empty()) cfg.schedule = {{builtin_profile(environment), 1}};
        if (!scenario.empty()) {
            const auto& load = cfg.schedule.front().profile.load;
            std::tie(cfg.reward, cfg.weights) = fogslice::scenario(scenario, load.c_max(), cfg.reward.h_max);
        }
        if (!snapshot.empty()) cfg.snapshot_path = snapshot;
        cfg.validate();
        return cfg;
    }
};

void print_summary(const std::string& label, const RunRecord& r) {
    std::printf("%s: GoS %.4f  utilization %.4f  cloud avoidance %.4f  performance %.4f  mean reward %.4f\n",
                label.c_str(), r.summary.gos, r.summary.utilization, r.summary.cloud_avoidance,
                r.summary.performance, r.mean_reward);
}

std::string run_label(const ExperimentConfig& c) {
    return c.reward.name + "_" + c.schedule.front().profile.id + "_" + to_string(c.policy);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Edge-cluster network slicing simulator"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    auto* run = app.add_subcommand("run", "single experiment");
    run_flags.attach(run);

    CommonFlags matrix_flags;
    int replicas = 1, jobs = 1;
    std::vector<std::string> only_policies;
    auto* matrix = app.add_subcommand("matrix", "scenario x environment x policy grid");
    matrix_flags.attach(matrix);
    matrix->add_option("--replicas", replicas, "seeds per cell")->check(CLI::PositiveNumber);
    matrix->add_option("-j,--jobs", jobs, "cells run in parallel")->check(CLI::PositiveNumber);

    CommonFlags dyn_flags;
    std::int64_t steps_per_sample = 2000;
    auto* dynamic = app.add_subcommand("dynamic", "continuous run over the E4-E1-E2-E3-E5 day schedule");
    dyn_flags.attach(dynamic);
    dynamic->add_option("--steps-per-sample", steps_per_sample, "time steps per schedule sample");

    CommonFlags oracle_flags;
    double gamma = 0.9;
    std::size_t max_states = 100000;
    auto* oracle = app.add_subcommand("oracle", "exact value iteration on a tiny instance");
    oracle_flags.attach(oracle);
    oracle->add_option("--gamma", gamma, "discount factor");
    oracle->add_option("--max-states", max_states, "refuse larger state spaces");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto cfg = run_flags.load(ExperimentConfig{});
            const auto path = fs::path(cfg.output_dir) / (run_label(cfg) + ".csv");
            const auto rec = run_experiment(cfg, path);
            print_summary(run_label(cfg), rec);
            std::printf("wrote %s\n", path.string().c_str());
        } else if (*matrix) {
            const auto cfg = matrix_flags.load(ExperimentConfig{});
            MatrixOptions opts;
            opts.replicas = replicas;
            opts.jobs = jobs;
            if (!matrix_flags.policy.empty()) opts.policies = {cfg.policy};
            if (!matrix_flags.scenario.empty()) opts.scenarios = {cfg.reward.name};
            if (!matrix_flags.environment.empty()) opts.environments = {matrix_flags.environment};
            const auto cells = run_paper_matrix(cfg, opts, [](const MatrixCell& c) {
                if (c.record) print_summary(c.name(), *c.record);
                else std::printf("%s: FAILED: %s\n", c.name().c_str(), c.error.c_str());
                std::fflush(stdout);
            });
            std::printf("wrote %s\n", (fs::path(cfg.output_dir) / "matrix_summary.csv").string().c_str());
            for (const auto& c : cells)
                if (!c.record) return 1;
        } else if (*dynamic) {
            auto cfg = dyn_flags.load(ExperimentConfig{});
            Schedule schedule = dyn_flags.config.empty() || cfg.schedule.size() < 2 ? day_schedule(steps_per_sample)
                                                                                      : cfg.schedule;
            const auto path = fs::path(cfg.output_dir) / ("dynamic_" + to_string(cfg.policy) + ".csv");
            const auto rec = run_dynamic(cfg, schedule, path);
            print_summary("dynamic_" + to_string(cfg.policy), rec);
            for (auto t : switch_times(schedule)) std::printf("switch at t=%lld\n", static_cast<long long>(t));
            for (auto t : rec.detections) std::printf("change detected at t=%lld\n", static_cast<long long>(t));
            std::printf("wrote %s\n", path.string().c_str());
        } else if (*oracle) {
            const auto cfg = oracle_flags.load(oracle_flags.config.empty() ? tiny_experiment_config() : ExperimentConfig{});
            TinyMdpSpec spec{cfg.topology, cfg.schedule.front().profile, cfg.reward, gamma, 1e-8, max_states};
            const auto estimate = ClusterOracle::estimate_states(spec);
            if (estimate > max_states) {
                std::fprintf(stderr, "refusing: state space has %llu states (limit %zu)\n",
                             static_cast<unsigned long long>(estimate), max_states);
                return 2;
            }
            const ClusterOracle solver(spec);
            const auto& sol = solver.solution();
            std::printf("states %zu  sweeps %d  Bellman residual %.3g\n", solver.num_states(), sol.iterations,
                        sol.bellman_residual);
            // Greedy policy from the empty cluster, one row per request.
            std::ostringstream os;
            os << "#schema=fogslice.oracle/1\nprimary_fn,u,c,h,action,value\n";
            const ClusterState empty(cfg.topology.k);
            for (const auto& r : solver.requests())
                os << r.req.primary_fn << ',' << r.req.u << ',' << r.req.c << ',' << r.req.h << ','
                   << solver.act(empty, r.req).index() << ',' << format_number(solver.value(empty, r.req)) << '\n';
            const auto path = fs::path(cfg.output_dir) / "oracle_policy.csv";
            write_text(path, os.str());
            std::printf("wrote %s\n", path.string().c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const TrainingFault& e) {
        std::fprintf(stderr, "training fault: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

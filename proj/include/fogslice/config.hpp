#pragma once

// Experiment configuration: the plain-text (YAML) file format, defaults for
// every constant, and a canonical dump used for digests.

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fogslice/baselines.hpp"
#include "fogslice/cluster.hpp"
#include "fogslice/dqn_agent.hpp"
#include "fogslice/environment.hpp"
#include "fogslice/error.hpp"
#include "fogslice/mdp.hpp"
#include "fogslice/metrics.hpp"
#include "fogslice/rng.hpp"

namespace fogslice {

enum class PolicyKind { dqn, sau, shu, ql_nec, random };

inline std::string to_string(PolicyKind p) {
    switch (p) {
        case PolicyKind::dqn: return "dqn";
        case PolicyKind::sau: return "sau";
        case PolicyKind::shu: return "shu";
        case PolicyKind::ql_nec: return "ql_nec";
        case PolicyKind::random: return "random";
    }
    return "?";
}

inline PolicyKind parse_policy(const std::string& s) {
    if (s == "dqn") return PolicyKind::dqn;
    if (s == "sau") return PolicyKind::sau;
    if (s == "shu") return PolicyKind::shu;
    if (s == "ql_nec" || s == "ql" || s == "qlnec") return PolicyKind::ql_nec;
    if (s == "random") return PolicyKind::random;
    throw ConfigError("unknown policy '" + s + "'");
}

/// How a learning agent reacts to a detected change in the utility mix.
enum class AdaptationMode { none, reboost, policy_bank };

struct AdaptationConfig {
    AdaptationMode mode = AdaptationMode::reboost;
    int window = 10000;          // sliding window of utilities
    double quantile = 0.99;      // chi-square critical quantile
    int check_interval = 500;    // steps between tests
    double boost_to = 0.3;       // epsilon after a detection
};

struct QlConfig {
    double alpha = 0.01;
    double gamma = 0.9;
};

struct ExperimentConfig {
    ClusterTopology topology = ClusterTopology::hexagonal7(7);
    Schedule schedule{{builtin_profile("E3"), 1}};
    RewardSystem reward = RewardSystem::r1();
    ScenarioWeights weights{0.7, 0.3};
    PolicyKind policy = PolicyKind::dqn;
    AgentConfig agent{};
    QlConfig ql{};
    ServePreference preference = ServePreference::primary_then_neighbors;
    AdaptationConfig adaptation{};
    bool adapt = false;           // detector active (dynamic runs)
    std::int64_t horizon = 300000;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::int64_t window = 2000;
    std::string snapshot_path;    // optional: save the final DQN policy here

    void validate() const {
        topology.validate();
        validate_schedule(schedule, topology.min_capacity());
        reward.validate();
        weights.validate();
        agent.validate();
        if (horizon < 0) throw ConfigError("horizon must be >= 0");
        if (window < 1) throw ConfigError("window must be >= 1");
        if (ql.alpha <= 0.0 || ql.alpha > 1.0) throw ConfigError("ql.alpha must lie in (0, 1]");
        for (const auto& seg : schedule)
            if (!seg.profile.primary_fn_rule.weights.empty() &&
                static_cast<int>(seg.profile.primary_fn_rule.weights.size()) != topology.k)
                throw ConfigError("primary FN weights need one entry per FN");
    }
};

/// Reward system and GoS weight of the three reference scenarios (1, 2, 3).
inline std::pair<RewardSystem, ScenarioWeights> scenario(const std::string& name, int c_max = 4, int h_max = 30) {
    static const std::map<std::string, double> gos_weight{{"R1", 0.7}, {"R2", 0.5}, {"R3", 0.3}};
    auto rs = RewardSystem::named(name, c_max, h_max);
    return {rs, ScenarioWeights::from_gos_weight(gos_weight.at(rs.name))};
}

namespace detail {

template <class T>
T get_or(const YAML::Node& n, const char* key, T fallback) {
    if (!n || !n[key]) return fallback;
    try {
        return n[key].as<T>();
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

inline EnvironmentProfile parse_profile(const std::string& id, const YAML::Node& n,
                                        const std::map<std::string, EnvironmentProfile>& known) {
    EnvironmentProfile p;
    if (n["base"]) {
        const auto base = n["base"].as<std::string>();
        p = known.contains(base) ? known.at(base) : builtin_profile(base);
    } else {
        p.load = default_load_distribution();
    }
    p.id = id;
    if (n["utility"]) {
        const auto v = n["utility"].as<std::vector<double>>();
        if (v.size() != kMaxUtility) throw ConfigError("profile '" + id + "': utility needs 10 probabilities");
        std::copy(v.begin(), v.end(), p.utility.probs.begin());
    }
    p.load.c_values = get_or(n, "c_values", p.load.c_values);
    p.load.c_probs = get_or(n, "c_probs", p.load.c_probs);
    p.load.h_values = get_or(n, "h_values", p.load.h_values);
    p.load.h_probs = get_or(n, "h_probs", p.load.h_probs);
    p.primary_fn_rule.weights = get_or(n, "primary_fn_weights", p.primary_fn_rule.weights);
    return p;
}

inline EnvironmentProfile resolve_profile(const std::string& id, const std::map<std::string, EnvironmentProfile>& known) {
    const auto it = known.find(id);
    return it != known.end() ? it->second : builtin_profile(id);
}

}  // namespace detail

/// Builds a config from a parsed YAML document; absent keys keep their defaults.
inline ExperimentConfig config_from_yaml(const YAML::Node& root) {
    using detail::get_or;
    ExperimentConfig cfg;
    try {
        cfg.seed = get_or<std::uint64_t>(root, "seed", cfg.seed);
        cfg.horizon = get_or<std::int64_t>(root, "horizon", cfg.horizon);
        cfg.window = get_or<std::int64_t>(root, "window", cfg.window);
        cfg.output_dir = get_or<std::string>(root, "output_dir", cfg.output_dir);
        cfg.snapshot_path = get_or<std::string>(root, "snapshot", cfg.snapshot_path);
        cfg.policy = parse_policy(get_or<std::string>(root, "policy", to_string(cfg.policy)));
        const auto pref = get_or<std::string>(root, "serve_preference", "primary");
        if (pref == "primary") cfg.preference = ServePreference::primary_then_neighbors;
        else if (pref == "most_free") cfg.preference = ServePreference::most_free_blocks;
        else throw ConfigError("serve_preference must be 'primary' or 'most_free'");

        if (const auto t = root["topology"]) {
            const auto preset = get_or<std::string>(t, "preset", "hexagonal7");
            const int cap = get_or<int>(t, "capacity", 7);
            if (preset == "hexagonal7") cfg.topology = ClusterTopology::hexagonal7(cap);
            else if (preset == "full") cfg.topology = ClusterTopology::fully_connected(get_or<int>(t, "k", 7), cap);
            else if (preset == "custom") cfg.topology = ClusterTopology{};
            else throw ConfigError("unknown topology preset '" + preset + "'");
            if (t["k"] && preset == "custom") cfg.topology.k = t["k"].as<int>();
            if (t["capacities"]) cfg.topology.capacities = t["capacities"].as<std::vector<int>>();
            if (t["neighbors"]) cfg.topology.neighbors = t["neighbors"].as<std::vector<std::vector<int>>>();
            cfg.topology.ec_index = get_or<int>(t, "ec_index", cfg.topology.ec_index);
        }

        std::map<std::string, EnvironmentProfile> known;
        if (const auto ps = root["profiles"])
            for (const auto& kv : ps) {
                const auto id = kv.first.as<std::string>();
                known[id] = detail::parse_profile(id, kv.second, known);
            }

        if (const auto s = root["schedule"]) {
            const auto per_sample = get_or<std::int64_t>(s, "steps_per_sample", 2000);
            cfg.schedule.clear();
            for (const auto& seg : s["segments"]) {
                ScheduleSegment out;
                out.profile = detail::resolve_profile(seg["profile"].as<std::string>(), known);
                if (seg["duration"]) out.duration = seg["duration"].as<std::int64_t>();
                else out.duration = get_or<std::int64_t>(seg, "samples", 1) * per_sample;
                cfg.schedule.push_back(out);
            }
        } else if (root["environment"]) {
            cfg.schedule = {{detail::resolve_profile(root["environment"].as<std::string>(), known), 1}};
        }

        const int c_max = cfg.schedule.front().profile.load.c_max();
        const int h_max_default = cfg.schedule.front().profile.load.h_max();
        const auto scen = get_or<std::string>(root, "scenario", "R1");
        std::tie(cfg.reward, cfg.weights) = scenario(scen, c_max, h_max_default);
        if (const auto r = root["reward"]) {
            cfg.reward.r_sh = get_or(r, "r_sh", cfg.reward.r_sh);
            cfg.reward.r_rh = get_or(r, "r_rh", cfg.reward.r_rh);
            cfg.reward.r_bh = get_or(r, "r_bh", cfg.reward.r_bh);
            cfg.reward.r_sl = get_or(r, "r_sl", cfg.reward.r_sl);
            cfg.reward.r_rl = get_or(r, "r_rl", cfg.reward.r_rl);
            cfg.reward.r_bl = get_or(r, "r_bl", cfg.reward.r_bl);
            cfg.reward.load_bonus_enabled = get_or(r, "load_bonus", cfg.reward.load_bonus_enabled);
            cfg.reward.u_h = get_or(r, "u_h", cfg.reward.u_h);
            cfg.reward.c_max = get_or(r, "c_max", cfg.reward.c_max);
            cfg.reward.h_max = get_or(r, "h_max", cfg.reward.h_max);
        }
        if (const auto w = root["weights"]) cfg.weights = ScenarioWeights::from_gos_weight(get_or(w, "gos", cfg.weights.w_g));

        if (const auto a = root["agent"]) {
            auto& ag = cfg.agent;
            ag.gamma = get_or(a, "gamma", ag.gamma);
            ag.epsilon_start = get_or(a, "epsilon_start", ag.epsilon_start);
            ag.epsilon_hold_fraction = get_or(a, "epsilon_hold_fraction", ag.epsilon_hold_fraction);
            ag.epsilon_decay = get_or(a, "epsilon_decay", ag.epsilon_decay);
            ag.epsilon_min = get_or(a, "epsilon_min", ag.epsilon_min);
            ag.batch_size = get_or(a, "batch_size", ag.batch_size);
            ag.target_interval = get_or(a, "target_interval", ag.target_interval);
            ag.target_rate = get_or(a, "target_rate", ag.target_rate);
            ag.replay_capacity = get_or(a, "replay_capacity", ag.replay_capacity);
            ag.learning_rate = get_or(a, "learning_rate", ag.learning_rate);
            ag.learning_rate_decay = get_or(a, "learning_rate_decay", ag.learning_rate_decay);
            ag.momentum = get_or(a, "momentum", ag.momentum);
            ag.hidden = get_or(a, "hidden", ag.hidden);
            ag.normalize_inputs = get_or(a, "normalize_inputs", ag.normalize_inputs);
            ag.stop_on_convergence = get_or(a, "stop_on_convergence", ag.stop_on_convergence);
            ag.convergence_window = get_or(a, "convergence_window", ag.convergence_window);
            ag.convergence_tolerance = get_or(a, "convergence_tolerance", ag.convergence_tolerance);
        }
        if (const auto q = root["ql"]) {
            cfg.ql.alpha = get_or(q, "alpha", cfg.ql.alpha);
            cfg.ql.gamma = get_or(q, "gamma", cfg.ql.gamma);
        }
        if (const auto d = root["adaptation"]) {
            cfg.adapt = get_or(d, "enabled", true);
            const auto mode = get_or<std::string>(d, "mode", "reboost");
            if (mode == "none") cfg.adaptation.mode = AdaptationMode::none;
            else if (mode == "reboost") cfg.adaptation.mode = AdaptationMode::reboost;
            else if (mode == "policy_bank") cfg.adaptation.mode = AdaptationMode::policy_bank;
            else throw ConfigError("adaptation.mode must be none, reboost or policy_bank");
            cfg.adaptation.window = get_or(d, "window", cfg.adaptation.window);
            cfg.adaptation.quantile = get_or(d, "quantile", cfg.adaptation.quantile);
            cfg.adaptation.check_interval = get_or(d, "check_interval", cfg.adaptation.check_interval);
            cfg.adaptation.boost_to = get_or(d, "boost_to", cfg.adaptation.boost_to);
        }
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    try {
        return config_from_yaml(YAML::LoadFile(path));
    } catch (const YAML::BadFile&) {
        throw ConfigError("cannot read config file " + path);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline ExperimentConfig config_from_string(const std::string& text) {
    try {
        return config_from_yaml(YAML::Load(text));
    } catch (const YAML::ParserException& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

/// Canonical text form of every setting that affects a run's output
/// (the output directory and snapshot path are excluded).
inline std::string canonical_dump(const ExperimentConfig& c) {
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    e << YAML::BeginMap;
    e << YAML::Key << "seed" << YAML::Value << c.seed;
    e << YAML::Key << "horizon" << YAML::Value << c.horizon;
    e << YAML::Key << "window" << YAML::Value << c.window;
    e << YAML::Key << "policy" << YAML::Value << to_string(c.policy);
    e << YAML::Key << "serve_preference" << YAML::Value
      << (c.preference == ServePreference::primary_then_neighbors ? "primary" : "most_free");
    e << YAML::Key << "topology" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "k" << YAML::Value << c.topology.k;
    e << YAML::Key << "capacities" << YAML::Value << YAML::Flow << c.topology.capacities;
    e << YAML::Key << "neighbors" << YAML::Value << YAML::Flow << c.topology.neighbors;
    e << YAML::Key << "ec_index" << YAML::Value << c.topology.ec_index;
    e << YAML::EndMap;
    e << YAML::Key << "schedule" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : c.schedule) {
        e << YAML::BeginMap;
        e << YAML::Key << "profile" << YAML::Value << s.profile.id;
        e << YAML::Key << "duration" << YAML::Value << s.duration;
        e << YAML::Key << "utility" << YAML::Value << YAML::Flow
          << std::vector<double>(s.profile.utility.probs.begin(), s.profile.utility.probs.end());
        e << YAML::Key << "c_values" << YAML::Value << YAML::Flow << s.profile.load.c_values;
        e << YAML::Key << "c_probs" << YAML::Value << YAML::Flow << s.profile.load.c_probs;
        e << YAML::Key << "h_values" << YAML::Value << YAML::Flow << s.profile.load.h_values;
        e << YAML::Key << "h_probs" << YAML::Value << YAML::Flow << s.profile.load.h_probs;
        e << YAML::Key << "primary_fn_weights" << YAML::Value << YAML::Flow << s.profile.primary_fn_rule.weights;
        e << YAML::EndMap;
    }
    e << YAML::EndSeq;
    const auto& r = c.reward;
    e << YAML::Key << "reward" << YAML::Value << YAML::Flow
      << std::vector<double>{r.r_sh, r.r_rh, r.r_bh, r.r_sl, r.r_rl, r.r_bl, double(r.load_bonus_enabled),
                             double(r.u_h), double(r.c_max), double(r.h_max)};
    e << YAML::Key << "weights" << YAML::Value << YAML::Flow << std::vector<double>{c.weights.w_g, c.weights.w_u};
    const auto& a = c.agent;
    e << YAML::Key << "agent" << YAML::Value << YAML::Flow
      << std::vector<double>{a.gamma, a.epsilon_start, a.epsilon_hold_fraction, a.epsilon_decay, a.epsilon_min,
                             double(a.batch_size), double(a.target_interval), a.target_rate, double(a.replay_capacity),
                             a.learning_rate, a.learning_rate_decay, a.momentum, double(a.normalize_inputs),
                             double(a.stop_on_convergence), double(a.convergence_window), a.convergence_tolerance};
    e << YAML::Key << "hidden" << YAML::Value << YAML::Flow << a.hidden;
    e << YAML::Key << "ql" << YAML::Value << YAML::Flow << std::vector<double>{c.ql.alpha, c.ql.gamma};
    e << YAML::Key << "adaptation" << YAML::Value << YAML::Flow
      << std::vector<double>{double(c.adapt), double(static_cast<int>(c.adaptation.mode)), double(c.adaptation.window),
                             c.adaptation.quantile, double(c.adaptation.check_interval), c.adaptation.boost_to};
    e << YAML::EndMap;
    return e.c_str();
}

inline std::uint64_t config_digest(const ExperimentConfig& c) { return fnv1a(canonical_dump(c)); }

}  // namespace fogslice

namespace fogslice {

/// Small instance with an exactly solvable MDP: two mutually neighboring FNs of
/// two blocks, C = H = {1, 2}, utilities 3 and 9 (low/high) with equal odds.
inline ExperimentConfig tiny_experiment_config() {
    ExperimentConfig c;
    c.topology = ClusterTopology::fully_connected(2, 2);
    EnvironmentProfile p;
    p.id = "tiny";
    p.utility.probs.fill(0.0);
    p.utility.probs[2] = 0.5;
    p.utility.probs[8] = 0.5;
    p.load = LoadDistribution{{1, 2}, {0.5, 0.5}, {1, 2}, {0.5, 0.5}};
    c.schedule = {{p, 1}};
    std::tie(c.reward, c.weights) = scenario("R1", 2, 2);
    c.horizon = 50000;
    c.window = 1000;
    return c;
}

}  // namespace fogslice

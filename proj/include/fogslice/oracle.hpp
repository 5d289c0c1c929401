#pragma once

// Exact dynamic-programming solutions for small instances, used to check the
// learning agents. Two layers: a generic finite-MDP value iteration, and an
// enumerator that turns a tiny cluster (few FNs, blocks and holding times)
// into its exact MDP over (occupancy profile, request).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fogslice/cluster.hpp"
#include "fogslice/environment.hpp"
#include "fogslice/error.hpp"
#include "fogslice/mdp.hpp"

namespace fogslice {

/// Explicit finite MDP: per state a list of actions, each with an expected
/// reward and a sparse successor distribution.
struct FiniteMdp {
    struct Outcome {
        std::size_t next;
        double prob;
    };
    struct ActionSpec {
        int label = 0;  // caller's action identifier
        double reward = 0.0;
        std::vector<Outcome> outcomes;
    };
    std::vector<std::vector<ActionSpec>> actions;  // actions[s]

    std::size_t size() const { return actions.size(); }
};

struct ValueIterationResult {
    std::vector<double> values;
    std::vector<int> policy;          // chosen action label per state
    std::vector<double> deltas;       // sup-norm change per sweep
    double bellman_residual = 0.0;    // max |Q - (r + gamma E max Q')| over all (s, a)
    int iterations = 0;
};

/// Synchronous value iteration to a sup-norm change below `tolerance`.
/// Ties in the greedy policy go to the first listed action.
inline ValueIterationResult value_iteration(const FiniteMdp& mdp, double gamma, double tolerance = 1e-8,
                                            int max_iterations = 1000000) {
    if (gamma < 0.0 || gamma >= 1.0) throw ContractViolation("value_iteration: gamma must lie in [0, 1)");
    const std::size_t n = mdp.size();
    auto q_of = [&](const std::vector<double>& v, const FiniteMdp::ActionSpec& a) {
        double q = a.reward;
        for (const auto& o : a.outcomes) q += gamma * o.prob * v[o.next];
        return q;
    };
    ValueIterationResult res;
    std::vector<double> v(n, 0.0), next(n);
    for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
        double delta = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& a : mdp.actions[s]) best = std::max(best, q_of(v, a));
            next[s] = best;
            delta = std::max(delta, std::abs(best - v[s]));
        }
        v.swap(next);
        res.deltas.push_back(delta);
        if (delta < tolerance) break;
    }
    res.policy.resize(n);
    double residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& a : mdp.actions[s]) {
            const double q = q_of(v, a);
            if (q > best) {
                best = q;
                res.policy[s] = a.label;
            }
        }
    }
    // Q(s,a) from the fixed point, then one more backup through max_a' Q(s',a').
    for (std::size_t s = 0; s < n; ++s)
        for (const auto& a : mdp.actions[s]) {
            const double q = q_of(v, a);
            double backed = a.reward;
            for (const auto& o : a.outcomes) {
                double m = -std::numeric_limits<double>::infinity();
                for (const auto& a2 : mdp.actions[o.next]) m = std::max(m, q_of(v, a2));
                backed += gamma * o.prob * m;
            }
            residual = std::max(residual, std::abs(q - backed));
        }
    res.bellman_residual = residual;
    res.values = std::move(v);
    return res;
}

/// Tiny cluster instance for the exact solver.
struct TinyMdpSpec {
    ClusterTopology topo;
    EnvironmentProfile profile;
    RewardSystem rewards;
    double gamma = 0.9;
    double tolerance = 1e-8;
    std::size_t max_states = 100000;
};

class OracleTooLarge : public ConfigError {
public:
    OracleTooLarge(std::uint64_t estimate, std::size_t limit)
        : ConfigError("oracle state space has " + std::to_string(estimate) + " states, limit is " +
                      std::to_string(limit)),
          estimate_(estimate) {}
    std::uint64_t estimate() const { return estimate_; }

private:
    std::uint64_t estimate_;
};

/// Exact solution of the cluster MDP. An FN's occupancy is summarized by the
/// number of busy blocks at each remaining time 1..h_max-1 (the most that can
/// be left after a tick), which determines all future releases. The state is
/// that profile for every FN plus the pending request.
class ClusterOracle {
public:
    explicit ClusterOracle(TinyMdpSpec spec) : spec_(std::move(spec)) {
        spec_.topo.validate();
        spec_.profile.validate(spec_.topo.min_capacity());
        horizon_ = std::max(spec_.profile.load.h_max() - 1, 0);
        enumerate_profiles();
        enumerate_requests();
        const std::uint64_t estimate = num_configs_ * requests_.size();
        if (estimate > spec_.max_states) throw OracleTooLarge(estimate, spec_.max_states);
        solve();
    }

    struct Request {
        TaskRequest req;
        double prob;
    };

    const TinyMdpSpec& spec() const { return spec_; }
    std::size_t num_states() const { return static_cast<std::size_t>(num_configs_) * requests_.size(); }
    const std::vector<Request>& requests() const { return requests_; }
    const ValueIterationResult& solution() const { return result_; }

    /// Optimal value of observing `req` with cluster occupancy `cluster`.
    double value(const ClusterState& cluster, const TaskRequest& req) const {
        return result_.values[state_index(config_index(cluster), request_index(req))];
    }

    /// Optimal action (lowest index among ties, feasibility-restricted).
    Action act(const ClusterState& cluster, const TaskRequest& req) const {
        return {result_.policy[state_index(config_index(cluster), request_index(req))], spec_.topo.k};
    }

    /// Q*(s, a) for every allowed action of the state, as (action index, value).
    std::vector<std::pair<int, double>> q_values(const ClusterState& cluster, const TaskRequest& req) const {
        const auto s = state_index(config_index(cluster), request_index(req));
        std::vector<std::pair<int, double>> out;
        const auto w = expected_next(result_.values);
        for (const auto& e : edges_[s]) out.emplace_back(e.action, e.reward + spec_.gamma * w[e.next_config]);
        return out;
    }

    /// Number of states a spec would need, without building anything.
    static std::uint64_t estimate_states(const TinyMdpSpec& spec) {
        const int horizon = std::max(spec.profile.load.h_max() - 1, 0);
        std::uint64_t configs = 1;
        for (int n : spec.topo.capacities) configs = sat_mul(configs, count_profiles(n, horizon));
        std::uint64_t us = 0;
        for (double p : spec.profile.utility.probs) us += p > 0.0;
        std::uint64_t n = sat_mul(configs, static_cast<std::uint64_t>(spec.topo.k));
        n = sat_mul(n, us);
        n = sat_mul(n, spec.profile.load.c_values.size());
        return sat_mul(n, spec.profile.load.h_values.size());
    }

private:
    using Profile = std::vector<int>;  // busy blocks with remaining time 1..horizon_

    // Saturates at the max instead of wrapping; estimates for big clusters only need to compare as huge.
    static std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
        std::uint64_t r;
        return __builtin_mul_overflow(a, b, &r) ? std::numeric_limits<std::uint64_t>::max() : r;
    }

    static std::uint64_t count_profiles(int capacity, int horizon) {
        // vectors of `horizon` nonnegative ints with sum <= capacity: C(capacity + horizon, horizon)
        unsigned __int128 c = 1;
        for (int i = 1; i <= horizon; ++i) {
            c = c * static_cast<unsigned>(capacity + i) / static_cast<unsigned>(i);
            if (c > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
        }
        return static_cast<std::uint64_t>(c);
    }

    void enumerate_profiles() {
        const int k = spec_.topo.k;
        profiles_.resize(static_cast<std::size_t>(k));
        num_configs_ = 1;
        for (int fn = 1; fn <= k; ++fn) {
            const int cap = spec_.topo.capacity(fn);
            auto& list = profiles_[static_cast<std::size_t>(fn - 1)];
            if (count_profiles(cap, horizon_) > spec_.max_states)
                throw OracleTooLarge(count_profiles(cap, horizon_), spec_.max_states);
            Profile p(static_cast<std::size_t>(horizon_), 0);
            gen(p, 0, cap, list);
            radix_.push_back(num_configs_);
            num_configs_ *= list.size();
            if (num_configs_ > spec_.max_states) throw OracleTooLarge(estimate_states(spec_), spec_.max_states);
        }
    }

    static void gen(Profile& p, std::size_t pos, int left, std::vector<Profile>& out) {
        if (pos == p.size()) {
            out.push_back(p);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            p[pos] = v;
            gen(p, pos + 1, left - v, out);
        }
        p[pos] = 0;
    }

    void enumerate_requests() {
        const auto& pr = spec_.profile;
        const int k = spec_.topo.k;
        std::vector<double> fn_probs(static_cast<std::size_t>(k), 1.0 / k);
        if (!pr.primary_fn_rule.weights.empty()) fn_probs = pr.primary_fn_rule.weights;
        for (int f = 1; f <= k; ++f)
            for (int u = 1; u <= kMaxUtility; ++u)
                for (std::size_t ci = 0; ci < pr.load.c_values.size(); ++ci)
                    for (std::size_t hi = 0; hi < pr.load.h_values.size(); ++hi) {
                        const double p = fn_probs[static_cast<std::size_t>(f - 1)] * pr.utility.probs[u - 1] *
                                         pr.load.c_probs[ci] * pr.load.h_probs[hi];
                        if (p <= 0.0) continue;
                        TaskRequest r;
                        r.primary_fn = f;
                        r.u = u;
                        r.c = pr.load.c_values[ci];
                        r.h = pr.load.h_values[hi];
                        requests_.push_back({r, p});
                    }
    }

    std::size_t request_index(const TaskRequest& r) const {
        for (std::size_t i = 0; i < requests_.size(); ++i) {
            const auto& q = requests_[i].req;
            if (q.primary_fn == r.primary_fn && q.u == r.u && q.c == r.c && q.h == r.h) return i;
        }
        throw ContractViolation("oracle: request outside the enumerated support");
    }

    std::size_t profile_index(int fn, const Profile& p) const {
        const auto& list = profiles_[static_cast<std::size_t>(fn - 1)];
        const auto it = std::find(list.begin(), list.end(), p);
        if (it == list.end()) throw ContractViolation("oracle: occupancy outside the enumerated space");
        return static_cast<std::size_t>(it - list.begin());
    }

    std::size_t config_index(const ClusterState& cluster) const {
        std::size_t idx = 0;
        for (int fn = 1; fn <= spec_.topo.k; ++fn) {
            Profile p(static_cast<std::size_t>(horizon_), 0);
            for (const auto& a : cluster.allocations(fn)) {
                if (a.remaining < 1 || a.remaining > horizon_)
                    throw ContractViolation("oracle: remaining time outside 1..h_max-1");
                p[static_cast<std::size_t>(a.remaining - 1)] += a.blocks;
            }
            idx += profile_index(fn, p) * radix_[static_cast<std::size_t>(fn - 1)];
        }
        return idx;
    }

    std::size_t state_index(std::size_t config, std::size_t request) const { return config * requests_.size() + request; }

    std::vector<Profile> decode(std::size_t config) const {
        std::vector<Profile> out;
        for (int fn = 1; fn <= spec_.topo.k; ++fn) {
            const auto& list = profiles_[static_cast<std::size_t>(fn - 1)];
            out.push_back(list[(config / radix_[static_cast<std::size_t>(fn - 1)]) % list.size()]);
        }
        return out;
    }

    std::size_t encode(const std::vector<Profile>& ps) const {
        std::size_t idx = 0;
        for (int fn = 1; fn <= spec_.topo.k; ++fn)
            idx += profile_index(fn, ps[static_cast<std::size_t>(fn - 1)]) * radix_[static_cast<std::size_t>(fn - 1)];
        return idx;
    }

    static int busy_of(const Profile& p) {
        int b = 0;
        for (int x : p) b += x;
        return b;
    }

    void solve() {
        const int k = spec_.topo.k;
        const std::size_t nr = requests_.size();
        edges_.resize(num_states());
        for (std::size_t cfg = 0; cfg < num_configs_; ++cfg) {
            const auto ps = decode(cfg);
            auto ticked = ps;  // remaining r -> r - 1; r = 1 is released
            for (auto& p : ticked) {
                if (p.empty()) continue;
                std::rotate(p.begin(), p.begin() + 1, p.end());
                p.back() = 0;
            }
            for (std::size_t ri = 0; ri < nr; ++ri) {
                const TaskRequest& req = requests_[ri].req;
                auto fits_fn = [&](int fn) {
                    return spec_.topo.capacity(fn) - busy_of(ps[static_cast<std::size_t>(fn - 1)]) >= req.c;
                };
                std::vector<int> allowed;
                if (fits_fn(req.primary_fn)) allowed.push_back(req.primary_fn);
                for (int nb : spec_.topo.neighbors_of(req.primary_fn))
                    if (fits_fn(nb)) allowed.push_back(nb);
                std::sort(allowed.begin(), allowed.end());
                const bool forced = allowed.empty();
                allowed.push_back(k + 1);
                auto& out = edges_[state_index(cfg, ri)];
                for (int a : allowed) {
                    auto next = ticked;
                    // a task held for h steps has h - 1 left after this step's tick
                    if (a <= k && req.h >= 2)
                        next[static_cast<std::size_t>(a - 1)][static_cast<std::size_t>(req.h - 2)] += req.c;
                    out.push_back({a, compute_reward(spec_.rewards, Action(a, k), req, forced), encode(next)});
                }
            }
        }
        iterate();
    }

    /// Expected value of the next state given the post-tick configuration.
    std::vector<double> expected_next(const std::vector<double>& v) const {
        const std::size_t nr = requests_.size();
        std::vector<double> w(num_configs_, 0.0);
        for (std::size_t cfg = 0; cfg < num_configs_; ++cfg)
            for (std::size_t r = 0; r < nr; ++r) w[cfg] += requests_[r].prob * v[state_index(cfg, r)];
        return w;
    }

    void iterate() {
        const double gamma = spec_.gamma;
        if (gamma < 0.0 || gamma >= 1.0) throw ContractViolation("oracle: gamma must lie in [0, 1)");
        const std::size_t n = num_states();
        std::vector<double> v(n, 0.0);
        auto& res = result_;
        for (res.iterations = 0; res.iterations < 1000000; ++res.iterations) {
            const auto w = expected_next(v);
            double delta = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (const auto& e : edges_[s]) best = std::max(best, e.reward + gamma * w[e.next_config]);
                delta = std::max(delta, std::abs(best - v[s]));
                v[s] = best;  // w is fixed for the sweep, so this stays a Jacobi update
            }
            res.deltas.push_back(delta);
            if (delta < spec_.tolerance) break;
        }
        const auto w = expected_next(v);
        res.policy.assign(n, 0);
        std::vector<double> vmax(n);
        for (std::size_t s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& e : edges_[s]) {
                const double q = e.reward + gamma * w[e.next_config];
                if (q > best) {
                    best = q;
                    res.policy[s] = e.action;
                }
            }
            vmax[s] = best;
        }
        // residual of Q = r + gamma E max_a' Q(s', a') with Q taken from the fixed point
        const auto w2 = expected_next(vmax);
        double residual = 0.0;
        for (std::size_t s = 0; s < n; ++s)
            for (const auto& e : edges_[s])
                residual = std::max(residual, std::abs(e.reward + gamma * w2[e.next_config] -
                                                       (e.reward + gamma * w[e.next_config])));
        res.bellman_residual = residual;
        res.values = std::move(v);
    }

    struct Edge {
        int action;
        double reward;
        std::size_t next_config;
    };

    TinyMdpSpec spec_;
    int horizon_ = 0;
    std::vector<std::vector<Profile>> profiles_;
    std::vector<std::size_t> radix_;
    std::size_t num_configs_ = 1;
    std::vector<Request> requests_;
    std::vector<std::vector<Edge>> edges_;
    ValueIterationResult result_;
};

}  // namespace fogslice

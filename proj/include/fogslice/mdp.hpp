#pragma once

// The slicing MDP seen by the edge controller: state encoding, actions,
// the immediate reward, and the one-step transition.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fogslice/cluster.hpp"
#include "fogslice/environment.hpp"
#include "fogslice/error.hpp"

namespace fogslice {

/// (b_1, l_1, ..., b_k, l_k, primary FN, u, c, h); length 2k + 4.
using StateVector = std::vector<double>;

inline constexpr std::size_t state_width(int k) { return static_cast<std::size_t>(2 * k + 4); }

/// Action index a in 1..k+1: a <= k serves at FN a, a = k+1 refers the task to the cloud.
class Action {
public:
    Action() = default;
    Action(int index, int k) : index_(index), k_(k) {
        if (k < 1 || index < 1 || index > k + 1)
            throw ContractViolation("action index " + std::to_string(index) + " outside 1.." + std::to_string(k + 1));
    }
    static Action serve(int fn, int k) {
        if (fn > k) throw ContractViolation("serve action needs an FN index <= k");
        return {fn, k};
    }
    static Action cloud(int k) { return {k + 1, k}; }

    int index() const { return index_; }
    int k() const { return k_; }
    bool is_cloud() const { return index_ == k_ + 1; }
    bool is_serve() const { return !is_cloud(); }
    /// Zero-based position in a Q-vector.
    std::size_t slot() const { return static_cast<std::size_t>(index_ - 1); }

    friend bool operator==(const Action&, const Action&) = default;

private:
    int index_ = 1;
    int k_ = 1;
};

/// Reward table r_(a,u) plus the optional load term r_L = c_max*h_max + 1 - c*h.
struct RewardSystem {
    std::string name = "custom";
    double r_sh = 0, r_rh = 0, r_bh = 0;  // serve / reject / busy-reject, high utility
    double r_sl = 0, r_rl = 0, r_bl = 0;  // same, low utility
    bool load_bonus_enabled = true;
    int u_h = 8;
    int c_max = 4;
    int h_max = 30;

    double load_term(const TaskRequest& req) const {
        if (!load_bonus_enabled) return 0.0;
        return static_cast<double>(c_max * h_max + 1 - req.c * req.h);
    }

    bool high_utility(int u) const { return u >= u_h; }

    void validate() const {
        if (u_h < 1 || u_h > kMaxUtility) throw ConfigError("reward system: u_h outside 1..10");
        if (c_max < 1 || h_max < 1) throw ConfigError("reward system: c_max and h_max must be >= 1");
    }

    static RewardSystem r1(int c_max = 4, int h_max = 30) {
        return {"R1", 24, -12, -12, -3, 3, 12, true, 8, c_max, h_max};
    }
    static RewardSystem r2(int c_max = 4, int h_max = 30) {
        return {"R2", 24, -12, -12, 0, 0, 12, true, 8, c_max, h_max};
    }
    static RewardSystem r3(int c_max = 4, int h_max = 30) {
        return {"R3", 50, -50, -50, 50, -50, -25, false, 8, c_max, h_max};
    }
    static RewardSystem named(const std::string& name, int c_max = 4, int h_max = 30) {
        if (name == "R1" || name == "1") return r1(c_max, h_max);
        if (name == "R2" || name == "2") return r2(c_max, h_max);
        if (name == "R3" || name == "3") return r3(c_max, h_max);
        throw ConfigError("unknown reward scenario '" + name + "'");
    }
};

/// Per-component divisors for the neural agent's inputs: b_i/N_i, l_i/(N_i*h_max),
/// f/k, u/u_max, c/c_max, h/h_max. Disabled means raw values.
struct Normalization {
    bool enabled = true;
    std::vector<int> capacities;
    int c_max = 4;
    int h_max = 30;

    static Normalization for_cluster(const ClusterTopology& topo, int c_max, int h_max, bool enabled = true) {
        return {enabled, topo.capacities, c_max, h_max};
    }
    static Normalization raw() { return {false, {}, 1, 1}; }
};

inline StateVector encode_state(const ClusterState& cluster, const TaskRequest& req, const Normalization& norm) {
    const int k = cluster.k();
    StateVector s(state_width(k));
    for (int i = 1; i <= k; ++i) {
        double b = cluster.busy(i);
        double l = cluster.load(i);
        if (norm.enabled) {
            const double n = norm.capacities.at(static_cast<std::size_t>(i - 1));
            b /= n;
            l /= n * norm.h_max;
        }
        s[static_cast<std::size_t>(2 * (i - 1))] = b;
        s[static_cast<std::size_t>(2 * (i - 1) + 1)] = l;
    }
    const auto tail = static_cast<std::size_t>(2 * k);
    s[tail] = req.primary_fn;
    s[tail + 1] = req.u;
    s[tail + 2] = req.c;
    s[tail + 3] = req.h;
    if (norm.enabled) {
        s[tail] /= k;
        s[tail + 1] /= kMaxUtility;
        s[tail + 2] /= norm.c_max;
        s[tail + 3] /= norm.h_max;
    }
    return s;
}

/// Immediate reward: r_(a,u) + r_L when serving, r_(a,u) - r_L when referring to the cloud.
inline double compute_reward(const RewardSystem& rs, const Action& action, const TaskRequest& req, bool forced_busy) {
    if (forced_busy && action.is_serve())
        throw ContractViolation("compute_reward: a forced rejection must use the cloud action");
    const bool high = rs.high_utility(req.u);
    const double r_l = rs.load_term(req);
    if (action.is_serve()) return (high ? rs.r_sh : rs.r_sl) + r_l;
    const double base = forced_busy ? (high ? rs.r_bh : rs.r_bl) : (high ? rs.r_rh : rs.r_rl);
    return base - r_l;
}

struct Transition {
    StateVector state;
    Action action;
    double reward = 0.0;
    StateVector next_state;
    bool terminal = false;
};

struct StepOutcome {
    ClusterState next;
    double reward = 0.0;
    bool forced_busy = false;
    double utilization = 0.0;  // after the decision, before the tick
};

/// Applies `action` to `req`: allocate on serve, nothing on reject, then one tick.
inline StepOutcome step(const ClusterState& cluster, const TaskRequest& req, const Action& action,
                        const RewardSystem& rs, const ClusterTopology& topo) {
    const bool forced_busy = feasible_serve_set(cluster, topo, req).empty();
    StepOutcome out;
    out.forced_busy = forced_busy;
    if (action.is_serve()) {
        if (forced_busy || !is_feasible(cluster, topo, req, action.index()))
            throw ContractViolation("step: serve at FN " + std::to_string(action.index()) + " is not feasible");
        out.next = allocate(cluster, topo, action.index(), req);
    } else {
        out.next = cluster;
    }
    out.reward = compute_reward(rs, action, req, forced_busy);
    out.utilization = utilization_snapshot(out.next, topo);
    out.next.advance();
    return out;
}

}  // namespace fogslice

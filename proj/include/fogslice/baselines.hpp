#pragma once

// Reference policies: serve-all-utilities (SAU), serve-high-utilities (SHU),
// independent per-node tabular Q-learning without an edge controller (QL-NEC),
// and a uniform random policy.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "fogslice/cluster.hpp"
#include "fogslice/dqn_agent.hpp"
#include "fogslice/mdp.hpp"
#include "fogslice/rng.hpp"

namespace fogslice {

/// Which feasible FN the rule-based policies pick.
enum class ServePreference {
    primary_then_neighbors,  // feasible_serve_set order
    most_free_blocks,        // ties resolved by that same order
};

inline Action pick_serving_fn(std::span<const int> feasible, const ClusterState& cluster, const ClusterTopology& topo,
                              ServePreference pref) {
    if (feasible.empty()) return Action::cloud(topo.k);
    int best = feasible.front();
    if (pref == ServePreference::most_free_blocks) {
        int best_free = topo.capacity(best) - cluster.busy(best);
        for (int fn : feasible) {
            const int free = topo.capacity(fn) - cluster.busy(fn);
            if (free > best_free) {
                best = fn;
                best_free = free;
            }
        }
    }
    return Action::serve(best, topo.k);
}

/// Serve every request the cluster can host. `feasible` must come from feasible_serve_set.
inline Action sau_decide(const ClusterState& cluster, const ClusterTopology& topo, std::span<const int> feasible,
                         ServePreference pref = ServePreference::primary_then_neighbors) {
    return pick_serving_fn(feasible, cluster, topo, pref);
}

/// Like SAU for u >= u_h; every other request goes to the cloud.
inline Action shu_decide(const ClusterState& cluster, const ClusterTopology& topo, const TaskRequest& req,
                         std::span<const int> feasible, int u_h,
                         ServePreference pref = ServePreference::primary_then_neighbors) {
    if (req.u < u_h) return Action::cloud(topo.k);
    return pick_serving_fn(feasible, cluster, topo, pref);
}

inline Action random_decide(std::span<const int> feasible, int k, Rng& rng) {
    const auto allowed = allowed_actions(feasible, k);
    return {allowed[uniform_index(rng, allowed.size())], k};
}

/// Two-action Q-table over integer state keys. Action 0 = serve, 1 = reject.
class TabularQ {
public:
    static constexpr int kServe = 0;
    static constexpr int kReject = 1;
    using Key = std::uint64_t;
    using Row = std::array<double, 2>;

    TabularQ(double alpha, double gamma) : alpha_(alpha), gamma_(gamma) {}

    double alpha() const { return alpha_; }
    double gamma() const { return gamma_; }
    std::size_t visited_states() const { return table_.size(); }

    bool contains(Key s) const { return table_.contains(s); }
    double q(Key s, int a) const {
        const auto it = table_.find(s);
        return it == table_.end() ? 0.0 : it->second[static_cast<std::size_t>(a)];
    }

    /// Greedy action; serve only when allowed. Ties prefer serve.
    int greedy(Key s, bool serve_allowed) const {
        if (!serve_allowed) return kReject;
        return q(s, kServe) >= q(s, kReject) ? kServe : kReject;
    }

    double max_q(Key s, bool serve_allowed) const {
        return serve_allowed ? std::max(q(s, kServe), q(s, kReject)) : q(s, kReject);
    }

    /// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)).
    void update(Key s, int a, double r, Key next, bool next_serve_allowed) {
        const double target = r + gamma_ * max_q(next, next_serve_allowed);
        double& cell = table_[s][static_cast<std::size_t>(a)];
        cell += alpha_ * (target - cell);
    }

    /// Terminal update: Q(s,a) += alpha * (r - Q(s,a)).
    void update_terminal(Key s, int a, double r) {
        double& cell = table_[s][static_cast<std::size_t>(a)];
        cell += alpha_ * (r - cell);
    }

private:
    double alpha_;
    double gamma_;
    std::unordered_map<Key, Row> table_;
};

/// Local state of one FN: (blocks in use, u, c, h).
inline TabularQ::Key local_state_key(int busy, const TaskRequest& req) {
    return (static_cast<std::uint64_t>(busy) << 48) | (static_cast<std::uint64_t>(req.u) << 32) |
           (static_cast<std::uint64_t>(req.c) << 16) | static_cast<std::uint64_t>(req.h);
}

/// One FN acting alone: serve at itself or refer to the cloud. Only ever reads
/// its own FN's occupancy. The Q-update for a decision is applied when the node
/// receives its next request, which supplies the successor state.
class QlNecNode {
public:
    QlNecNode(int fn, double alpha, double gamma) : fn_(fn), q_(alpha, gamma) {}

    struct Decision {
        Action action;
        double reward = 0.0;
        bool forced_busy = false;
    };

    int fn() const { return fn_; }
    const TabularQ& table() const { return q_; }

    Decision decide_and_learn(int own_busy, int own_capacity, int k, const TaskRequest& req, const RewardSystem& rs,
                              double epsilon, Rng& rng) {
        if (req.primary_fn != fn_) throw ContractViolation("QL-NEC node received another FN's request");
        const auto s = local_state_key(own_busy, req);
        const bool serve_ok = own_capacity - own_busy >= req.c;
        if (pending_) q_.update(pending_->state, pending_->action, pending_->reward, s, serve_ok);

        int a = TabularQ::kReject;
        if (serve_ok) {
            if (epsilon > 0.0 && uniform01(rng) < epsilon)
                a = static_cast<int>(uniform_index(rng, 2));
            else
                a = q_.greedy(s, true);
        }
        Decision d;
        d.forced_busy = !serve_ok;
        d.action = a == TabularQ::kServe ? Action::serve(fn_, k) : Action::cloud(k);
        d.reward = compute_reward(rs, d.action, req, d.forced_busy);
        pending_ = Pending{s, a, d.reward};
        return d;
    }

    /// Close the last open decision as terminal.
    void finish() {
        if (pending_) q_.update_terminal(pending_->state, pending_->action, pending_->reward);
        pending_.reset();
    }

private:
    struct Pending {
        TabularQ::Key state;
        int action;
        double reward;
    };
    int fn_;
    TabularQ q_;
    std::optional<Pending> pending_;
};

/// QL-NEC for a whole cluster: one independent node per FN, no neighbor handover.
class QlNecCluster {
public:
    QlNecCluster(int k, double alpha, double gamma) {
        for (int i = 1; i <= k; ++i) nodes_.emplace_back(i, alpha, gamma);
    }

    QlNecNode& node(int fn) { return nodes_[static_cast<std::size_t>(fn - 1)]; }
    const QlNecNode& node(int fn) const { return nodes_[static_cast<std::size_t>(fn - 1)]; }

    QlNecNode::Decision decide_and_learn(const ClusterState& cluster, const ClusterTopology& topo,
                                         const TaskRequest& req, const RewardSystem& rs, double epsilon, Rng& rng) {
        const int fn = req.primary_fn;
        return node(fn).decide_and_learn(cluster.busy(fn), topo.capacity(fn), topo.k, req, rs, epsilon, rng);
    }

    void finish() {
        for (auto& n : nodes_) n.finish();
    }

private:
    std::vector<QlNecNode> nodes_;
};

}  // namespace fogslice

#pragma once

// Edge-cluster state machine: per-FN allocations with remaining holding times,
// neighbor topology, allocation, release and feasibility queries.
//
// FN indices are 1-based throughout the public API.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fogslice/environment.hpp"
#include "fogslice/error.hpp"

namespace fogslice {

struct ClusterTopology {
    int k = 0;
    std::vector<int> capacities;               // N_i, size k
    std::vector<std::vector<int>> neighbors;   // N_i lists, 1-based, size k
    int ec_index = 1;

    int capacity(int fn) const { return capacities[static_cast<std::size_t>(fn - 1)]; }
    const std::vector<int>& neighbors_of(int fn) const { return neighbors[static_cast<std::size_t>(fn - 1)]; }

    int total_capacity() const {
        int s = 0;
        for (int n : capacities) s += n;
        return s;
    }
    int min_capacity() const { return *std::min_element(capacities.begin(), capacities.end()); }

    void validate() const {
        if (k < 1) throw ConfigError("topology: k must be >= 1");
        if (static_cast<int>(capacities.size()) != k || static_cast<int>(neighbors.size()) != k)
            throw ConfigError("topology: capacities and neighbor lists must have k entries");
        for (int n : capacities)
            if (n < 1) throw ConfigError("topology: every capacity must be >= 1");
        if (ec_index < 1 || ec_index > k) throw ConfigError("topology: ec_index out of range");
        for (int i = 1; i <= k; ++i)
            for (int j : neighbors_of(i))
                if (j < 1 || j > k || j == i)
                    throw ConfigError("topology: FN " + std::to_string(i) + " has invalid neighbor " +
                                      std::to_string(j));
    }

    /// k FNs, uniform capacity, every FN neighbor of every other.
    static ClusterTopology fully_connected(int k, int capacity) {
        ClusterTopology t;
        t.k = k;
        t.capacities.assign(static_cast<std::size_t>(k), capacity);
        t.neighbors.resize(static_cast<std::size_t>(k));
        for (int i = 1; i <= k; ++i)
            for (int j = 1; j <= k; ++j)
                if (i != j) t.neighbors[static_cast<std::size_t>(i - 1)].push_back(j);
        t.ec_index = 1;
        return t;
    }

    /// Seven hexagonal cells: FN 5 in the center (the EC), FNs 1,2,3,4,6,7 around it
    /// in cyclic order. Each FN's neighbors are the cells it touches.
    static ClusterTopology hexagonal7(int capacity = 7) {
        ClusterTopology t;
        t.k = 7;
        t.capacities.assign(7, capacity);
        t.ec_index = 5;
        const std::vector<int> ring{1, 2, 3, 4, 6, 7};
        t.neighbors.resize(7);
        for (int fn : ring) t.neighbors[4].push_back(fn);
        for (std::size_t i = 0; i < ring.size(); ++i) {
            const int prev = ring[(i + ring.size() - 1) % ring.size()];
            const int next = ring[(i + 1) % ring.size()];
            auto& n = t.neighbors[static_cast<std::size_t>(ring[i] - 1)];
            n = {prev, next, 5};
            std::sort(n.begin(), n.end());
        }
        return t;
    }
};

struct Allocation {
    int blocks = 1;
    int remaining = 1;  // time steps until release
    friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// Active allocations of every FN. b_i and l_i are derived on demand.
class ClusterState {
public:
    ClusterState() = default;
    explicit ClusterState(int k) : fns_(static_cast<std::size_t>(k)) {}

    int k() const { return static_cast<int>(fns_.size()); }

    const std::vector<Allocation>& allocations(int fn) const { return fns_[static_cast<std::size_t>(fn - 1)]; }

    /// Blocks in use at FN `fn`.
    int busy(int fn) const {
        int b = 0;
        for (const auto& a : allocations(fn)) b += a.blocks;
        return b;
    }

    /// Remaining block-time at FN `fn`: sum of blocks x remaining steps.
    int load(int fn) const {
        int l = 0;
        for (const auto& a : allocations(fn)) l += a.blocks * a.remaining;
        return l;
    }

    int total_busy() const {
        int s = 0;
        for (int i = 1; i <= k(); ++i) s += busy(i);
        return s;
    }

    bool empty() const {
        return std::all_of(fns_.begin(), fns_.end(), [](const auto& v) { return v.empty(); });
    }

    void push(int fn, Allocation a) { fns_[static_cast<std::size_t>(fn - 1)].push_back(a); }

    /// One time step: decrement every remaining time and drop finished allocations.
    void advance() {
        for (auto& fn : fns_) {
            for (auto& a : fn) --a.remaining;
            std::erase_if(fn, [](const Allocation& a) { return a.remaining <= 0; });
        }
    }

    /// Order-independent equality (allocation order within an FN is irrelevant).
    friend bool operator==(const ClusterState& a, const ClusterState& b) {
        if (a.k() != b.k()) return false;
        auto key = [](std::vector<Allocation> v) {
            std::sort(v.begin(), v.end(), [](const Allocation& x, const Allocation& y) {
                return std::pair{x.blocks, x.remaining} < std::pair{y.blocks, y.remaining};
            });
            return v;
        };
        for (std::size_t i = 0; i < a.fns_.size(); ++i)
            if (key(a.fns_[i]) != key(b.fns_[i])) return false;
        return true;
    }

private:
    std::vector<std::vector<Allocation>> fns_;
};

inline bool fits(const ClusterState& state, const ClusterTopology& topo, int fn, int blocks) {
    return topo.capacity(fn) - state.busy(fn) >= blocks;
}

/// Serve candidates for `req`: the primary FN and its neighbors that have at least
/// req.c free blocks, primary first, then neighbors in list order.
inline std::vector<int> feasible_serve_set(const ClusterState& state, const ClusterTopology& topo,
                                           const TaskRequest& req) {
    std::vector<int> out;
    if (fits(state, topo, req.primary_fn, req.c)) out.push_back(req.primary_fn);
    for (int n : topo.neighbors_of(req.primary_fn))
        if (fits(state, topo, n, req.c)) out.push_back(n);
    return out;
}

inline bool is_feasible(const ClusterState& state, const ClusterTopology& topo, const TaskRequest& req, int fn) {
    if (fn != req.primary_fn) {
        const auto& n = topo.neighbors_of(req.primary_fn);
        if (std::find(n.begin(), n.end(), fn) == n.end()) return false;
    }
    return fits(state, topo, fn, req.c);
}

inline ClusterState allocate(ClusterState state, const ClusterTopology& topo, int fn, const TaskRequest& req) {
    if (fn < 1 || fn > topo.k || !is_feasible(state, topo, req, fn))
        throw ContractViolation("allocate: FN " + std::to_string(fn) + " cannot serve request of " +
                                std::to_string(req.c) + " blocks from FN " + std::to_string(req.primary_fn));
    state.push(fn, Allocation{req.c, req.h});
    return state;
}

inline ClusterState tick(ClusterState state) {
    state.advance();
    return state;
}

/// Fraction of all cluster blocks in use right now.
inline double utilization_snapshot(const ClusterState& state, const ClusterTopology& topo) {
    return static_cast<double>(state.total_busy()) / static_cast<double>(topo.total_capacity());
}

}  // namespace fogslice

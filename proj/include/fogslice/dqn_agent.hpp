#pragma once

// Edge-controller DQN agent: bounded replay memory, feasibility-masked
// epsilon-greedy selection, target computation against a lagged target
// network, periodic soft target updates, and frozen policy export.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fogslice/cluster.hpp"
#include "fogslice/error.hpp"
#include "fogslice/mdp.hpp"
#include "fogslice/neural.hpp"
#include "fogslice/rng.hpp"

namespace fogslice {

struct AgentConfig {
    double gamma = 0.9;
    double epsilon_start = 1.0;
    double epsilon_hold_fraction = 0.1;  // of the training horizon
    double epsilon_decay = 0.9995;       // per step after the hold
    double epsilon_min = 1e-3;
    int batch_size = 32;
    int target_interval = 1000;  // tau
    double target_rate = 0.2;    // rho
    int replay_capacity = 2000;  // D
    double learning_rate = 0.01;
    double learning_rate_decay = 1e-4;
    double momentum = 0.9;
    std::vector<int> hidden{64, 24};
    bool normalize_inputs = true;
    // Freeze learning once the windowed mean reward settles (checked only at the epsilon floor).
    bool stop_on_convergence = true;
    int convergence_window = 10000;
    double convergence_tolerance = 0.01;

    void validate() const {
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent: gamma must lie in [0, 1]");
        if (!(target_rate > 0.0 && target_rate <= 1.0)) throw ConfigError("agent: rho must lie in (0, 1]");
        if (replay_capacity < 1 || batch_size < 1 || batch_size > replay_capacity)
            throw ConfigError("agent: need 1 <= batch size <= replay capacity");
        if (target_interval < 1) throw ConfigError("agent: target update interval must be >= 1");
        if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_min >= 0.0 && epsilon_min <= 1.0))
            throw ConfigError("agent: epsilon values must lie in [0, 1]");
        if (!(learning_rate > 0.0)) throw ConfigError("agent: learning rate must be positive");
    }
};

/// Epsilon held at its start value for a fraction of the horizon, then decayed
/// multiplicatively per step down to a floor. `boost` raises it mid-run.
class EpsilonSchedule {
public:
    EpsilonSchedule() = default;
    EpsilonSchedule(const AgentConfig& cfg, std::int64_t horizon)
        : value_(cfg.epsilon_start),
          decay_(cfg.epsilon_decay),
          floor_(cfg.epsilon_min),
          hold_steps_(static_cast<std::int64_t>(std::llround(cfg.epsilon_hold_fraction * static_cast<double>(horizon)))) {}

    double value() const { return value_; }
    bool at_floor() const { return value_ <= floor_; }

    /// Call once per time step after acting.
    void advance() {
        if (++steps_ >= hold_steps_) value_ = std::max(floor_, value_ * decay_);
    }

    void boost(double to) { value_ = std::max(value_, to); }

private:
    double value_ = 1.0;
    double decay_ = 0.9995;
    double floor_ = 1e-3;
    std::int64_t hold_steps_ = 0;
    std::int64_t steps_ = 0;
};

/// Bounded FIFO of transitions; the oldest entry is evicted first.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ContractViolation("replay memory capacity must be >= 1");
        items_.reserve(capacity);
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }

    void push(Transition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    /// i-th stored transition in insertion order (0 = oldest).
    const Transition& at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

    /// n distinct transitions chosen uniformly (partial Fisher-Yates).
    std::vector<const Transition*> sample(std::size_t n, Rng& rng) const {
        if (n > items_.size()) throw ContractViolation("replay sample larger than memory");
        std::vector<std::size_t> idx(items_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::vector<const Transition*> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + uniform_index(rng, idx.size() - i);
            std::swap(idx[i], idx[j]);
            out.push_back(&items_[idx[i]]);
        }
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> items_;
};

/// Allowed actions for a request: feasible serve FNs plus the cloud, ascending.
inline std::vector<int> allowed_actions(std::span<const int> feasible, int k) {
    std::vector<int> a(feasible.begin(), feasible.end());
    std::sort(a.begin(), a.end());
    a.push_back(k + 1);
    return a;
}

/// Greedy action over the feasible serve FNs and the cloud; ties go to the lowest index.
inline Action masked_argmax(std::span<const double> q, std::span<const int> feasible, int k) {
    if (feasible.empty()) return Action::cloud(k);
    int best = 0;
    double best_q = 0.0;
    for (int a : allowed_actions(feasible, k)) {
        const double v = q[static_cast<std::size_t>(a - 1)];
        if (best == 0 || v > best_q) {
            best = a;
            best_q = v;
        }
    }
    return {best, k};
}

/// Epsilon-greedy over the allowed actions. Exploration never picks an infeasible serve.
inline Action select_action(const Network& net, const StateVector& state, std::span<const int> feasible, int k,
                            double epsilon, Rng& rng) {
    if (feasible.empty()) return Action::cloud(k);
    if (epsilon > 0.0 && uniform01(rng) < epsilon) {
        const auto allowed = allowed_actions(feasible, k);
        return {allowed[uniform_index(rng, allowed.size())], k};
    }
    return masked_argmax(net.forward(state), feasible, k);
}

/// Frozen greedy policy. Immutable once built; safe to share across threads.
class PolicySnapshot {
public:
    PolicySnapshot(Network weights, Normalization norm, ClusterTopology topo, std::uint64_t config_digest = 0)
        : weights_(std::move(weights)), norm_(std::move(norm)), topo_(std::move(topo)), digest_(config_digest) {}

    const Network& weights() const { return weights_; }
    const Normalization& normalization() const { return norm_; }
    const ClusterTopology& topology() const { return topo_; }
    std::uint64_t config_digest() const { return digest_; }

    std::vector<double> q_values(const StateVector& s) const { return weights_.forward(s); }

    Action act(const ClusterState& cluster, const TaskRequest& req) const {
        const auto feasible = feasible_serve_set(cluster, topo_, req);
        return masked_argmax(q_values(encode_state(cluster, req, norm_)), feasible, topo_.k);
    }

    static constexpr char kMagic[8] = {'F', 'S', 'L', 'P', 'O', 'L', 'C', 'Y'};
    static constexpr std::uint32_t kVersion = 1;

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw ConfigError("cannot write policy file " + path);
        os.write(kMagic, sizeof kMagic);
        detail::write_pod(os, kVersion);
        detail::write_pod(os, digest_);
        detail::write_pod(os, static_cast<std::uint8_t>(norm_.enabled));
        detail::write_pod(os, static_cast<std::int32_t>(norm_.c_max));
        detail::write_pod(os, static_cast<std::int32_t>(norm_.h_max));
        detail::write_pod(os, static_cast<std::int32_t>(topo_.k));
        detail::write_pod(os, static_cast<std::int32_t>(topo_.ec_index));
        for (int i = 1; i <= topo_.k; ++i) {
            detail::write_pod(os, static_cast<std::int32_t>(topo_.capacity(i)));
            detail::write_pod(os, static_cast<std::uint32_t>(topo_.neighbors_of(i).size()));
            for (int n : topo_.neighbors_of(i)) detail::write_pod(os, static_cast<std::int32_t>(n));
        }
        write_network(os, weights_);
        if (!os) throw ConfigError("failed writing policy file " + path);
    }

    static PolicySnapshot load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw ConfigError("cannot open policy file " + path);
        char magic[8];
        is.read(magic, sizeof magic);
        if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ConfigError(path + " is not a policy file");
        if (detail::read_pod<std::uint32_t>(is) != kVersion) throw ConfigError(path + ": unsupported policy version");
        const auto digest = detail::read_pod<std::uint64_t>(is);
        const bool enabled = detail::read_pod<std::uint8_t>(is) != 0;
        const int c_max = detail::read_pod<std::int32_t>(is);
        const int h_max = detail::read_pod<std::int32_t>(is);
        ClusterTopology topo;
        topo.k = detail::read_pod<std::int32_t>(is);
        if (topo.k < 1 || topo.k > 4096) throw ConfigError(path + ": corrupt topology");
        topo.ec_index = detail::read_pod<std::int32_t>(is);
        for (int i = 0; i < topo.k; ++i) {
            topo.capacities.push_back(detail::read_pod<std::int32_t>(is));
            const auto n = detail::read_pod<std::uint32_t>(is);
            if (n > static_cast<std::uint32_t>(topo.k)) throw ConfigError(path + ": corrupt neighbor list");
            std::vector<int> nb;
            for (std::uint32_t j = 0; j < n; ++j) nb.push_back(detail::read_pod<std::int32_t>(is));
            topo.neighbors.push_back(std::move(nb));
        }
        topo.validate();
        auto net = read_network(is);
        Normalization norm{enabled, topo.capacities, c_max, h_max};
        return {std::move(net), std::move(norm), std::move(topo), digest};
    }

private:
    const Network weights_;
    const Normalization norm_;
    const ClusterTopology topo_;
    const std::uint64_t digest_;
};

/// Mean reward over disjoint windows; reports convergence when two consecutive
/// window means differ by less than a relative tolerance.
class RewardConvergence {
public:
    RewardConvergence(int window, double tolerance) : window_(window), tolerance_(tolerance) {}

    /// Returns true when the just-closed window settles the criterion.
    bool push(double reward) {
        sum_ += reward;
        if (++count_ < window_) return false;
        const double mean = sum_ / window_;
        sum_ = 0.0;
        count_ = 0;
        const bool settled = has_prev_ && std::abs(mean - prev_) <= tolerance_ * std::abs(prev_);
        prev_ = mean;
        has_prev_ = true;
        return settled;
    }

    void reset() {
        sum_ = 0.0;
        count_ = 0;
        has_prev_ = false;
    }

private:
    int window_;
    double tolerance_;
    double sum_ = 0.0;
    int count_ = 0;
    double prev_ = 0.0;
    bool has_prev_ = false;
};

class DqnAgent {
public:
    DqnAgent(const ClusterTopology& topo, int c_max, int h_max, AgentConfig cfg, std::uint64_t seed)
        : topo_(topo),
          cfg_((cfg.validate(), std::move(cfg))),
          norm_(Normalization::for_cluster(topo, c_max, h_max, cfg_.normalize_inputs)),
          init_rng_(make_rng(seed, "agent.init")),
          explore_rng_(make_rng(seed, "agent.explore")),
          replay_rng_(make_rng(seed, "agent.replay")),
          online_(Network::initialized(LayerSpec::for_cluster(topo.k, cfg_.hidden), init_rng_)),
          target_(online_),
          opt_(OptimizerState::for_network(online_, cfg_.learning_rate, cfg_.learning_rate_decay, cfg_.momentum)),
          memory_(static_cast<std::size_t>(cfg_.replay_capacity)) {}

    const AgentConfig& config() const { return cfg_; }
    const Normalization& normalization() const { return norm_; }
    const ClusterTopology& topology() const { return topo_; }
    const Network& online() const { return online_; }
    const Network& target() const { return target_; }
    Network& online_mut() { return online_; }
    const ReplayMemory& memory() const { return memory_; }
    std::int64_t gradient_steps() const { return opt_.updates; }

    StateVector encode(const ClusterState& cluster, const TaskRequest& req) const {
        return encode_state(cluster, req, norm_);
    }

    Action select_action(const StateVector& state, std::span<const int> feasible, double epsilon) {
        return fogslice::select_action(online_, state, feasible, topo_.k, epsilon, explore_rng_);
    }

    /// Regression targets for a minibatch: the target network's prediction for s_j
    /// with the taken action's entry replaced by r_j (+ gamma * max_a' Q_target(s'_j, a')).
    Batch compute_targets(std::span<const Transition* const> batch) const {
        const std::size_t in = online_.spec().input_width();
        const std::size_t out = online_.spec().output_width();
        Batch b;
        b.rows = batch.size();
        b.inputs.resize(b.rows * in);
        std::vector<double> next(b.rows * in);
        for (std::size_t j = 0; j < b.rows; ++j) {
            std::copy(batch[j]->state.begin(), batch[j]->state.end(), b.inputs.begin() + static_cast<std::ptrdiff_t>(j * in));
            std::copy(batch[j]->next_state.begin(), batch[j]->next_state.end(), next.begin() + static_cast<std::ptrdiff_t>(j * in));
        }
        b.targets = std::move(target_.forward_batch(b.inputs, b.rows).back());
        const auto next_q = target_.forward_batch(next, b.rows).back();
        for (std::size_t j = 0; j < b.rows; ++j) {
            const Transition& tr = *batch[j];
            double y = tr.reward;
            if (!tr.terminal) {
                const auto first = next_q.begin() + static_cast<std::ptrdiff_t>(j * out);
                y += cfg_.gamma * *std::max_element(first, first + static_cast<std::ptrdiff_t>(out));
            }
            b.targets[j * out + tr.action.slot()] = y;
        }
        return b;
    }

    /// Stores the transition, trains on one minibatch once the memory holds a full
    /// batch, and blends the target network every tau steps. Returns the loss if trained.
    std::optional<double> learn_step(Transition tr, std::int64_t t) {
        memory_.push(std::move(tr));
        std::optional<double> loss;
        if (memory_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
            const auto sample = memory_.sample(static_cast<std::size_t>(cfg_.batch_size), replay_rng_);
            const Batch b = compute_targets(sample);
            loss = train_step(online_, opt_, b);
        }
        if (t % cfg_.target_interval == 0) soft_update(target_, online_, cfg_.target_rate);
        return loss;
    }

    PolicySnapshot export_policy(std::uint64_t config_digest = 0) const {
        return {online_, norm_, topo_, config_digest};
    }

    /// Replace the online and target weights (policy-bank restore).
    void load_weights(const Network& w) {
        if (!(w.spec() == online_.spec())) throw ContractViolation("load_weights: shape mismatch");
        online_ = w;
        target_ = w;
    }

private:
    ClusterTopology topo_;
    AgentConfig cfg_;
    Normalization norm_;
    Rng init_rng_;
    Rng explore_rng_;
    Rng replay_rng_;
    Network online_;
    Network target_;
    OptimizerState opt_;
    ReplayMemory memory_;
};

}  // namespace fogslice

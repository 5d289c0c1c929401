#pragma once

// Small fully connected network for Q-value regression: ReLU hidden layers,
// linear output, Huber loss (delta = 1), RMSprop with momentum and
// inverse-time learning-rate decay. Everything is double precision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fogslice/error.hpp"
#include "fogslice/rng.hpp"

namespace fogslice {

/// Layer widths from input to output, e.g. {18, 64, 24, 8}.
struct LayerSpec {
    std::vector<int> widths;

    std::size_t input_width() const { return static_cast<std::size_t>(widths.front()); }
    std::size_t output_width() const { return static_cast<std::size_t>(widths.back()); }
    std::size_t num_layers() const { return widths.size() - 1; }

    void validate() const {
        if (widths.size() < 3) throw ConfigError("network needs an input, at least one hidden and an output layer");
        for (int w : widths)
            if (w < 1) throw ConfigError("network layer widths must be >= 1");
    }

    static LayerSpec for_cluster(int k, std::vector<int> hidden = {64, 24}) {
        LayerSpec s;
        s.widths.push_back(2 * k + 4);
        s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
        s.widths.push_back(k + 1);
        return s;
    }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// All weights and biases in one flat buffer. Layer l stores its weight matrix
/// input-major (in x out), followed by its bias vector.
class Network {
public:
    Network() = default;

    /// Zero-initialized network.
    explicit Network(LayerSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        std::size_t off = 0;
        for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
            w_off_.push_back(off);
            off += fan_in(l) * fan_out(l);
            b_off_.push_back(off);
            off += fan_out(l);
        }
        params_.assign(off, 0.0);
    }

    /// He-uniform weights on ReLU layers, Glorot-uniform on the linear output, zero biases.
    static Network initialized(LayerSpec spec, Rng& rng) {
        Network n(std::move(spec));
        for (std::size_t l = 0; l < n.spec_.num_layers(); ++l) {
            const double in = static_cast<double>(n.fan_in(l));
            const double out = static_cast<double>(n.fan_out(l));
            const bool last = l + 1 == n.spec_.num_layers();
            const double limit = last ? std::sqrt(6.0 / (in + out)) : std::sqrt(6.0 / in);
            auto w = n.weights(l);
            for (double& x : w) x = (2.0 * uniform01(rng) - 1.0) * limit;
        }
        return n;
    }

    const LayerSpec& spec() const { return spec_; }
    std::size_t fan_in(std::size_t l) const { return static_cast<std::size_t>(spec_.widths[l]); }
    std::size_t fan_out(std::size_t l) const { return static_cast<std::size_t>(spec_.widths[l + 1]); }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    std::span<double> weights(std::size_t l) { return {params_.data() + w_off_[l], fan_in(l) * fan_out(l)}; }
    std::span<const double> weights(std::size_t l) const { return {params_.data() + w_off_[l], fan_in(l) * fan_out(l)}; }
    std::span<double> biases(std::size_t l) { return {params_.data() + b_off_[l], fan_out(l)}; }
    std::span<const double> biases(std::size_t l) const { return {params_.data() + b_off_[l], fan_out(l)}; }

    /// Q-values for one input.
    std::vector<double> forward(std::span<const double> x) const {
        if (x.size() != spec_.input_width())
            throw ContractViolation("forward: input width " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(spec_.input_width()));
        std::vector<double> cur(x.begin(), x.end()), next;
        for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
            layer_forward(l, cur, next, 1);
            cur.swap(next);
        }
        return cur;
    }

    /// Forward pass over `rows` inputs stored row-major. Returns every layer's
    /// activations (index 0 is the input itself).
    std::vector<std::vector<double>> forward_batch(std::span<const double> inputs, std::size_t rows) const {
        if (inputs.size() != rows * spec_.input_width()) throw ContractViolation("forward_batch: shape mismatch");
        std::vector<std::vector<double>> acts(spec_.num_layers() + 1);
        acts[0].assign(inputs.begin(), inputs.end());
        for (std::size_t l = 0; l < spec_.num_layers(); ++l) layer_forward(l, acts[l], acts[l + 1], rows);
        return acts;
    }

    friend bool operator==(const Network&, const Network&) = default;

private:
    void layer_forward(std::size_t l, const std::vector<double>& in, std::vector<double>& out, std::size_t rows) const {
        const std::size_t ni = fan_in(l), no = fan_out(l);
        const double* w = params_.data() + w_off_[l];
        const double* b = params_.data() + b_off_[l];
        const bool relu = l + 1 < spec_.num_layers();
        out.resize(rows * no);
        for (std::size_t r = 0; r < rows; ++r) {
            double* y = out.data() + r * no;
            const double* x = in.data() + r * ni;
            std::copy(b, b + no, y);
            for (std::size_t i = 0; i < ni; ++i) {
                const double xi = x[i];
                if (xi == 0.0) continue;
                const double* wi = w + i * no;
                for (std::size_t o = 0; o < no; ++o) y[o] += wi[o] * xi;
            }
            if (relu)
                for (std::size_t o = 0; o < no; ++o) y[o] = std::max(y[o], 0.0);
        }
    }

    LayerSpec spec_;
    std::vector<std::size_t> w_off_, b_off_;
    std::vector<double> params_;
};

/// Row-major inputs and regression targets.
struct Batch {
    std::size_t rows = 0;
    std::vector<double> inputs;
    std::vector<double> targets;
};

inline double huber(double err, double delta = 1.0) {
    const double a = std::abs(err);
    return a <= delta ? 0.5 * err * err : delta * (a - 0.5 * delta);
}

inline double huber_grad(double err, double delta = 1.0) { return std::clamp(err, -delta, delta); }

/// Mean Huber loss over all batch elements and its gradient with respect to every parameter.
inline double loss_and_gradient(const Network& net, const Batch& batch, std::vector<double>& grad) {
    const auto& spec = net.spec();
    if (batch.rows == 0) throw ContractViolation("train: empty batch");
    if (batch.targets.size() != batch.rows * spec.output_width())
        throw ContractViolation("train: target shape mismatch");
    const auto acts = net.forward_batch(batch.inputs, batch.rows);
    const std::size_t L = spec.num_layers();
    const std::size_t no = spec.output_width();
    const double scale = 1.0 / static_cast<double>(batch.rows * no);

    double loss = 0.0;
    std::vector<double> delta(batch.rows * no);
    for (std::size_t j = 0; j < delta.size(); ++j) {
        const double err = acts[L][j] - batch.targets[j];
        loss += huber(err);
        delta[j] = huber_grad(err) * scale;
    }
    loss *= scale;

    grad.assign(net.params().size(), 0.0);
    const double* base = net.params().data();
    std::vector<double> prev;
    for (std::size_t l = L; l-- > 0;) {
        const std::size_t ni = net.fan_in(l), nout = net.fan_out(l);
        const auto w = net.weights(l);
        double* gw = grad.data() + (w.data() - base);
        double* gb = grad.data() + (net.biases(l).data() - base);
        const auto& x = acts[l];
        if (l > 0) prev.assign(batch.rows * ni, 0.0);
        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* d = delta.data() + r * nout;
            const double* xr = x.data() + r * ni;
            for (std::size_t o = 0; o < nout; ++o) gb[o] += d[o];
            for (std::size_t i = 0; i < ni; ++i) {
                const double xi = xr[i];
                double* gwi = gw + i * nout;
                const double* wi = w.data() + i * nout;
                if (xi != 0.0)
                    for (std::size_t o = 0; o < nout; ++o) gwi[o] += xi * d[o];
                if (l > 0 && xi > 0.0) {  // ReLU derivative of the layer below
                    double s = 0.0;
                    for (std::size_t o = 0; o < nout; ++o) s += wi[o] * d[o];
                    prev[r * ni + i] = s;
                }
            }
        }
        if (l > 0) delta.swap(prev);
    }
    return loss;
}

/// RMSprop with momentum: ms <- rho*ms + (1-rho)*g^2; mom <- momentum*mom + lr_t*g/(sqrt(ms)+eps);
/// w <- w - mom, with lr_t = lr / (1 + decay * updates).
struct OptimizerState {
    double learning_rate = 0.01;
    double decay = 1e-4;
    double momentum = 0.9;
    double rho = 0.9;
    double epsilon = 1e-7;
    std::int64_t updates = 0;
    std::vector<double> mean_square;
    std::vector<double> velocity;

    static OptimizerState for_network(const Network& net, double lr = 0.01, double decay = 1e-4, double momentum = 0.9) {
        OptimizerState s;
        s.learning_rate = lr;
        s.decay = decay;
        s.momentum = momentum;
        s.mean_square.assign(net.params().size(), 0.0);
        s.velocity.assign(net.params().size(), 0.0);
        return s;
    }

    double current_learning_rate() const { return learning_rate / (1.0 + decay * static_cast<double>(updates)); }
};

/// One optimizer step on `batch`. Returns the loss before the update.
inline double train_step(Network& net, OptimizerState& opt, const Batch& batch) {
    if (!(opt.learning_rate > 0.0)) throw ContractViolation("train_step: learning rate must be positive");
    auto params = net.params();
    if (opt.mean_square.size() != params.size() || opt.velocity.size() != params.size())
        throw ContractViolation("train_step: optimizer state does not match the network");
    std::vector<double> grad;
    const double loss = loss_and_gradient(net, batch, grad);
    if (!std::isfinite(loss)) throw TrainingFault("non-finite training loss");
    const double lr = opt.current_learning_rate();
    for (std::size_t p = 0; p < params.size(); ++p) {
        const double g = grad[p];
        opt.mean_square[p] = opt.rho * opt.mean_square[p] + (1.0 - opt.rho) * g * g;
        opt.velocity[p] = opt.momentum * opt.velocity[p] + lr * g / (std::sqrt(opt.mean_square[p]) + opt.epsilon);
        params[p] -= opt.velocity[p];
    }
    ++opt.updates;
    return loss;
}

/// target <- rho*online + (1-rho)*target, elementwise.
inline void soft_update(Network& target, const Network& online, double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) throw ContractViolation("soft_update: rho must lie in (0, 1]");
    if (!(target.spec() == online.spec())) throw ContractViolation("soft_update: shape mismatch");
    auto t = target.params();
    const auto o = online.params();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rho * o[i] + (1.0 - rho) * t[i];
}

namespace detail {

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ConfigError("truncated binary stream");
    return v;
}

}  // namespace detail

inline void write_network(std::ostream& os, const Network& net) {
    const auto& w = net.spec().widths;
    detail::write_pod(os, static_cast<std::uint32_t>(w.size()));
    for (int x : w) detail::write_pod(os, static_cast<std::int32_t>(x));
    for (double p : net.params()) detail::write_pod(os, p);
}

inline Network read_network(std::istream& is) {
    const auto n = detail::read_pod<std::uint32_t>(is);
    if (n < 3 || n > 64) throw ConfigError("corrupt network header");
    LayerSpec spec;
    for (std::uint32_t i = 0; i < n; ++i) spec.widths.push_back(detail::read_pod<std::int32_t>(is));
    Network net(spec);
    for (double& p : net.params()) p = detail::read_pod<double>(is);
    return net;
}

}  // namespace fogslice

#pragma once
// Dense feed-forward net for Q-value regression: ReLU hidden layers, identity
// output, manual backpropagation, and an Adam/SGD optimizer. The output is
// always 7 wide (one Q-value per politics category). Double precision
// throughout so the finite-difference check is clean.
//
// Forward passes on a frozen copy are safe from any thread; updates are
// single-writer.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "beliefsim/rng.hpp"

namespace beliefsim {

inline constexpr int kQOutputs = 7;

enum class InitScheme { Xavier, Zero };

struct Gradients {
    std::vector<std::vector<double>> weights;  // [layer][out*in], row-major
    std::vector<std::vector<double>> biases;   // [layer][out]

    void add(const Gradients& other) {
        for (size_t l = 0; l < weights.size(); ++l) {
            for (size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += other.weights[l][i];
            for (size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
        }
    }
    void scale(double s) {
        for (auto& w : weights)
            for (double& v : w) v *= s;
        for (auto& b : biases)
            for (double& v : b) v *= s;
    }
};

class Mlp {
public:
    Mlp() = default;

    /// Layers sized `sizes` (>= 2 entries, last must be 7). Weights are
    /// Uniform[-s, s] with s = sqrt(6 / (fan_in + fan_out)); biases zero.
    static Mlp init(const std::vector<int>& sizes, RngStream& rng,
                    InitScheme scheme = InitScheme::Xavier) {
        if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least 2 layers");
        for (int s : sizes)
            if (s < 1) throw std::invalid_argument("Mlp: layer sizes must be >= 1");
        if (sizes.back() != kQOutputs)
            throw std::invalid_argument("Mlp: output layer must be " + std::to_string(kQOutputs));
        Mlp net;
        net.sizes_ = sizes;
        const size_t layers = sizes.size() - 1;
        net.weights_.resize(layers);
        net.biases_.resize(layers);
        for (size_t l = 0; l < layers; ++l) {
            const int fan_in = sizes[l], fan_out = sizes[l + 1];
            net.weights_[l].assign(static_cast<size_t>(fan_in) * fan_out, 0.0);
            net.biases_[l].assign(static_cast<size_t>(fan_out), 0.0);
            if (scheme == InitScheme::Xavier) {
                const double s = std::sqrt(6.0 / (fan_in + fan_out));
                for (double& w : net.weights_[l]) w = rng.uniform(-s, s);
            }
        }
        return net;
    }

    const std::vector<int>& sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    size_t layer_count() const { return weights_.size(); }
    std::vector<std::vector<double>>& weights() { return weights_; }
    std::vector<std::vector<double>>& biases() { return biases_; }
    const std::vector<std::vector<double>>& weights() const { return weights_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }

    std::vector<double> forward(std::span<const double> input) const {
        Workspace ws;
        return forward_cached(input, ws);
    }

    /// Forward pass keeping post-activation values per layer for backward.
    struct Workspace {
        std::vector<std::vector<double>> activations;  // [layer+1][width]
    };

    std::vector<double> forward_cached(std::span<const double> input, Workspace& ws) const {
        if (static_cast<int>(input.size()) != sizes_.front())
            throw std::invalid_argument("Mlp::forward: input size " +
                                        std::to_string(input.size()) + " != declared " +
                                        std::to_string(sizes_.front()));
        ws.activations.assign(sizes_.size(), {});
        ws.activations[0].assign(input.begin(), input.end());
        for (size_t l = 0; l < weights_.size(); ++l) {
            const int in = sizes_[l], out = sizes_[l + 1];
            const bool hidden = (l + 1) < weights_.size();  // identity on the output layer
            std::vector<double>& a = ws.activations[l + 1];
            a.assign(static_cast<size_t>(out), 0.0);
            const std::vector<double>& x = ws.activations[l];
            for (int j = 0; j < out; ++j) {
                const double* wrow = &weights_[l][static_cast<size_t>(j) * in];
                double z = biases_[l][static_cast<size_t>(j)];
                for (int i = 0; i < in; ++i) z += wrow[i] * x[static_cast<size_t>(i)];
                a[static_cast<size_t>(j)] = (hidden && z < 0.0) ? 0.0 : z;  // ReLU on hidden
            }
        }
        std::vector<double> out = ws.activations.back();
        for (double v : out)
            if (!std::isfinite(v)) throw std::runtime_error("Mlp::forward: non-finite output");
        return out;
    }

    Gradients zero_gradients() const {
        Gradients g;
        g.weights.resize(weights_.size());
        g.biases.resize(biases_.size());
        for (size_t l = 0; l < weights_.size(); ++l) {
            g.weights[l].assign(weights_[l].size(), 0.0);
            g.biases[l].assign(biases_[l].size(), 0.0);
        }
        return g;
    }

    /// Gradient of 0.5 * (target_q[a] - q[a])^2 for the single action selected
    /// by `action_mask`, accumulated into `grads`. Returns the sample loss.
    /// `delta_override`, when finite, replaces the dLoss/dq[a] term (used for
    /// Huber loss and importance weighting).
    double accumulate_backward(std::span<const double> input, std::span<const double> target_q,
                               std::span<const double> action_mask, Gradients& grads,
                               double delta_override = std::nan("")) const {
        if (static_cast<int>(target_q.size()) != sizes_.back() ||
            static_cast<int>(action_mask.size()) != sizes_.back())
            throw std::invalid_argument("Mlp::backward: target/mask size mismatch");
        int action = -1;
        for (int j = 0; j < sizes_.back(); ++j) {
            if (action_mask[static_cast<size_t>(j)] != 0.0) {
                if (action >= 0)
                    throw std::invalid_argument("Mlp::backward: mask must select exactly one action");
                action = j;
            }
        }
        if (action < 0)
            throw std::invalid_argument("Mlp::backward: mask must select exactly one action");

        Workspace ws;
        const std::vector<double> q = forward_cached(input, ws);
        const double err = q[static_cast<size_t>(action)] - target_q[static_cast<size_t>(action)];
        const double loss = 0.5 * err * err;

        // delta over the output layer: only the taken action carries gradient
        std::vector<double> delta(static_cast<size_t>(sizes_.back()), 0.0);
        delta[static_cast<size_t>(action)] = std::isnan(delta_override) ? err : delta_override;

        for (size_t l = weights_.size(); l-- > 0;) {
            const int in = sizes_[l], out = sizes_[l + 1];
            const std::vector<double>& x = ws.activations[l];
            std::vector<double> prev_delta(static_cast<size_t>(in), 0.0);
            for (int j = 0; j < out; ++j) {
                const double dj = delta[static_cast<size_t>(j)];
                if (dj == 0.0) continue;
                grads.biases[l][static_cast<size_t>(j)] += dj;
                double* grow = &grads.weights[l][static_cast<size_t>(j) * in];
                const double* wrow = &weights_[l][static_cast<size_t>(j) * in];
                for (int i = 0; i < in; ++i) {
                    grow[i] += dj * x[static_cast<size_t>(i)];
                    prev_delta[static_cast<size_t>(i)] += dj * wrow[i];
                }
            }
            if (l > 0) {
                // ReLU derivative on the hidden activation
                for (int i = 0; i < in; ++i)
                    if (x[static_cast<size_t>(i)] <= 0.0) prev_delta[static_cast<size_t>(i)] = 0.0;
                delta = std::move(prev_delta);
            }
        }
        return loss;
    }

    Gradients backward(std::span<const double> input, std::span<const double> target_q,
                       std::span<const double> action_mask) const {
        Gradients g = zero_gradients();
        accumulate_backward(input, target_q, action_mask, g);
        return g;
    }

private:
    std::vector<int> sizes_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

enum class OptimizerKind { Adam, Sgd };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step = 0;
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;

    static OptimizerState for_net(const Mlp& net, OptimizerKind kind, double alpha) {
        OptimizerState s;
        s.kind = kind;
        s.alpha = alpha;
        if (kind == OptimizerKind::Adam) {
            const Gradients z = net.zero_gradients();
            s.m_w = z.weights;
            s.v_w = z.weights;
            s.m_b = z.biases;
            s.v_b = z.biases;
        }
        return s;
    }
};

/// One optimizer step. Throws on non-finite gradients; asserts parameters
/// stay finite after the update.
inline void apply_gradients(Mlp& net, OptimizerState& opt, const Gradients& grads) {
    for (const auto& layer : grads.weights)
        for (double g : layer)
            if (!std::isfinite(g)) throw std::runtime_error("apply_gradients: non-finite gradient");
    for (const auto& layer : grads.biases)
        for (double g : layer)
            if (!std::isfinite(g)) throw std::runtime_error("apply_gradients: non-finite gradient");

    opt.step += 1;
    if (opt.kind == OptimizerKind::Sgd) {
        for (size_t l = 0; l < net.layer_count(); ++l) {
            auto& w = net.weights()[l];
            auto& b = net.biases()[l];
            for (size_t i = 0; i < w.size(); ++i) w[i] -= opt.alpha * grads.weights[l][i];
            for (size_t i = 0; i < b.size(); ++i) b[i] -= opt.alpha * grads.biases[l][i];
        }
    } else {
        const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
        const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
        auto adam = [&](std::vector<double>& p, std::vector<double>& m, std::vector<double>& v,
                        const std::vector<double>& g) {
            for (size_t i = 0; i < p.size(); ++i) {
                m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
                v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] -= opt.alpha * mhat / (std::sqrt(vhat) + opt.eps);
            }
        };
        for (size_t l = 0; l < net.layer_count(); ++l) {
            adam(net.weights()[l], opt.m_w[l], opt.v_w[l], grads.weights[l]);
            adam(net.biases()[l], opt.m_b[l], opt.v_b[l], grads.biases[l]);
        }
    }
    for (const auto& layer : net.weights())
        for (double w : layer)
            if (!std::isfinite(w)) throw std::runtime_error("apply_gradients: parameter became non-finite");
    for (const auto& layer : net.biases())
        for (double b : layer)
            if (!std::isfinite(b)) throw std::runtime_error("apply_gradients: parameter became non-finite");
}

/// Worst relative error between analytic gradients and central finite
/// differences (h = 1e-5) over every parameter. Near-zero pairs (both below
/// 1e-10) contribute zero. With max_probes > 0 only that many uniformly
/// sampled parameters are probed (needed to keep the check tractable on the
/// matrix-mode shapes, which have ~1e5 parameters).
inline double gradient_check(Mlp& net, std::span<const double> input,
                             std::span<const double> target_q,
                             std::span<const double> action_mask, int64_t max_probes = 0,
                             RngStream* probe_rng = nullptr) {
    const Gradients analytic = net.backward(input, target_q, action_mask);
    const double h = 1e-5;
    double worst = 0.0;
    int64_t total_params = 0;
    for (size_t l = 0; l < net.layer_count(); ++l)
        total_params += static_cast<int64_t>(net.weights()[l].size() + net.biases()[l].size());
    const double probe_prob =
        (max_probes > 0 && probe_rng != nullptr && max_probes < total_params)
            ? static_cast<double>(max_probes) / static_cast<double>(total_params)
            : 1.1;
    int a = -1;
    for (int j = 0; j < kQOutputs; ++j)
        if (action_mask[static_cast<size_t>(j)] != 0.0) a = j;
    // loss plus the hidden activation sign pattern, so kink crossings between
    // the two probe points can be detected (central differences are invalid
    // across a ReLU kink; the analytic gradient is not wrong there)
    auto loss_at = [&](std::vector<bool>& pattern) {
        Mlp::Workspace ws;
        const std::vector<double> q = net.forward_cached(input, ws);
        pattern.clear();
        for (size_t l = 1; l + 1 < ws.activations.size(); ++l)
            for (double act : ws.activations[l]) pattern.push_back(act > 0.0);
        const double err = q[static_cast<size_t>(a)] - target_q[static_cast<size_t>(a)];
        return 0.5 * err * err;
    };
    std::vector<bool> pat_plus, pat_minus;
    auto probe = [&](double& param, double analytic_g) {
        if (probe_prob <= 1.0 && probe_rng->uniform01() >= probe_prob) return;
        const double saved = param;
        param = saved + h;
        const double lp = loss_at(pat_plus);
        param = saved - h;
        const double lm = loss_at(pat_minus);
        param = saved;
        if (pat_plus != pat_minus) return;  // probe straddles a kink
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic_g), std::abs(fd), 1e-10});
        if (std::abs(analytic_g) < 1e-10 && std::abs(fd) < 1e-10) return;
        worst = std::max(worst, std::abs(analytic_g - fd) / denom);
    };
    for (size_t l = 0; l < net.layer_count(); ++l) {
        for (size_t i = 0; i < net.weights()[l].size(); ++i)
            probe(net.weights()[l][i], analytic.weights[l][i]);
        for (size_t i = 0; i < net.biases()[l].size(); ++i)
            probe(net.biases()[l][i], analytic.biases[l][i]);
    }
    return worst;
}

}  // namespace beliefsim

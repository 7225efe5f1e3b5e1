/**
 * @file
 * @brief Many-to-one stacked LSTM classifier: forward pass, cross-entropy loss and backpropagation through time.
 *
 * Each layer consumes the hidden states of the layer below (inverted dropout in between while training).
 * The last hidden state of the top layer goes through a dense layer and a softmax.
 *
 * Gate blocks in W (4H x in), U (4H x H) and b (4H) are stacked as [input, forget, candidate, output].
 */

#pragma once

#include "bloomcast/detail/random.hpp"  // bloomcast::detail::derive_seed, bloomcast::detail::uniform01
#include "bloomcast/exceptions.hpp"     // bloomcast::invalid_argument_exception, bloomcast::divergence_exception

#include "Eigen/Dense"   // Eigen::MatrixXd, Eigen::VectorXd
#include "fmt/format.h"  // fmt::format

#include <algorithm>  // std::max
#include <cmath>    // std::log, std::exp, std::isfinite
#include <cstddef>  // std::size_t
#include <cstdint>  // std::uint64_t
#include <random>   // std::mt19937_64
#include <tuple>    // std::tie
#include <utility>  // std::pair
#include <vector>   // std::vector

namespace bloomcast::lstm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class optimizer_kind { adam, sgd };

struct lstm_hyper {
    std::size_t num_layers{ 2 };
    std::size_t input_size{ 1 };
    std::size_t hidden_size{ 30 };
    /// Dropout probability between stacked layers.
    double dropout{ 0.5 };
    std::size_t n_classes{ 11 };
    double learning_rate{ 1e-3 };
    std::size_t epochs{ 30 };
    std::size_t batch_size{ 16 };
    std::uint64_t seed{ 0 };
    optimizer_kind optimizer{ optimizer_kind::adam };

    void validate() const {
        if (num_layers < 1 || input_size < 1 || hidden_size < 1 || n_classes < 2 || batch_size < 1) {
            throw invalid_argument_exception{ fmt::format("invalid LSTM shape: layers {}, input {}, hidden {}, classes {}, batch {}", num_layers, input_size, hidden_size, n_classes, batch_size) };
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) {
            throw invalid_argument_exception{ fmt::format("dropout must lie in [0, 1), but is {}", dropout) };
        }
        if (!(learning_rate > 0.0)) {
            throw invalid_argument_exception{ fmt::format("the learning rate must be positive, but is {}", learning_rate) };
        }
    }

    friend bool operator==(const lstm_hyper &, const lstm_hyper &) = default;
};

struct layer_params {
    MatrixXd w{};
    MatrixXd u{};
    VectorXd b{};
};

struct lstm_params {
    std::vector<layer_params> layers{};
    MatrixXd head_w{};
    VectorXd head_b{};

    /// Same shapes, all zeros.
    [[nodiscard]] lstm_params zeros_like() const {
        lstm_params z;
        for (const layer_params &l : layers) {
            z.layers.push_back({ MatrixXd::Zero(l.w.rows(), l.w.cols()), MatrixXd::Zero(l.u.rows(), l.u.cols()), VectorXd::Zero(l.b.size()) });
        }
        z.head_w = MatrixXd::Zero(head_w.rows(), head_w.cols());
        z.head_b = VectorXd::Zero(head_b.size());
        return z;
    }

    /// Calls f(Eigen::Ref<MatrixXd>) ... on every parameter tensor in a fixed order.
    template <typename F>
    void for_each(F &&f) {
        for (layer_params &l : layers) {
            f(l.w);
            f(l.u);
            f(l.b);
        }
        f(head_w);
        f(head_b);
    }

    template <typename F>
    void for_each(F &&f) const {
        for (const layer_params &l : layers) {
            f(l.w);
            f(l.u);
            f(l.b);
        }
        f(head_w);
        f(head_b);
    }

    [[nodiscard]] std::size_t size() const {
        std::size_t n = 0;
        for_each([&](const auto &m) { n += static_cast<std::size_t>(m.size()); });
        return n;
    }

    [[nodiscard]] bool all_finite() const {
        bool finite = true;
        for_each([&](const auto &m) { finite = finite && m.allFinite(); });
        return finite;
    }

    friend bool operator==(const lstm_params &lhs, const lstm_params &rhs) {
        if (lhs.layers.size() != rhs.layers.size()) {
            return false;
        }
        const auto same = [](const auto &a, const auto &b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; };
        for (std::size_t i = 0; i < lhs.layers.size(); ++i) {
            if (!same(lhs.layers[i].w, rhs.layers[i].w) || !same(lhs.layers[i].u, rhs.layers[i].u) || !same(lhs.layers[i].b, rhs.layers[i].b)) {
                return false;
            }
        }
        return same(lhs.head_w, rhs.head_w) && same(lhs.head_b, rhs.head_b);
    }
};

/// Checks that @p params matches the shapes implied by @p hyper.
inline void check_shapes(const lstm_params &params, const lstm_hyper &hyper) {
    const auto hidden = static_cast<Eigen::Index>(hyper.hidden_size);
    bool ok = params.layers.size() == hyper.num_layers;
    for (std::size_t l = 0; ok && l < params.layers.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(l == 0 ? hyper.input_size : hyper.hidden_size);
        const layer_params &p = params.layers[l];
        ok = p.w.rows() == 4 * hidden && p.w.cols() == in && p.u.rows() == 4 * hidden && p.u.cols() == hidden && p.b.size() == 4 * hidden;
    }
    ok = ok && params.head_w.rows() == static_cast<Eigen::Index>(hyper.n_classes) && params.head_w.cols() == hidden && params.head_b.size() == static_cast<Eigen::Index>(hyper.n_classes);
    if (!ok) {
        throw invalid_argument_exception{ "LSTM parameter shapes don't match the hyperparameters" };
    }
}

namespace detail {

[[nodiscard]] inline VectorXd sigmoid(const VectorXd &x) {
    return x.unaryExpr([](const double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

[[nodiscard]] inline VectorXd tanh(const VectorXd &x) {
    return x.unaryExpr([](const double v) { return std::tanh(v); });
}

}  // namespace detail

/// Post-activation gate values of one step.
struct gate_values {
    VectorXd i{};
    VectorXd f{};
    VectorXd g{};
    VectorXd o{};
};

/**
 * @brief One LSTM step; returns (h, c) and optionally the gate activations.
 * @throws bloomcast::invalid_argument_exception on a shape mismatch
 * @throws bloomcast::divergence_exception if the new state is not finite
 */
inline std::pair<VectorXd, VectorXd> cell_forward(const VectorXd &x, const VectorXd &h_prev, const VectorXd &c_prev, const layer_params &layer, gate_values *gates = nullptr) {
    const Eigen::Index hidden = layer.u.cols();
    if (x.size() != layer.w.cols() || h_prev.size() != hidden || c_prev.size() != hidden || layer.w.rows() != 4 * hidden || layer.b.size() != 4 * hidden) {
        throw invalid_argument_exception{ fmt::format("LSTM cell shape mismatch: x {}, h {}, c {}, W {}x{}", x.size(), h_prev.size(), c_prev.size(), layer.w.rows(), layer.w.cols()) };
    }
    const VectorXd a = layer.w * x + layer.u * h_prev + layer.b;
    gate_values local;
    gate_values &gv = gates != nullptr ? *gates : local;
    gv.i = detail::sigmoid(a.segment(0, hidden));
    gv.f = detail::sigmoid(a.segment(hidden, hidden));
    gv.g = detail::tanh(a.segment(2 * hidden, hidden));
    gv.o = detail::sigmoid(a.segment(3 * hidden, hidden));
    VectorXd c = gv.f.cwiseProduct(c_prev) + gv.i.cwiseProduct(gv.g);
    VectorXd h = gv.o.cwiseProduct(detail::tanh(c));
    if (!c.allFinite() || !h.allFinite()) {
        throw divergence_exception{ "non-finite LSTM state", 0 };
    }
    return { std::move(h), std::move(c) };
}

/// Numerically stable softmax.
[[nodiscard]] inline VectorXd softmax(const VectorXd &logits) {
    const double max = logits.maxCoeff();
    VectorXd e = (logits.array() - max).exp().matrix();
    return e / e.sum();
}

inline constexpr double probability_floor = 1e-12;

/**
 * @brief -log(probs[label]) with the probability clipped below at 1e-12.
 */
[[nodiscard]] inline double cross_entropy(const VectorXd &probs, const std::size_t label) {
    if (label >= static_cast<std::size_t>(probs.size())) {
        throw invalid_argument_exception{ fmt::format("label {} out of range for {} classes", label, probs.size()) };
    }
    return -std::log(std::max(probs(static_cast<Eigen::Index>(label)), probability_floor));
}

/// Activations of one layer over all timesteps.
struct layer_cache {
    /// Rows are timesteps.
    MatrixXd inputs{};
    std::vector<gate_values> gates{};
    std::vector<VectorXd> c{};
    std::vector<VectorXd> h{};
    /// Inverted-dropout multipliers applied to `inputs` (empty if no dropout).
    MatrixXd input_mask{};
};

struct forward_cache {
    std::vector<layer_cache> layers{};
    VectorXd logits{};
    VectorXd probs{};
};

/**
 * @brief Draw the inverted-dropout multipliers for the input of layer @p layer.
 */
[[nodiscard]] inline MatrixXd dropout_mask(const Eigen::Index steps, const Eigen::Index width, const double p, const std::uint64_t seed, const std::size_t layer) {
    std::mt19937_64 rng{ bloomcast::detail::derive_seed(seed, layer) };
    MatrixXd mask(steps, width);
    const double keep_scale = 1.0 / (1.0 - p);
    for (Eigen::Index t = 0; t < steps; ++t) {
        for (Eigen::Index j = 0; j < width; ++j) {
            mask(t, j) = bloomcast::detail::uniform01(rng) < p ? 0.0 : keep_scale;
        }
    }
    return mask;
}

/**
 * @brief Run the network on one sequence (rows = timesteps).
 *
 * In train mode the dropout masks between layers are drawn from @p seed; otherwise dropout is the identity.
 * @throws bloomcast::invalid_argument_exception on shape mismatches or an empty sequence
 * @throws bloomcast::divergence_exception on non-finite activations
 */
[[nodiscard]] inline forward_cache forward(const MatrixXd &sequence, const lstm_params &params, const lstm_hyper &hyper, const bool train_mode, const std::uint64_t seed) {
    if (sequence.rows() < 1) {
        throw invalid_argument_exception{ "an LSTM input sequence needs at least one timestep" };
    }
    if (sequence.cols() != static_cast<Eigen::Index>(hyper.input_size)) {
        throw invalid_argument_exception{ fmt::format("sequence has {} values per step, expected {}", sequence.cols(), hyper.input_size) };
    }
    check_shapes(params, hyper);
    const Eigen::Index steps = sequence.rows();
    const auto hidden = static_cast<Eigen::Index>(hyper.hidden_size);

    forward_cache cache;
    cache.layers.resize(params.layers.size());
    MatrixXd input = sequence;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        layer_cache &lc = cache.layers[l];
        if (l > 0 && train_mode && hyper.dropout > 0.0) {
            lc.input_mask = dropout_mask(steps, input.cols(), hyper.dropout, seed, l);
            input = input.cwiseProduct(lc.input_mask);
        }
        lc.inputs = input;
        lc.gates.resize(static_cast<std::size_t>(steps));
        VectorXd h = VectorXd::Zero(hidden);
        VectorXd c = VectorXd::Zero(hidden);
        MatrixXd outputs(steps, hidden);
        for (Eigen::Index t = 0; t < steps; ++t) {
            std::tie(h, c) = cell_forward(lc.inputs.row(t).transpose(), h, c, params.layers[l], &lc.gates[static_cast<std::size_t>(t)]);
            lc.h.push_back(h);
            lc.c.push_back(c);
            outputs.row(t) = h.transpose();
        }
        input = std::move(outputs);
    }
    cache.logits = params.head_w * cache.layers.back().h.back() + params.head_b;
    cache.probs = softmax(cache.logits);
    if (!cache.probs.allFinite()) {
        throw divergence_exception{ "non-finite LSTM output", 0 };
    }
    return cache;
}

/**
 * @brief Exact gradient of cross_entropy(forward(...).probs, label) with respect to all parameters.
 *
 * Uses the dropout masks stored in @p cache. Below the probability floor the clipped loss is flat but the
 * unclipped softmax gradient is returned.
 */
[[nodiscard]] inline lstm_params backward(const forward_cache &cache, const std::size_t label, const lstm_params &params) {
    if (label >= static_cast<std::size_t>(cache.probs.size())) {
        throw invalid_argument_exception{ fmt::format("label {} out of range for {} classes", label, cache.probs.size()) };
    }
    lstm_params grads = params.zeros_like();
    VectorXd d_logits = cache.probs;
    d_logits(static_cast<Eigen::Index>(label)) -= 1.0;

    const VectorXd &h_top = cache.layers.back().h.back();
    grads.head_w = d_logits * h_top.transpose();
    grads.head_b = d_logits;

    const Eigen::Index steps = cache.layers.front().inputs.rows();
    const Eigen::Index hidden = params.head_w.cols();
    // gradient with respect to the hidden outputs of the current layer
    MatrixXd d_out = MatrixXd::Zero(steps, hidden);
    d_out.row(steps - 1) = (params.head_w.transpose() * d_logits).transpose();

    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const layer_params &p = params.layers[l];
        const layer_cache &lc = cache.layers[l];
        layer_params &g = grads.layers[l];
        MatrixXd d_in = MatrixXd::Zero(steps, p.w.cols());
        VectorXd dh_next = VectorXd::Zero(hidden);
        VectorXd dc_next = VectorXd::Zero(hidden);
        VectorXd da(4 * hidden);
        for (Eigen::Index t = steps; t-- > 0;) {
            const auto ts = static_cast<std::size_t>(t);
            const gate_values &gv = lc.gates[ts];
            const VectorXd c_prev = t > 0 ? lc.c[ts - 1] : VectorXd::Zero(hidden);
            const VectorXd h_prev = t > 0 ? lc.h[ts - 1] : VectorXd::Zero(hidden);
            const VectorXd tanh_c = detail::tanh(lc.c[ts]);

            const VectorXd dh = d_out.row(t).transpose() + dh_next;
            const VectorXd d_o = dh.cwiseProduct(tanh_c);
            const VectorXd dc = dh.cwiseProduct(gv.o).cwiseProduct((1.0 - tanh_c.array().square()).matrix()) + dc_next;
            const VectorXd d_i = dc.cwiseProduct(gv.g);
            const VectorXd d_g = dc.cwiseProduct(gv.i);
            const VectorXd d_f = dc.cwiseProduct(c_prev);
            dc_next = dc.cwiseProduct(gv.f);

            da.segment(0, hidden) = d_i.array() * gv.i.array() * (1.0 - gv.i.array());
            da.segment(hidden, hidden) = d_f.array() * gv.f.array() * (1.0 - gv.f.array());
            da.segment(2 * hidden, hidden) = d_g.array() * (1.0 - gv.g.array().square());
            da.segment(3 * hidden, hidden) = d_o.array() * gv.o.array() * (1.0 - gv.o.array());

            g.w.noalias() += da * lc.inputs.row(t);
            g.u.noalias() += da * h_prev.transpose();
            g.b += da;
            d_in.row(t) = (p.w.transpose() * da).transpose();
            dh_next = p.u.transpose() * da;
        }
        if (l > 0) {
            d_out = lc.input_mask.size() > 0 ? MatrixXd{ d_in.cwiseProduct(lc.input_mask) } : d_in;
        }
    }
    return grads;
}

/// Index of the largest probability; ties go to the lowest index.
[[nodiscard]] inline std::size_t argmax(const VectorXd &probs) {
    std::size_t best = 0;
    for (Eigen::Index c = 1; c < probs.size(); ++c) {
        if (probs(c) > probs(static_cast<Eigen::Index>(best))) {
            best = static_cast<std::size_t>(c);
        }
    }
    return best;
}

}  // namespace bloomcast::lstm

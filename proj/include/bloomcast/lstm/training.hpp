/**
 * @file
 * @brief Initialization, mini-batch training and prediction for the LSTM classifier.
 */

#pragma once

#include "bloomcast/detail/random.hpp"   // bloomcast::detail::derive_seed, bloomcast::detail::shuffle
#include "bloomcast/exceptions.hpp"      // bloomcast::divergence_exception, bloomcast::invalid_argument_exception
#include "bloomcast/lstm/lstm.hpp"       // bloomcast::lstm::forward, bloomcast::lstm::backward
#include "bloomcast/phenology_data.hpp"  // bloomcast::dataset

#include "Eigen/Dense"   // Eigen::MatrixXd
#include "fmt/format.h"  // fmt::format

#include <algorithm>  // std::min
#include <cmath>    // std::sqrt, std::pow, std::isfinite
#include <cstddef>  // std::size_t
#include <cstdint>  // std::uint64_t
#include <numeric>  // std::iota
#include <random>   // std::mt19937_64
#include <span>     // std::span
#include <vector>   // std::vector

namespace bloomcast::lstm {

/**
 * @brief Weights uniform in +-1/sqrt(hidden_size), biases zero except the forget gate (+1).
 */
[[nodiscard]] inline lstm_params init_params(const lstm_hyper &hyper) {
    hyper.validate();
    std::mt19937_64 rng{ bloomcast::detail::derive_seed(hyper.seed, 0x1417) };
    const double bound = 1.0 / std::sqrt(static_cast<double>(hyper.hidden_size));
    const auto uniform = [&](const Eigen::Index rows, const Eigen::Index cols) {
        MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                m(r, c) = bound * (2.0 * bloomcast::detail::uniform01(rng) - 1.0);
            }
        }
        return m;
    };
    const auto hidden = static_cast<Eigen::Index>(hyper.hidden_size);
    lstm_params params;
    for (std::size_t l = 0; l < hyper.num_layers; ++l) {
        const auto in = static_cast<Eigen::Index>(l == 0 ? hyper.input_size : hyper.hidden_size);
        layer_params layer{ uniform(4 * hidden, in), uniform(4 * hidden, hidden), VectorXd::Zero(4 * hidden) };
        layer.b.segment(hidden, hidden).setOnes();
        params.layers.push_back(std::move(layer));
    }
    params.head_w = uniform(static_cast<Eigen::Index>(hyper.n_classes), hidden);
    params.head_b = VectorXd::Zero(static_cast<Eigen::Index>(hyper.n_classes));
    return params;
}

/**
 * @brief Reshape a flat feature vector into a (length / input_size) x input_size sequence, row by row.
 */
[[nodiscard]] inline MatrixXd to_sequence(const std::span<const double> features, const std::size_t input_size) {
    if (input_size == 0 || features.empty() || features.size() % input_size != 0) {
        throw invalid_argument_exception{ fmt::format("{} features can't be split into steps of {} values", features.size(), input_size) };
    }
    const auto steps = static_cast<Eigen::Index>(features.size() / input_size);
    MatrixXd seq(steps, static_cast<Eigen::Index>(input_size));
    for (Eigen::Index t = 0; t < steps; ++t) {
        for (Eigen::Index j = 0; j < seq.cols(); ++j) {
            seq(t, j) = features[static_cast<std::size_t>(t) * input_size + static_cast<std::size_t>(j)];
        }
    }
    return seq;
}

/**
 * @brief Adam (or plain SGD) state over all parameter tensors.
 */
class optimizer {
  public:
    optimizer(const lstm_hyper &hyper, const lstm_params &params) :
        kind_{ hyper.optimizer },
        learning_rate_{ hyper.learning_rate },
        m_{ params.zeros_like() },
        v_{ params.zeros_like() } { }

    void step(lstm_params &params, const lstm_params &grads) {
        ++t_;
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            update(params.layers[l].w, grads.layers[l].w, m_.layers[l].w, v_.layers[l].w);
            update(params.layers[l].u, grads.layers[l].u, m_.layers[l].u, v_.layers[l].u);
            update(params.layers[l].b, grads.layers[l].b, m_.layers[l].b, v_.layers[l].b);
        }
        update(params.head_w, grads.head_w, m_.head_w, v_.head_w);
        update(params.head_b, grads.head_b, m_.head_b, v_.head_b);
    }

  private:
    template <typename T>
    void update(T &param, const T &grad, T &m, T &v) const {
        if (kind_ == optimizer_kind::sgd) {
            param -= learning_rate_ * grad;
            return;
        }
        constexpr double beta1 = 0.9;
        constexpr double beta2 = 0.999;
        constexpr double eps = 1e-8;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        param.array() -= learning_rate_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }

    optimizer_kind kind_;
    double learning_rate_;
    std::size_t t_{ 0 };
    lstm_params m_;
    lstm_params v_;
};

struct training_result {
    lstm_params params{};
    /// Mean training-mode cross-entropy per epoch.
    std::vector<double> loss_trace{};
};

/**
 * @brief Train from scratch on @p train with mini-batch gradient descent.
 *
 * Each sample's features are reshaped by to_sequence(features, hyper.input_size). The shuffling order and
 * the dropout masks derive from hyper.seed, so equal inputs give bitwise equal parameters.
 *
 * @throws bloomcast::invalid_argument_exception on invalid hyperparameters, labels, or feature shapes
 * @throws bloomcast::divergence_exception if the loss becomes non-finite; carries the 1-based epoch
 */
[[nodiscard]] inline training_result train_lstm(const dataset &train, const lstm_hyper &hyper) {
    hyper.validate();
    if (train.feature_len == 0 || train.feature_len % hyper.input_size != 0) {
        throw invalid_argument_exception{ fmt::format("feature length {} is not a multiple of the LSTM input size {}", train.feature_len, hyper.input_size) };
    }
    std::vector<MatrixXd> sequences;
    sequences.reserve(train.samples.size());
    for (const window_sample &s : train.samples) {
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= hyper.n_classes) {
            throw invalid_argument_exception{ fmt::format("label {} out of range for {} classes", s.label, hyper.n_classes) };
        }
        sequences.push_back(to_sequence(s.features, hyper.input_size));
    }

    training_result result{ init_params(hyper), {} };
    if (hyper.epochs == 0 || sequences.empty()) {
        return result;
    }
    lstm_params &params = result.params;
    optimizer opt{ hyper, params };
    std::vector<std::size_t> order(sequences.size());
    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{ 0 });
        std::mt19937_64 rng{ bloomcast::detail::derive_seed(hyper.seed, epoch) };
        bloomcast::detail::shuffle(order, rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t end = std::min(order.size(), start + hyper.batch_size);
            lstm_params grads = params.zeros_like();
            for (std::size_t pos = start; pos < end; ++pos) {
                const std::size_t idx = order[pos];
                const auto label = static_cast<std::size_t>(train.samples[idx].label);
                const std::uint64_t mask_seed = bloomcast::detail::derive_seed(bloomcast::detail::derive_seed(hyper.seed, epoch), pos);
                forward_cache cache;
                try {
                    cache = forward(sequences[idx], params, hyper, true, mask_seed);
                } catch (const divergence_exception &) {
                    throw divergence_exception{ fmt::format("LSTM training diverged in epoch {}", epoch), epoch };
                }
                epoch_loss += cross_entropy(cache.probs, label);
                const lstm_params g = backward(cache, label, params);
                for (std::size_t l = 0; l < grads.layers.size(); ++l) {
                    grads.layers[l].w += g.layers[l].w;
                    grads.layers[l].u += g.layers[l].u;
                    grads.layers[l].b += g.layers[l].b;
                }
                grads.head_w += g.head_w;
                grads.head_b += g.head_b;
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            grads.for_each([&](auto &m) { m *= scale; });
            opt.step(params, grads);
        }
        epoch_loss /= static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss) || !params.all_finite()) {
            throw divergence_exception{ fmt::format("LSTM training diverged in epoch {} (loss {})", epoch, epoch_loss), epoch };
        }
        result.loss_trace.push_back(epoch_loss);
    }
    return result;
}

/// Class probabilities in inference mode.
[[nodiscard]] inline VectorXd predict_probabilities(const lstm_params &params, const lstm_hyper &hyper, const MatrixXd &sequence) {
    return forward(sequence, params, hyper, false, 0).probs;
}

/// Most probable class (lowest index on ties).
[[nodiscard]] inline std::size_t predict_lstm(const lstm_params &params, const lstm_hyper &hyper, const MatrixXd &sequence) {
    return argmax(predict_probabilities(params, hyper, sequence));
}

}  // namespace bloomcast::lstm

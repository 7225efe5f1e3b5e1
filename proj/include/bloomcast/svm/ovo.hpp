/**
 * @file
 * @brief One-vs-one multi-class SVM: one binary classifier per unordered class pair, majority vote.
 */

#pragma once

#include "bloomcast/exceptions.hpp"       // bloomcast::convergence_exception, bloomcast::invalid_argument_exception
#include "bloomcast/imbalance.hpp"        // bloomcast::compute_class_weights, bloomcast::smote_oversample
#include "bloomcast/phenology_data.hpp"   // bloomcast::dataset
#include "bloomcast/svm/kernel.hpp"       // bloomcast::svm::kernel_spec
#include "bloomcast/svm/smo_solver.hpp"   // bloomcast::svm::solve_binary

#include "fmt/format.h"  // fmt::format

#include <algorithm>  // std::find, std::max_element
#include <cmath>      // std::abs
#include <cstddef>    // std::size_t
#include <cstdint>    // std::uint64_t
#include <optional>   // std::optional
#include <span>       // std::span
#include <string>     // std::string
#include <vector>     // std::vector

namespace bloomcast::svm {

/// How class imbalance is treated during training.
enum class training_regime {
    /// Equal penalties for all classes.
    ordinary,
    /// Per-class penalty C * w_j with w_j = n / (k n_j).
    weighted,
    /// SMOTE up to the majority class size, then equal penalties.
    oversampled
};

[[nodiscard]] inline std::string_view to_string(const training_regime regime) noexcept {
    switch (regime) {
        case training_regime::ordinary:
            return "ordinary";
        case training_regime::weighted:
            return "weighted";
        case training_regime::oversampled:
            return "oversampled";
    }
    return "unknown";
}

[[nodiscard]] inline std::optional<training_regime> regime_from_string(const std::string_view name) {
    if (name == "ordinary") {
        return training_regime::ordinary;
    }
    if (name == "weighted") {
        return training_regime::weighted;
    }
    if (name == "oversampled") {
        return training_regime::oversampled;
    }
    return std::nullopt;
}

/**
 * @brief The trained classifier of one class pair; only its support vectors are kept.
 *
 * Positive decision values vote for @p positive_class (the smaller label).
 */
struct pairwise_classifier {
    int positive_class{};
    int negative_class{};
    std::vector<std::vector<double>> support_vectors{};
    std::vector<double> alphas{};
    /// +1 or -1 per support vector.
    std::vector<int> labels{};
    double bias{};

    [[nodiscard]] double decision(const std::span<const double> x, const kernel_spec &kernel) const {
        double value = bias;
        for (std::size_t i = 0; i < support_vectors.size(); ++i) {
            value += alphas[i] * static_cast<double>(labels[i]) * rbf_kernel(support_vectors[i], x, kernel);
        }
        return value;
    }

    friend bool operator==(const pairwise_classifier &, const pairwise_classifier &) = default;
};

struct ovo_model {
    /// Sorted labels of the classes seen in training.
    std::vector<int> classes{};
    kernel_spec kernel{};
    std::size_t feature_len{};
    double c{ 1.0 };
    training_regime regime{ training_regime::ordinary };
    /// Ordered by (positive_class, negative_class).
    std::vector<pairwise_classifier> pairs{};

    [[nodiscard]] std::size_t num_classes() const noexcept { return classes.size(); }

    friend bool operator==(const ovo_model &, const ovo_model &) = default;
};

struct ovo_options {
    solver_options solver{};
    std::size_t smote_neighbors{ 5 };
};

/**
 * @brief Default RBF parameter 1 / (feature_len * variance of all feature values).
 *
 * Falls back to 1 / feature_len for constant features.
 */
[[nodiscard]] inline double default_gamma(const dataset &data) {
    if (data.samples.empty() || data.feature_len == 0) {
        throw invalid_argument_exception{ "can't derive gamma from an empty data set" };
    }
    double mean = 0.0;
    std::size_t n = 0;
    for (const window_sample &s : data.samples) {
        for (const double v : s.features) {
            mean += v;
            ++n;
        }
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const window_sample &s : data.samples) {
        for (const double v : s.features) {
            var += (v - mean) * (v - mean);
        }
    }
    var /= static_cast<double>(n);
    const double len = static_cast<double>(data.feature_len);
    return var > 0.0 ? 1.0 / (len * var) : 1.0 / len;
}

/**
 * @brief Train one binary classifier per unordered pair of the classes present in @p data.
 *
 * @throws bloomcast::invalid_argument_exception if fewer than two classes are present or the parameters are invalid
 * @throws bloomcast::convergence_exception if a pair doesn't converge; the message names the pair
 */
[[nodiscard]] inline ovo_model train_ovo(const dataset &data, const double c, const kernel_spec &kernel, const training_regime regime, const std::uint64_t seed, const ovo_options &options = {}) {
    kernel.validate();
    if (!(c > 0.0)) {
        throw invalid_argument_exception{ fmt::format("the penalty C must be positive, but is {}", c) };
    }
    if (data.class_counts.size() < 2) {
        throw invalid_argument_exception{ fmt::format("one-vs-one training needs at least two classes, but {} present", data.class_counts.size()) };
    }
    for (const window_sample &s : data.samples) {
        if (s.features.size() != data.feature_len) {
            throw invalid_argument_exception{ fmt::format("sample of year {} day {} has {} features, expected {}", s.year, s.anchor_doy, s.features.size(), data.feature_len) };
        }
    }

    class_weights weights;
    for (const auto &[label, count] : data.class_counts) {
        weights[label] = 1.0;
    }
    const dataset *train = &data;
    dataset oversampled;
    if (regime == training_regime::weighted) {
        weights = compute_class_weights(data.class_counts);
    } else if (regime == training_regime::oversampled) {
        oversampled = smote_oversample(data, seed, options.smote_neighbors);
        train = &oversampled;
    }

    ovo_model model;
    model.kernel = kernel;
    model.feature_len = data.feature_len;
    model.c = c;
    model.regime = regime;
    for (const auto &[label, count] : train->class_counts) {
        model.classes.push_back(label);
    }

    for (std::size_t a = 0; a < model.classes.size(); ++a) {
        for (std::size_t b = a + 1; b < model.classes.size(); ++b) {
            const int pos = model.classes[a];
            const int neg = model.classes[b];
            binary_problem problem;
            problem.c_pos = c * weights.at(pos);
            problem.c_neg = c * weights.at(neg);
            for (const window_sample &s : train->samples) {
                if (s.label == pos || s.label == neg) {
                    problem.inputs.push_back(s.features);
                    problem.labels.push_back(s.label == pos ? 1 : -1);
                }
            }
            dual_solution solution;
            try {
                solution = solve_binary(problem, kernel, options.solver);
            } catch (const convergence_exception &e) {
                throw convergence_exception{ fmt::format("class pair ({}, {}): {}", pos, neg, e.what()), e.best_objective(), e.kkt_violations() };
            }
            pairwise_classifier clf{ pos, neg, {}, {}, {}, solution.bias };
            for (const std::size_t i : solution.support_indices) {
                clf.support_vectors.push_back(std::move(problem.inputs[i]));
                clf.alphas.push_back(solution.alphas[i]);
                clf.labels.push_back(problem.labels[i]);
            }
            model.pairs.push_back(std::move(clf));
        }
    }
    return model;
}

namespace detail {

struct vote_tally {
    std::vector<std::size_t> votes{};
    /// Sum of |decision value| over the contests each class won.
    std::vector<double> magnitude{};
};

[[nodiscard]] inline vote_tally tally_votes(const ovo_model &model, const std::span<const double> x) {
    if (x.size() != model.feature_len) {
        throw invalid_argument_exception{ fmt::format("query has {} features, but the model expects {}", x.size(), model.feature_len) };
    }
    const auto index_of = [&](const int label) {
        return static_cast<std::size_t>(std::find(model.classes.begin(), model.classes.end(), label) - model.classes.begin());
    };
    vote_tally tally{ std::vector<std::size_t>(model.classes.size(), 0), std::vector<double>(model.classes.size(), 0.0) };
    for (const pairwise_classifier &clf : model.pairs) {
        const double f = clf.decision(x, model.kernel);
        const std::size_t winner = f > 0.0 ? index_of(clf.positive_class) : index_of(clf.negative_class);
        ++tally.votes[winner];
        tally.magnitude[winner] += std::abs(f);
    }
    return tally;
}

}  // namespace detail

/**
 * @brief The class with the most pairwise votes.
 *
 * Ties go to the larger summed |decision value| of the won contests, then to the lower class label.
 */
[[nodiscard]] inline int predict_ovo(const ovo_model &model, const std::span<const double> x) {
    const detail::vote_tally tally = detail::tally_votes(model, x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < model.classes.size(); ++c) {
        if (tally.votes[c] > tally.votes[best] || (tally.votes[c] == tally.votes[best] && tally.magnitude[c] > tally.magnitude[best])) {
            best = c;
        }
    }
    return model.classes[best];
}

/**
 * @brief Vote share of each class of model.classes; the shares sum to one.
 */
[[nodiscard]] inline std::vector<double> predict_scores(const ovo_model &model, const std::span<const double> x) {
    const detail::vote_tally tally = detail::tally_votes(model, x);
    const double total = static_cast<double>(model.pairs.size());
    std::vector<double> scores(model.classes.size());
    for (std::size_t c = 0; c < scores.size(); ++c) {
        scores[c] = static_cast<double>(tally.votes[c]) / total;
    }
    return scores;
}

}  // namespace bloomcast::svm

/**
 * @file
 * @brief Property checks shared by the unit tests and the acceptance suite.
 *
 * Each check draws `cases` random instances from a seed and returns the first counterexample found, if any.
 */

#pragma once

#include "bloomcast/detail/random.hpp"
#include "bloomcast/imbalance.hpp"
#include "bloomcast/lstm/lstm.hpp"
#include "bloomcast/lstm/training.hpp"
#include "bloomcast/metrics.hpp"

#include "fmt/format.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <random>
#include <string>
#include <vector>

namespace bloomcast::test {

using counterexample = std::optional<std::string>;

//------------------------------------------------------------------------------------------------
// imbalance
//------------------------------------------------------------------------------------------------

inline dataset random_imbalanced_dataset(std::mt19937_64 &rng) {
    using bloomcast::detail::uniform_index;
    dataset data;
    data.k = 10;
    data.feature_len = 1 + uniform_index(rng, 4);
    const std::size_t n_classes = 2 + uniform_index(rng, 4);
    for (std::size_t c = 0; c < n_classes; ++c) {
        const std::size_t count = 2 + uniform_index(rng, 15);
        const bool collapsed = uniform_index(rng, 8) == 0;
        std::vector<double> anchor(data.feature_len);
        for (double &v : anchor) {
            v = 5.0 * bloomcast::detail::standard_normal(rng);
        }
        for (std::size_t i = 0; i < count; ++i) {
            window_sample s{ anchor, static_cast<int>(c * 2), 2000, static_cast<int>(i) };
            if (!collapsed) {
                for (double &v : s.features) {
                    v += bloomcast::detail::standard_normal(rng);
                }
            }
            data.samples.push_back(std::move(s));
        }
    }
    data.recount();
    return data;
}

/// Is `p` on the closed segment [a, b]? Checked by reconstructing p = a + u (b - a) with u in [0, 1].
inline bool on_segment(const std::vector<double> &p, const std::vector<double> &a, const std::vector<double> &b, const double tol = 1e-9) {
    double dd = 0.0;
    double dp = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dd += (b[i] - a[i]) * (b[i] - a[i]);
        dp += (p[i] - a[i]) * (b[i] - a[i]);
    }
    const double u = dd > 0.0 ? dp / dd : 0.0;
    if (u < -tol || u > 1.0 + tol) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] + u * (b[i] - a[i]) - p[i]) > tol * (1.0 + std::abs(p[i]))) {
            return false;
        }
    }
    return true;
}

/// Weight identity, SMOTE determinism, uniform post-SMOTE counts, retained originals, segment property.
inline counterexample check_imbalance_properties(const std::uint64_t seed, const std::size_t cases) {
    std::mt19937_64 rng{ seed };
    for (std::size_t trial = 0; trial < cases; ++trial) {
        const dataset data = random_imbalanced_dataset(rng);
        const class_weights w = compute_class_weights(data.class_counts);
        double weighted = 0.0;
        for (const auto &[label, count] : data.class_counts) {
            if (!(w.at(label) > 0.0)) {
                return fmt::format("case {}: non-positive weight for class {}", trial, label);
            }
            weighted += w.at(label) * static_cast<double>(count);
        }
        if (std::abs(weighted - static_cast<double>(data.size())) > 1e-12 * static_cast<double>(data.size())) {
            return fmt::format("case {}: sum w_j n_j = {} but n = {}", trial, weighted, data.size());
        }

        const std::uint64_t smote_seed = rng();
        const std::size_t neighbors = 1 + bloomcast::detail::uniform_index(rng, 6);
        const dataset a = smote_oversample(data, smote_seed, neighbors);
        const dataset b = smote_oversample(data, smote_seed, neighbors);
        if (a.samples != b.samples) {
            return fmt::format("case {}: SMOTE not deterministic for seed {}", trial, smote_seed);
        }
        std::size_t target = 0;
        for (const auto &[label, count] : data.class_counts) {
            target = std::max(target, count);
        }
        for (const auto &[label, count] : a.class_counts) {
            if (count != target) {
                return fmt::format("case {}: class {} has {} samples after SMOTE, expected {}", trial, label, count, target);
            }
        }
        if (!std::equal(data.samples.begin(), data.samples.end(), a.samples.begin())) {
            return fmt::format("case {}: original samples were modified", trial);
        }
        for (std::size_t i = data.size(); i < a.size(); ++i) {
            const window_sample &s = a.samples[i];
            bool found = false;
            for (const window_sample &src : data.samples) {
                if (src.label != s.label) {
                    continue;
                }
                for (const window_sample &nn : data.samples) {
                    if (nn.label == s.label && &nn != &src && on_segment(s.features, src.features, nn.features)) {
                        found = true;
                        break;
                    }
                }
                if (found) {
                    break;
                }
            }
            if (!found) {
                return fmt::format("case {}: synthetic sample {} is on no same-class segment", trial, i);
            }
        }
    }
    return std::nullopt;
}

//------------------------------------------------------------------------------------------------
// softmax / LSTM forward
//------------------------------------------------------------------------------------------------

/// Softmax normalization and inference determinism over random small networks and inputs.
inline counterexample check_softmax_properties(const std::uint64_t seed, const std::size_t cases) {
    std::mt19937_64 rng{ seed };
    using bloomcast::detail::uniform_index;
    for (std::size_t trial = 0; trial < cases; ++trial) {
        lstm::lstm_hyper hyper;
        hyper.num_layers = 1 + uniform_index(rng, 2);
        hyper.input_size = 1 + uniform_index(rng, 3);
        hyper.hidden_size = 1 + uniform_index(rng, 6);
        hyper.n_classes = 2 + uniform_index(rng, 10);
        hyper.dropout = 0.5;
        hyper.seed = rng();
        lstm::lstm_params params = lstm::init_params(hyper);
        const double scale = 1.0 + 5.0 * bloomcast::detail::uniform01(rng);
        params.for_each([&](auto &m) { m *= scale; });
        const auto steps = static_cast<Eigen::Index>(1 + uniform_index(rng, 12));
        lstm::MatrixXd seq(steps, static_cast<Eigen::Index>(hyper.input_size));
        for (Eigen::Index i = 0; i < seq.size(); ++i) {
            seq.data()[i] = 10.0 * bloomcast::detail::standard_normal(rng);
        }
        const auto train = lstm::forward(seq, params, hyper, true, rng());
        const auto infer1 = lstm::forward(seq, params, hyper, false, 1);
        const auto infer2 = lstm::forward(seq, params, hyper, false, 2);
        for (const auto *probs : { &train.probs, &infer1.probs }) {
            if (std::abs(probs->sum() - 1.0) > 1e-9 || probs->minCoeff() < 0.0) {
                return fmt::format("case {}: probabilities sum to {}", trial, probs->sum());
            }
        }
        if (infer1.probs != infer2.probs) {
            return fmt::format("case {}: inference is not deterministic", trial);
        }
        // softmax of arbitrary logits
        lstm::VectorXd logits(static_cast<Eigen::Index>(hyper.n_classes));
        for (Eigen::Index i = 0; i < logits.size(); ++i) {
            logits(i) = 300.0 * bloomcast::detail::standard_normal(rng);
        }
        const lstm::VectorXd p = lstm::softmax(logits);
        if (!p.allFinite() || std::abs(p.sum() - 1.0) > 1e-9) {
            return fmt::format("case {}: softmax of large logits sums to {}", trial, p.sum());
        }
    }
    return std::nullopt;
}

//------------------------------------------------------------------------------------------------
// metrics
//------------------------------------------------------------------------------------------------

/// accuracy = trace / total, macro F1 between per-class extremes, permutation invariance, PR-curve invariants.
inline counterexample check_metrics_properties(const std::uint64_t seed, const std::size_t cases) {
    std::mt19937_64 rng{ seed };
    using bloomcast::detail::uniform_index;
    for (std::size_t trial = 0; trial < cases; ++trial) {
        const std::size_t n_classes = 2 + uniform_index(rng, 10);
        const std::size_t n = 1 + uniform_index(rng, 60);
        std::vector<int> truth(n);
        std::vector<int> pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(uniform_index(rng, n_classes));
            pred[i] = uniform_index(rng, 3) == 0 ? truth[i] : static_cast<int>(uniform_index(rng, n_classes));
        }
        const metrics::confusion_matrix cm = metrics::confusion(truth, pred, n_classes);
        if (cm.total() != n) {
            return fmt::format("case {}: confusion total {} != {}", trial, cm.total(), n);
        }
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            correct += truth[i] == pred[i] ? 1 : 0;
        }
        if (cm.accuracy() != static_cast<double>(correct) / static_cast<double>(n)) {
            return fmt::format("case {}: accuracy {} != trace/total", trial, cm.accuracy());
        }
        const metrics::prf_summary prf = metrics::macro_prf(cm);
        double lo = 1.0;
        double hi = 0.0;
        for (const metrics::class_scores &s : prf.per_class) {
            if (s.counted) {
                lo = std::min(lo, s.f1);
                hi = std::max(hi, s.f1);
            }
            if (std::abs(s.f1 - metrics::harmonic_mean(s.precision, s.recall)) > 1e-15) {
                return fmt::format("case {}: per-class F1 is not the harmonic mean", trial);
            }
        }
        if (prf.f1 < lo - 1e-12 || prf.f1 > hi + 1e-12) {
            return fmt::format("case {}: macro F1 {} outside [{}, {}]", trial, prf.f1, lo, hi);
        }

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{ 0 });
        bloomcast::detail::shuffle(perm, rng);
        std::vector<int> truth_p(n);
        std::vector<int> pred_p(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth_p[i] = truth[perm[i]];
            pred_p[i] = pred[perm[i]];
        }
        const metrics::confusion_matrix cm_p = metrics::confusion(truth_p, pred_p, n_classes);
        const metrics::prf_summary prf_p = metrics::macro_prf(cm_p);
        if (!(cm_p == cm) || prf_p.precision != prf.precision || prf_p.recall != prf.recall || prf_p.f1 != prf.f1) {
            return fmt::format("case {}: metrics changed under permutation", trial);
        }

        // PR curve on coarse scores with ties
        std::vector<double> scores(n);
        std::unique_ptr<bool[]> positive = std::make_unique<bool[]>(n);
        std::unique_ptr<bool[]> positive_p = std::make_unique<bool[]>(n);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(uniform_index(rng, 6)) / 5.0;
            positive[i] = uniform_index(rng, 2) == 0;
            any = any || positive[i];
        }
        if (!any) {
            positive[0] = true;
        }
        const metrics::pr_curve curve = metrics::compute_pr_curve(scores, std::span<const bool>{ positive.get(), n });
        double prev = 0.0;
        double area = 0.0;
        for (const metrics::pr_point &pt : curve.points) {
            if (pt.recall < prev) {
                return fmt::format("case {}: recall decreases along the PR curve", trial);
            }
            area += (pt.recall - prev) * pt.precision;
            prev = pt.recall;
        }
        if (std::abs(area - curve.auc) > 1e-12 || curve.auc < 0.0 || curve.auc > 1.0 + 1e-12 || std::abs(curve.points.back().recall - 1.0) > 1e-12) {
            return fmt::format("case {}: PR AUC {} inconsistent with its points", trial, curve.auc);
        }
        const double top = *std::max_element(scores.begin(), scores.end());
        bool top_all_positive = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (scores[i] == top && !positive[i]) {
                top_all_positive = false;
            }
        }
        if ((curve.points.front().precision == 1.0) != top_all_positive) {
            return fmt::format("case {}: precision at the top threshold is {}, but top-scored samples all positive = {}", trial, curve.points.front().precision, top_all_positive);
        }
        std::vector<double> scores_p(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores_p[i] = scores[perm[i]];
            positive_p[i] = positive[perm[i]];
        }
        const metrics::pr_curve curve_p = metrics::compute_pr_curve(scores_p, std::span<const bool>{ positive_p.get(), n });
        if (curve_p.auc != curve.auc || curve_p.points.size() != curve.points.size()) {
            return fmt::format("case {}: PR curve changed under permutation", trial);
        }
    }
    return std::nullopt;
}

}  // namespace bloomcast::test

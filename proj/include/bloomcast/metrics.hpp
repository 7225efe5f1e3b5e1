/**
 * @file
 * @brief Evaluation metrics: confusion matrix, macro precision/recall/F1, and per-class PR curves.
 */

#pragma once

#include "bloomcast/exceptions.hpp"  // bloomcast::invalid_argument_exception

#include "fmt/format.h"  // fmt::format

#include <algorithm>  // std::sort
#include <cstddef>    // std::size_t
#include <numeric>    // std::iota
#include <memory>     // std::unique_ptr, std::make_unique
#include <optional>   // std::optional
#include <span>       // std::span
#include <vector>     // std::vector

namespace bloomcast::metrics {

/**
 * @brief Counts indexed [true class][predicted class].
 */
class confusion_matrix {
  public:
    confusion_matrix() = default;

    explicit confusion_matrix(const std::size_t n_classes) :
        n_{ n_classes },
        counts_(n_classes * n_classes, 0) { }

    [[nodiscard]] std::size_t num_classes() const noexcept { return n_; }

    [[nodiscard]] std::size_t operator()(const std::size_t truth, const std::size_t predicted) const { return counts_[truth * n_ + predicted]; }

    void add(const std::size_t truth, const std::size_t predicted) { ++counts_[truth * n_ + predicted]; }

    [[nodiscard]] std::size_t total() const noexcept { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{ 0 }); }

    [[nodiscard]] std::size_t trace() const noexcept {
        std::size_t sum = 0;
        for (std::size_t c = 0; c < n_; ++c) {
            sum += counts_[c * n_ + c];
        }
        return sum;
    }

    [[nodiscard]] std::size_t row_sum(const std::size_t truth) const {
        std::size_t sum = 0;
        for (std::size_t p = 0; p < n_; ++p) {
            sum += (*this)(truth, p);
        }
        return sum;
    }

    [[nodiscard]] std::size_t column_sum(const std::size_t predicted) const {
        std::size_t sum = 0;
        for (std::size_t t = 0; t < n_; ++t) {
            sum += (*this)(t, predicted);
        }
        return sum;
    }

    /// Accuracy as a fraction in [0, 1]; 0 for an empty matrix.
    [[nodiscard]] double accuracy() const noexcept {
        const std::size_t n = total();
        return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
    }

    friend bool operator==(const confusion_matrix &, const confusion_matrix &) = default;

  private:
    std::size_t n_{ 0 };
    std::vector<std::size_t> counts_{};
};

/**
 * @brief Tally predictions against the truth.
 * @throws bloomcast::invalid_argument_exception on a length mismatch or a label outside [0, n_classes)
 */
[[nodiscard]] inline confusion_matrix confusion(const std::span<const int> y_true, const std::span<const int> y_pred, const std::size_t n_classes) {
    if (y_true.size() != y_pred.size()) {
        throw invalid_argument_exception{ fmt::format("{} true labels but {} predictions", y_true.size(), y_pred.size()) };
    }
    confusion_matrix cm{ n_classes };
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes) {
            throw invalid_argument_exception{ fmt::format("label pair ({}, {}) at position {} is outside [0, {})", t, p, i, n_classes) };
        }
        cm.add(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

struct class_scores {
    double precision{};
    double recall{};
    double f1{};
    /// Number of true samples of the class.
    std::size_t support{};
    /// Number of samples predicted as the class.
    std::size_t predicted{};
    /// Whether the class enters the macro averages (it occurs in the truth or the predictions).
    bool counted{};
};

struct prf_summary {
    double precision{};
    double recall{};
    double f1{};
    std::vector<class_scores> per_class{};
};

[[nodiscard]] inline double harmonic_mean(const double p, const double r) noexcept {
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

/**
 * @brief Per-class and macro-averaged precision, recall and F1.
 *
 * A ratio with a zero denominator is 0. Classes absent from both truth and predictions are left out of the
 * macro averages.
 */
[[nodiscard]] inline prf_summary macro_prf(const confusion_matrix &cm) {
    if (cm.num_classes() == 0) {
        throw invalid_argument_exception{ "can't score an empty confusion matrix" };
    }
    prf_summary summary;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < cm.num_classes(); ++c) {
        class_scores s;
        s.support = cm.row_sum(c);
        s.predicted = cm.column_sum(c);
        const auto hits = static_cast<double>(cm(c, c));
        s.precision = s.predicted > 0 ? hits / static_cast<double>(s.predicted) : 0.0;
        s.recall = s.support > 0 ? hits / static_cast<double>(s.support) : 0.0;
        s.f1 = harmonic_mean(s.precision, s.recall);
        s.counted = s.support > 0 || s.predicted > 0;
        if (s.counted) {
            summary.precision += s.precision;
            summary.recall += s.recall;
            summary.f1 += s.f1;
            ++counted;
        }
        summary.per_class.push_back(s);
    }
    if (counted > 0) {
        summary.precision /= static_cast<double>(counted);
        summary.recall /= static_cast<double>(counted);
        summary.f1 /= static_cast<double>(counted);
    }
    return summary;
}

struct pr_point {
    double threshold{};
    double recall{};
    double precision{};
};

struct pr_curve {
    /// One point per distinct score, by descending threshold.
    std::vector<pr_point> points{};
    /// Step-interpolated area: sum_i (R_i - R_{i-1}) P_i with R_0 = 0.
    double auc{};
};

/**
 * @brief Precision-recall curve of one class from per-sample scores.
 *
 * At threshold t a sample counts as predicted positive if its score is >= t.
 * @throws bloomcast::invalid_argument_exception on a length mismatch or without any positive sample
 */
[[nodiscard]] inline pr_curve compute_pr_curve(const std::span<const double> scores, const std::span<const bool> is_positive) {
    if (scores.size() != is_positive.size()) {
        throw invalid_argument_exception{ fmt::format("{} scores but {} labels", scores.size(), is_positive.size()) };
    }
    const auto positives = static_cast<std::size_t>(std::count(is_positive.begin(), is_positive.end(), true));
    if (positives == 0) {
        throw invalid_argument_exception{ "a PR curve needs at least one positive sample" };
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{ 0 });
    std::stable_sort(order.begin(), order.end(), [&](const std::size_t a, const std::size_t b) { return scores[a] > scores[b]; });

    pr_curve curve;
    std::size_t tp = 0;
    std::size_t predicted = 0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            tp += is_positive[order[i]] ? 1 : 0;
            ++predicted;
            ++i;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(positives);
        const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
        curve.auc += (recall - prev_recall) * precision;
        prev_recall = recall;
        curve.points.push_back({ threshold, recall, precision });
    }
    return curve;
}

/**
 * @brief Everything reported for one evaluation.
 */
struct eval_report {
    /// Percent.
    double accuracy{};
    double precision{};
    double recall{};
    double f1{};
    std::vector<class_scores> per_class{};
    confusion_matrix confusion{};
    /// Indexed by class; std::nullopt where no curve exists (no positives, or no scores).
    std::vector<std::optional<pr_curve>> pr_curves{};
};

/**
 * @brief Build a report from labels, predictions and (optionally) per-class scores.
 *
 * @p scores, if non-empty, holds one row of n_classes values per sample.
 */
[[nodiscard]] inline eval_report evaluate(const std::span<const int> y_true, const std::span<const int> y_pred, const std::size_t n_classes, const std::vector<std::vector<double>> &scores = {}) {
    eval_report report;
    report.confusion = confusion(y_true, y_pred, n_classes);
    report.accuracy = 100.0 * report.confusion.accuracy();
    prf_summary prf = macro_prf(report.confusion);
    report.precision = prf.precision;
    report.recall = prf.recall;
    report.f1 = prf.f1;
    report.per_class = std::move(prf.per_class);
    report.pr_curves.resize(n_classes);
    if (scores.empty()) {
        return report;
    }
    if (scores.size() != y_true.size()) {
        throw invalid_argument_exception{ fmt::format("{} score rows for {} samples", scores.size(), y_true.size()) };
    }
    std::vector<double> class_score(y_true.size());
    std::unique_ptr<bool[]> positive = std::make_unique<bool[]>(y_true.size());
    for (std::size_t c = 0; c < n_classes; ++c) {
        bool any = false;
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            if (scores[i].size() != n_classes) {
                throw invalid_argument_exception{ fmt::format("score row {} has {} entries, expected {}", i, scores[i].size(), n_classes) };
            }
            class_score[i] = scores[i][c];
            positive[i] = static_cast<std::size_t>(y_true[i]) == c;
            any = any || positive[i];
        }
        if (any) {
            report.pr_curves[c] = compute_pr_curve(class_score, std::span<const bool>{ positive.get(), y_true.size() });
        }
    }
    return report;
}

}  // namespace bloomcast::metrics

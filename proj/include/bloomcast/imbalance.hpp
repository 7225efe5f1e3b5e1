/**
 * @file
 * @brief Class imbalance correction: proportional penalty weights and SMOTE oversampling.
 */

#pragma once

#include "bloomcast/detail/random.hpp"  // bloomcast::detail::uniform01_closed, bloomcast::detail::uniform_index
#include "bloomcast/exceptions.hpp"     // bloomcast::invalid_argument_exception
#include "bloomcast/phenology_data.hpp" // bloomcast::dataset, bloomcast::window_sample

#include "fmt/format.h"  // fmt::format

#include <algorithm>  // std::max, std::min, std::sort
#include <cstddef>    // std::size_t
#include <cstdint>    // std::uint64_t
#include <map>        // std::map
#include <numeric>    // std::iota
#include <random>     // std::mt19937_64
#include <vector>     // std::vector

namespace bloomcast {

/// Penalty multiplier w_j per class.
using class_weights = std::map<int, double>;

/**
 * @brief Weights inversely proportional to the class frequencies: w_j = n / (k * n_j).
 *
 * Here n is the total number of samples and k the number of classes present in @p class_counts.
 * @throws bloomcast::invalid_argument_exception if a class has a count of zero or no class is given
 */
[[nodiscard]] inline class_weights compute_class_weights(const std::map<int, std::size_t> &class_counts) {
    if (class_counts.empty()) {
        throw invalid_argument_exception{ "can't compute class weights without any class" };
    }
    std::size_t total = 0;
    for (const auto &[label, count] : class_counts) {
        if (count == 0) {
            throw invalid_argument_exception{ fmt::format("class {} has no samples; its weight is undefined", label) };
        }
        total += count;
    }
    const double num_classes = static_cast<double>(class_counts.size());
    class_weights weights;
    for (const auto &[label, count] : class_counts) {
        weights[label] = static_cast<double>(total) / (num_classes * static_cast<double>(count));
    }
    return weights;
}

namespace detail {

[[nodiscard]] inline double squared_distance(const std::vector<double> &a, const std::vector<double> &b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

/// The (up to) n_neighbors nearest other members for every member; ties broken by position.
[[nodiscard]] inline std::vector<std::vector<std::size_t>> nearest_neighbors(const std::vector<const std::vector<double> *> &points, const std::size_t n_neighbors) {
    const std::size_t n = points.size();
    const std::size_t count = std::min(n_neighbors, n - 1);
    std::vector<std::vector<std::size_t>> neighbors(n);
    std::vector<std::size_t> order(n - 1);
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            dist[j] = squared_distance(*points[i], *points[j]);
        }
        std::size_t pos = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                order[pos++] = j;
            }
        }
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), [&](const std::size_t a, const std::size_t b) {
            return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
        });
        neighbors[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    }
    return neighbors;
}

}  // namespace detail

/**
 * @brief Raise every class to the size of the largest one by SMOTE interpolation.
 *
 * Each synthetic point is x + u * (x_nn - x) with x a member of the class (taken round-robin), x_nn one
 * of its @p n_neighbors nearest Euclidean neighbors within the class (chosen uniformly), and u uniform in [0, 1].
 * Original samples keep their order; synthetics are appended class by class. Synthetic samples carry the
 * year and anchor of their source point.
 *
 * @throws bloomcast::invalid_argument_exception if @p n_neighbors is zero or a class needing synthetics has a single sample
 */
[[nodiscard]] inline dataset smote_oversample(const dataset &data, const std::uint64_t rng_seed, const std::size_t n_neighbors = 5) {
    if (n_neighbors == 0) {
        throw invalid_argument_exception{ "SMOTE needs at least one neighbor" };
    }
    dataset out = data;
    if (data.samples.empty()) {
        return out;
    }
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        members[data.samples[i].label].push_back(i);
    }
    std::size_t target = 0;
    for (const auto &[label, idx] : members) {
        target = std::max(target, idx.size());
    }

    for (const auto &[label, idx] : members) {
        if (idx.size() == target) {
            continue;
        }
        if (idx.size() < 2) {
            throw invalid_argument_exception{ fmt::format("SMOTE needs at least two samples of class {}, but it has {}", label, idx.size()) };
        }
        std::vector<const std::vector<double> *> points;
        points.reserve(idx.size());
        for (const std::size_t i : idx) {
            points.push_back(&data.samples[i].features);
        }
        const std::vector<std::vector<std::size_t>> neighbors = detail::nearest_neighbors(points, n_neighbors);

        std::mt19937_64 rng{ detail::derive_seed(rng_seed, static_cast<std::uint64_t>(label)) };
        const std::size_t needed = target - idx.size();
        for (std::size_t s = 0; s < needed; ++s) {
            const std::size_t source = s % idx.size();
            const std::vector<std::size_t> &nn = neighbors[source];
            const std::size_t neighbor = nn[detail::uniform_index(rng, nn.size())];
            const double u = detail::uniform01_closed(rng);
            const window_sample &base = data.samples[idx[source]];
            const std::vector<double> &other = *points[neighbor];
            window_sample synthetic{ base.features, label, base.year, base.anchor_doy };
            for (std::size_t f = 0; f < synthetic.features.size(); ++f) {
                synthetic.features[f] += u * (other[f] - synthetic.features[f]);
            }
            out.samples.push_back(std::move(synthetic));
        }
    }
    out.recount();
    return out;
}

}  // namespace bloomcast

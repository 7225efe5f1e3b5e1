/**
 * @file
 * @brief Gaussian radial basis function kernel.
 */

#pragma once

#include "bloomcast/exceptions.hpp"  // bloomcast::invalid_argument_exception

#include "fmt/format.h"  // fmt::format

#include <cmath>    // std::exp, std::isfinite
#include <cstddef>  // std::size_t
#include <span>     // std::span

namespace bloomcast::svm {

/**
 * @brief Parameter of the kernel k(x, x') = exp(-gamma * ||x - x'||^2).
 */
struct kernel_spec {
    double gamma{ 1.0 };

    void validate() const {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) {
            throw invalid_argument_exception{ fmt::format("the RBF parameter gamma must be positive and finite, but is {}", gamma) };
        }
    }

    friend bool operator==(const kernel_spec &, const kernel_spec &) = default;
};

[[nodiscard]] inline double squared_euclidean_distance(const std::span<const double> x, const std::span<const double> y) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sum += d * d;
    }
    return sum;
}

/**
 * @brief Evaluate the RBF kernel; the result lies in (0, 1].
 * @throws bloomcast::invalid_argument_exception if the vectors differ in length
 */
[[nodiscard]] inline double rbf_kernel(const std::span<const double> x, const std::span<const double> y, const kernel_spec &spec) {
    if (x.size() != y.size()) {
        throw invalid_argument_exception{ fmt::format("kernel arguments differ in length ({} != {})", x.size(), y.size()) };
    }
    return std::exp(-spec.gamma * squared_euclidean_distance(x, y));
}

}  // namespace bloomcast::svm

/**
 * @file
 * @brief Soft-margin binary SVM dual solved by sequential minimal optimization.
 *
 * Solves
 *     max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
 *     s.t.   0 <= a_i <= C_i,  sum_i a_i y_i = 0
 * with C_i = C+ for positive and C- for negative samples. Pairs are picked by the second order working set
 * selection of Fan, Chen and Lin (2005); kernel rows are kept in an LRU cache.
 */

#pragma once

#include "bloomcast/exceptions.hpp"  // bloomcast::convergence_exception, bloomcast::invalid_argument_exception
#include "bloomcast/svm/kernel.hpp"  // bloomcast::svm::kernel_spec, bloomcast::svm::rbf_kernel

#include "fmt/format.h"  // fmt::format

#include <algorithm>  // std::max, std::min
#include <cmath>      // std::isfinite
#include <cstddef>    // std::size_t
#include <limits>     // std::numeric_limits
#include <list>       // std::list
#include <span>       // std::span
#include <vector>     // std::vector

namespace bloomcast::svm {

/// A two-class training problem with labels +1 / -1.
struct binary_problem {
    std::vector<std::vector<double>> inputs{};
    std::vector<int> labels{};
    double c_pos{ 1.0 };
    double c_neg{ 1.0 };

    [[nodiscard]] double upper_bound(const std::size_t i) const noexcept { return labels[i] > 0 ? c_pos : c_neg; }
};

struct dual_solution {
    std::vector<double> alphas{};
    double bias{};
    /// Indices with a positive multiplier.
    std::vector<std::size_t> support_indices{};
    /// Dual objective value at the solution.
    double objective{};
    std::size_t iterations{};
};

struct solver_options {
    /// Stopping tolerance on the maximal KKT violation.
    double tol{ 1e-3 };
    /// Iteration budget in units of the problem size.
    std::size_t max_passes{ 1000 };
    /// Memory budget for cached kernel rows.
    std::size_t cache_bytes{ std::size_t{ 256 } << 20U };
};

namespace detail {

/**
 * @brief Rows of Q_ij = y_i y_j K(x_i, x_j), computed on demand and cached least-recently-used first.
 */
class q_row_cache {
  public:
    q_row_cache(const binary_problem &problem, const kernel_spec &kernel, const std::size_t cache_bytes) :
        problem_{ problem },
        kernel_{ kernel },
        slots_(problem.inputs.size()),
        position_(problem.inputs.size()) {
        const std::size_t row_bytes = std::max<std::size_t>(problem.inputs.size() * sizeof(double), 1);
        capacity_ = std::max<std::size_t>(cache_bytes / row_bytes, 2);
    }

    [[nodiscard]] std::span<const double> row(const std::size_t i) {
        if (!slots_[i].empty()) {
            lru_.splice(lru_.end(), lru_, position_[i]);
            return slots_[i];
        }
        if (lru_.size() >= capacity_) {
            const std::size_t evict = lru_.front();
            lru_.pop_front();
            slots_[i] = std::move(slots_[evict]);
            slots_[evict].clear();
        }
        const std::size_t l = problem_.inputs.size();
        slots_[i].resize(l);
        for (std::size_t j = 0; j < l; ++j) {
            slots_[i][j] = static_cast<double>(problem_.labels[i] * problem_.labels[j]) * rbf_kernel(problem_.inputs[i], problem_.inputs[j], kernel_);
        }
        position_[i] = lru_.insert(lru_.end(), i);
        return slots_[i];
    }

  private:
    const binary_problem &problem_;
    kernel_spec kernel_;
    std::size_t capacity_{};
    std::vector<std::vector<double>> slots_;
    std::vector<std::list<std::size_t>::iterator> position_;
    std::list<std::size_t> lru_{};
};

/// y_i f(x_i) - 1 expressed through the gradient G_i = (Q a)_i - 1.
[[nodiscard]] inline double margin_residual(const double gradient, const int label, const double bias) noexcept {
    return gradient + static_cast<double>(label) * bias;
}

}  // namespace detail

/**
 * @brief Number of multipliers violating the KKT conditions at tolerance @p tol.
 *
 * @p gradient holds G_i = y_i sum_j a_j y_j K_ij - 1, so that y_i f(x_i) - 1 = G_i + y_i b.
 */
[[nodiscard]] inline std::size_t count_kkt_violations(const binary_problem &problem, const std::vector<double> &alphas, const std::vector<double> &gradient, const double bias, const double tol) {
    std::size_t violations = 0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double r = detail::margin_residual(gradient[i], problem.labels[i], bias);
        const double c = problem.upper_bound(i);
        if (alphas[i] <= 0.0) {
            violations += r < -tol ? 1 : 0;
        } else if (alphas[i] >= c) {
            violations += r > tol ? 1 : 0;
        } else {
            violations += (r < -tol || r > tol) ? 1 : 0;
        }
    }
    return violations;
}

/**
 * @brief Gradient G_i = y_i sum_j a_j y_j K(x_i, x_j) - 1 of the (minimization form of the) dual.
 */
[[nodiscard]] inline std::vector<double> dual_gradient(const binary_problem &problem, const kernel_spec &kernel, const std::vector<double> &alphas) {
    const std::size_t l = problem.inputs.size();
    std::vector<double> gradient(l, -1.0);
    for (std::size_t j = 0; j < l; ++j) {
        if (alphas[j] == 0.0) {
            continue;
        }
        for (std::size_t i = 0; i < l; ++i) {
            gradient[i] += alphas[j] * static_cast<double>(problem.labels[i] * problem.labels[j]) * rbf_kernel(problem.inputs[i], problem.inputs[j], kernel);
        }
    }
    return gradient;
}

/**
 * @brief Solve the dual of a binary soft-margin SVM.
 *
 * On return every multiplier satisfies the KKT conditions within @p options.tol and sum_i a_i y_i = 0 holds
 * up to rounding.
 *
 * @throws bloomcast::invalid_argument_exception for inconsistent input, a non-positive tolerance, a non-positive box, or a missing class
 * @throws bloomcast::convergence_exception if the iteration budget runs out
 */
[[nodiscard]] inline dual_solution solve_binary(const binary_problem &problem, const kernel_spec &kernel, const solver_options &options = {}) {
    kernel.validate();
    const std::size_t l = problem.inputs.size();
    if (problem.labels.size() != l) {
        throw invalid_argument_exception{ fmt::format("{} inputs but {} labels", l, problem.labels.size()) };
    }
    if (!(options.tol > 0.0)) {
        throw invalid_argument_exception{ fmt::format("the solver tolerance must be positive, but is {}", options.tol) };
    }
    if (!(problem.c_pos > 0.0) || !(problem.c_neg > 0.0)) {
        throw invalid_argument_exception{ fmt::format("degenerate box constraints: C+ = {}, C- = {}", problem.c_pos, problem.c_neg) };
    }
    bool has_pos = false;
    bool has_neg = false;
    for (std::size_t i = 0; i < l; ++i) {
        if (problem.labels[i] != 1 && problem.labels[i] != -1) {
            throw invalid_argument_exception{ fmt::format("binary labels must be +1 or -1, but label {} is {}", i, problem.labels[i]) };
        }
        if (problem.inputs[i].size() != problem.inputs.front().size()) {
            throw invalid_argument_exception{ fmt::format("input {} has {} features, expected {}", i, problem.inputs[i].size(), problem.inputs.front().size()) };
        }
        has_pos = has_pos || problem.labels[i] == 1;
        has_neg = has_neg || problem.labels[i] == -1;
    }
    if (!has_pos || !has_neg) {
        throw invalid_argument_exception{ "a binary problem needs samples of both classes" };
    }

    constexpr double tau = 1e-12;
    const auto y = [&](const std::size_t i) { return static_cast<double>(problem.labels[i]); };

    std::vector<double> alpha(l, 0.0);
    std::vector<double> grad(l, -1.0);
    // K(x, x) = 1 for the RBF kernel, so the diagonal of Q is all ones
    constexpr double q_diag = 1.0;
    detail::q_row_cache cache{ problem, kernel, options.cache_bytes };

    const auto is_upper = [&](const std::size_t i) { return alpha[i] >= problem.upper_bound(i); };
    const auto is_lower = [&](const std::size_t i) { return alpha[i] <= 0.0; };

    const std::size_t max_iter = std::max<std::size_t>(options.max_passes, 1) * std::max<std::size_t>(l, 100);
    std::size_t iter = 0;
    bool converged = false;
    while (iter < max_iter) {
        // pick i maximizing -y_i G_i over I_up
        double g_max = -std::numeric_limits<double>::infinity();
        std::size_t i_sel = l;
        for (std::size_t t = 0; t < l; ++t) {
            const bool in_up = problem.labels[t] == 1 ? !is_upper(t) : !is_lower(t);
            if (in_up && -y(t) * grad[t] >= g_max) {
                g_max = -y(t) * grad[t];
                i_sel = t;
            }
        }
        // pick j over I_low by the second order gain
        double g_max2 = -std::numeric_limits<double>::infinity();
        std::size_t j_sel = l;
        double obj_diff_min = std::numeric_limits<double>::infinity();
        std::span<const double> q_i{};
        if (i_sel != l) {
            q_i = cache.row(i_sel);
        }
        for (std::size_t t = 0; t < l; ++t) {
            const bool in_low = problem.labels[t] == 1 ? !is_lower(t) : !is_upper(t);
            if (!in_low) {
                continue;
            }
            const double v = y(t) * grad[t];
            g_max2 = std::max(g_max2, v);
            if (i_sel == l) {
                continue;
            }
            const double grad_diff = g_max + v;
            if (grad_diff > 0.0) {
                // ||phi(x_i) - phi(x_t)||^2 = K_ii + K_tt - 2 K_it
                double quad = q_diag + q_diag - 2.0 * y(i_sel) * y(t) * q_i[t];
                if (quad <= 0.0) {
                    quad = tau;
                }
                const double obj_diff = -(grad_diff * grad_diff) / quad;
                if (obj_diff <= obj_diff_min) {
                    obj_diff_min = obj_diff;
                    j_sel = t;
                }
            }
        }
        if (g_max + g_max2 < options.tol || i_sel == l || j_sel == l) {
            converged = true;
            break;
        }
        ++iter;

        const std::size_t i = i_sel;
        const std::size_t j = j_sel;
        const std::span<const double> q_j = cache.row(j);
        q_i = cache.row(i);
        const double c_i = problem.upper_bound(i);
        const double c_j = problem.upper_bound(j);
        const double old_alpha_i = alpha[i];
        const double old_alpha_j = alpha[j];

        if (problem.labels[i] != problem.labels[j]) {
            double quad = q_diag + q_diag + 2.0 * q_i[j];
            if (quad <= 0.0) {
                quad = tau;
            }
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > c_i - c_j) {
                if (alpha[i] > c_i) {
                    alpha[i] = c_i;
                    alpha[j] = c_i - diff;
                }
            } else if (alpha[j] > c_j) {
                alpha[j] = c_j;
                alpha[i] = c_j + diff;
            }
        } else {
            double quad = q_diag + q_diag - 2.0 * q_i[j];
            if (quad <= 0.0) {
                quad = tau;
            }
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c_i) {
                if (alpha[i] > c_i) {
                    alpha[i] = c_i;
                    alpha[j] = sum - c_i;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c_j) {
                if (alpha[j] > c_j) {
                    alpha[j] = c_j;
                    alpha[i] = sum - c_j;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        const double delta_i = alpha[i] - old_alpha_i;
        const double delta_j = alpha[j] - old_alpha_j;
        for (std::size_t t = 0; t < l; ++t) {
            grad[t] += q_i[t] * delta_i + q_j[t] * delta_j;
        }
    }

    // bias from the free multipliers, or the middle of the feasible interval if there are none
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < l; ++t) {
        const double yg = y(t) * grad[t];
        if (is_upper(t)) {
            if (problem.labels[t] == -1) {
                upper = std::min(upper, yg);
            } else {
                lower = std::max(lower, yg);
            }
        } else if (is_lower(t)) {
            if (problem.labels[t] == 1) {
                upper = std::min(upper, yg);
            } else {
                lower = std::max(lower, yg);
            }
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (upper + lower) / 2.0;

    dual_solution solution;
    solution.bias = -rho;
    solution.iterations = iter;
    double objective = 0.0;
    for (std::size_t t = 0; t < l; ++t) {
        objective += alpha[t] * (1.0 - grad[t]);
    }
    solution.objective = objective / 2.0;

    if (!converged) {
        const std::size_t violations = count_kkt_violations(problem, alpha, grad, solution.bias, options.tol);
        throw convergence_exception{ fmt::format("SMO did not converge within {} iterations (dual objective {}, {} KKT violations)", max_iter, solution.objective, violations),
                                     solution.objective,
                                     violations };
    }

    for (std::size_t t = 0; t < l; ++t) {
        if (alpha[t] > 0.0) {
            solution.support_indices.push_back(t);
        }
    }
    solution.alphas = std::move(alpha);
    return solution;
}

/**
 * @brief Decision value f(x) = sum_i a_i y_i K(x_i, x) + b; its sign is the binary prediction.
 */
[[nodiscard]] inline double decision_value(const dual_solution &solution, const std::vector<std::vector<double>> &inputs, const std::vector<int> &labels, const kernel_spec &kernel, const std::span<const double> x) {
    double value = solution.bias;
    for (const std::size_t i : solution.support_indices) {
        value += solution.alphas[i] * static_cast<double>(labels[i]) * rbf_kernel(inputs[i], x, kernel);
    }
    return value;
}

}  // namespace bloomcast::svm

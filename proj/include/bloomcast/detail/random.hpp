/**
 * @file
 * @brief Portable deterministic random helpers.
 *
 * The standard distributions are implementation-defined, so every random draw that influences
 * a persisted result goes through these helpers on top of std::mt19937_64.
 */

#pragma once

#include <cstddef>  // std::size_t
#include <cstdint>  // std::uint64_t
#include <cmath>    // std::sqrt, std::log, std::cos
#include <random>   // std::mt19937_64
#include <utility>  // std::swap
#include <vector>   // std::vector

namespace bloomcast::detail {

/// SplitMix64 finalizer, used to derive independent seeds from (seed, stream) pairs.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

[[nodiscard]] constexpr std::uint64_t derive_seed(const std::uint64_t seed, const std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(seed) ^ stream);
}

/// Uniform double in [0, 1) with 53 random bits.
[[nodiscard]] inline double uniform01(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11U) * 0x1.0p-53;
}

/// Uniform double in [0, 1], both end points attainable.
[[nodiscard]] inline double uniform01_closed(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11U) / static_cast<double>((std::uint64_t{ 1 } << 53U) - 1);
}

/// Uniform index in [0, n) by rejection sampling; n must be positive.
[[nodiscard]] inline std::size_t uniform_index(std::mt19937_64 &rng, const std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t draw{};
    do {
        draw = rng();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % bound);
}

/// Standard normal variate (Box-Muller, one value per call).
[[nodiscard]] inline double standard_normal(std::mt19937_64 &rng) {
    constexpr double two_pi = 6.283185307179586476925;
    double u1 = uniform01(rng);
    while (u1 <= 0.0) {
        u1 = uniform01(rng);
    }
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Fisher-Yates shuffle using uniform_index.
template <typename T>
void shuffle(std::vector<T> &values, std::mt19937_64 &rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::swap(values[i - 1], values[uniform_index(rng, i)]);
    }
}

}  // namespace bloomcast::detail

/**
 * @file
 * @brief Stable 64-bit FNV-1a hash used to fingerprint run configurations.
 */

#pragma once

#include <cstdint>      // std::uint64_t
#include <string>       // std::string
#include <string_view>  // std::string_view

#include "fmt/format.h"  // fmt::format

namespace bloomcast::detail {

[[nodiscard]] constexpr std::uint64_t fnv1a_64(const std::string_view data) noexcept {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const char c : data) {
        hash ^= static_cast<std::uint8_t>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

[[nodiscard]] inline std::string fnv1a_64_hex(const std::string_view data) {
    return fmt::format("{:016x}", fnv1a_64(data));
}

}  // namespace bloomcast::detail

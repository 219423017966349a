#pragma once

#include <bit>
#include <cstdint>
#include <random>
#include <type_traits>

namespace fifuse {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Folds any number of integer/floating keys into a child seed. Used so that
/// per-feature, per-instance and per-cell streams are independent of the
/// order in which parallel workers pick them up.
template <typename... Keys>
std::uint64_t derive_seed(std::uint64_t seed, Keys... keys) noexcept {
    std::uint64_t h = splitmix64(seed);
    auto mix = [&h](auto key) {
        std::uint64_t bits;
        if constexpr (std::is_floating_point_v<decltype(key)>) {
            bits = std::bit_cast<std::uint64_t>(static_cast<double>(key));
        } else {
            bits = static_cast<std::uint64_t>(key);
        }
        h = splitmix64(h ^ splitmix64(bits + 0x632be59bd9b4e019ULL));
    };
    (mix(keys), ...);
    return h;
}

}  // namespace fifuse

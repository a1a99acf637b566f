#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cnnqoe {

// Stable sub-seed for a named random stream. FNV-1a over the label, mixed with
// the base seed through splitmix64 so distinct labels give independent streams
// and the result is identical across platforms (std::hash is not).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : label) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::string_view label) {
    return std::mt19937_64(derive_seed(base, label));
}

// Uniform double in [0, 1) from the top 53 bits of one engine word.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace cnnqoe

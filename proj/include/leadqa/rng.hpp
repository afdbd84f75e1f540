#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace leadqa {

// Uniform doubles derived directly from mt19937_64 output bits. The standard
// distributions are not pinned across library implementations; fixtures and
// seeded sampling must reproduce bit-identically everywhere, so we take the
// top 53 bits ourselves.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform01(gen);
}

// FNV-1a, used to derive per-item seeds from string keys.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace leadqa

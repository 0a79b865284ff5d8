#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rw {

// All randomness in the project flows through std::mt19937_64, whose output
// sequence is pinned by the standard, plus the explicit conversions below.
// Identical seeds therefore give identical streams on every build.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(seed ^ a * 0x100000001b3ULL) ^ b * 0xc6a4a7935bd1e995ULL);
}

// Uniform in [0, 1), one engine draw.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller, exactly two engine draws.
inline double gaussian(std::mt19937_64& g) {
    const double u1 = (static_cast<double>(g() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(g() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace rw

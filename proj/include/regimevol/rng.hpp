#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace regimevol {

// splitmix64 step; used to derive independent per-window / per-component seeds
// from one master seed so results do not depend on evaluation order.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Deterministic helpers on top of mt19937_64. The std distributions are
// implementation-defined, so anything that feeds a frozen expected value goes
// through these instead.
inline double uniform01(std::mt19937_64& rng) {
    return (rng() >> 11) * 0x1.0p-53;  // 53-bit mantissa in [0,1)
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

// Marsaglia polar method would need state; Box-Muller without caching keeps
// the stream position predictable.
inline double normal01(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace regimevol

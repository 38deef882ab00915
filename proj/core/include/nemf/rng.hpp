#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace nemf {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based seed derivation: the result depends only on the master seed
/// and the tag path, so adding trials or neurons never perturbs earlier ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = splitmix64(master);
    for (auto tag : path) {
        h = splitmix64(h ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
    }
    return h;
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Engine(seq);
}

/// Uniform on the open interval (0, 1) with 53 random bits. Portable, unlike
/// std::uniform_real_distribution whose output is implementation-defined.
inline double uniform01(Engine& eng) noexcept {
    return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential(Engine& eng, double rate) noexcept {
    return -std::log(uniform01(eng)) / rate;
}

inline bool bernoulli(Engine& eng, double p) noexcept {
    return uniform01(eng) < p;
}

/// Standard normal by Box-Muller (one draw per call, the partner discarded).
inline double standard_normal(Engine& eng) noexcept {
    const double u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace nemf

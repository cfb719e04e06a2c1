#pragma once

#include <cstdint>
#include <random>

namespace scamp {

// Stream tags keep draws for different purposes independent under one seed.
enum class StreamTag : std::uint64_t {
    design = 0x64657369676eULL,
    signal = 0x7369676e616cULL,
    noise = 0x6e6f697365ULL,
    baseline = 0x626173656cULL,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for the stream identified by (seed, tag, a, b). Streams keyed by
/// block coordinates can be drawn in any order.
constexpr std::uint64_t stream_seed(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
    h = splitmix64(h ^ (a * 0x100000001b3ULL));
    h = splitmix64(h ^ (b * 0xc2b2ae3d27d4eb4fULL));
    return h;
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                          std::uint64_t b = 0) {
    return Engine(stream_seed(seed, tag, a, b));
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Exact for q = 0 (never) and q = 1 (always).
inline bool bernoulli(Engine& eng, double q) {
    return uniform01(eng) < q;
}

} // namespace scamp

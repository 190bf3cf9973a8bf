#pragma once
// Seeded PRNG with documented stream splitting.
//
// All randomness in the simulator flows through RngStream so that runs are
// reproducible from a single root seed. Streams for workers/episodes/users
// are derived with derive_stream(root, a, b, c): each run component owns its
// own stream and never shares state with another.
//
// Core generator: splitmix64 (Steele et al.), 2^64 period, passes BigCrush
// as a 64-bit mixer. Distributions are implemented here rather than with
// <random> because libstdc++/libc++ distributions are not bit-stable across
// implementations.

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace beliefsim {

inline constexpr uint64_t splitmix64_mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RngStream {
public:
    explicit RngStream(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [a, b).
    double uniform(double a, double b) {
        return a + (b - a) * uniform01();
    }

    bool bernoulli(double p) {
        return uniform01() < p;
    }

    /// Uniform integer in [0, n), unbiased (rejection on the top band).
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be > 0");
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    /// Standard normal via Box-Muller; two uniforms per draw, no cached pair.
    double normal(double mean = 0.0, double stddev = 1.0) {
        const double u1 = 1.0 - uniform01();  // (0, 1]; avoids log(0)
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

/// Stream derivation: root seed plus up to three indices (worker, episode,
/// purpose). Chained splitmix64 mixing; distinct index tuples give
/// independent streams for practical purposes.
inline RngStream derive_stream(uint64_t root, uint64_t a = 0, uint64_t b = 0,
                               uint64_t c = 0) {
    uint64_t s = splitmix64_mix(root);
    s = splitmix64_mix(s ^ (a + 0x51afd7ed558ccd6dULL));
    s = splitmix64_mix(s ^ (b + 0x8a91a6d40bf42404ULL));
    s = splitmix64_mix(s ^ (c + 0xcbc97d5a581bcd4dULL));
    return RngStream(s);
}

}  // namespace beliefsim

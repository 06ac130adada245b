#ifndef SSLNBV_RNG_HPP
#define SSLNBV_RNG_HPP

#include <cmath>
#include <cstdint>

namespace sslnbv {

// Deterministic, implementation-independent RNG helpers. All randomized
// operations in the library draw through these so that runs with equal
// seeds produce byte-identical outputs.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        s0_ = splitmix64(sm);
        s1_ = splitmix64(sm);
    }

    std::uint64_t next() {  // xoroshiro128+
        const std::uint64_t a = s0_;
        std::uint64_t b = s1_;
        const std::uint64_t out = a + b;
        b ^= a;
        s0_ = ((a << 55) | (a >> 9)) ^ b ^ (b << 14);
        s1_ = (b << 36) | (b >> 28);
        return out;
    }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n), n >= 1.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection sampling keeps the draw exactly uniform.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % n;
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        have_spare_ = true;
        return mean + stddev * u * factor;
    }

private:
    std::uint64_t s0_, s1_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a stream tag.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t sm = seed ^ (0xd1b54a32d192ed03ull * (tag + 1));
    return splitmix64(sm);
}

}  // namespace sslnbv

#endif

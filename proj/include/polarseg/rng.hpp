#pragma once

#include <cstdint>
#include <cmath>

namespace polarseg {

// Deterministic 64-bit generator (xoshiro256++ seeded through splitmix64).
// Every stochastic component takes one of these explicitly; the stream for a
// given (seed, call sequence) is identical across platforms and builds.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : s_) word = splitmix64(x);
    }

    // Derives an independent stream; used to give each frame / layer / purpose
    // its own generator so threading and call order cannot perturb draws.
    Rng split(std::uint64_t stream_id) const {
        std::uint64_t x = s_[0] ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
        x ^= s_[2] + 0xbf58476d1ce4e5b9ULL;
        return Rng(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection-free modulo is avoided for an exact,
    // platform-stable mapping.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Lemire bounded reduction with rejection; deterministic given the stream.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        std::uint64_t l = static_cast<std::uint64_t>(m);
        if (l < n) {
            std::uint64_t t = (0 - n) % n;
            while (l < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                l = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi_inclusive) {
        return lo + static_cast<std::int64_t>(uniform_index(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
    }

    // Standard normal via Box-Muller; both outputs consumed so the stream
    // advances by exactly two u64 per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace polarseg

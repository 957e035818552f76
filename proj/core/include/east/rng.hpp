#pragma once

#include <cmath>
#include <cstdint>

namespace east {

// Deterministic, platform-independent RNG. splitmix64 core with hand-rolled
// bounded/real/normal draws so results never depend on the standard library's
// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t uniform(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform_real() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; one value per call, no caching.
    double normal() {
        double u1 = uniform_real();
        double u2 = uniform_real();
        while (u1 <= 0.0) u1 = uniform_real();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Normal clipped by rejection to [-2s, 2s], the usual transformer init.
    double trunc_normal(double s) {
        double x = normal() * s;
        while (x < -2.0 * s || x > 2.0 * s) x = normal() * s;
        return x;
    }

private:
    std::uint64_t state_;
};

// Stable stream derivation: mixes a master seed with stream labels so that
// per-step / per-sample generators are independent and order-free.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
    };
    mix(a);
    mix(b);
    return h;
}

}  // namespace east

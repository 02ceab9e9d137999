#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sopcc {

/**
 * Project-wide random generator.
 *
 * The engine is MT19937-64 (bit-exact across standard libraries). All
 * conversions to real numbers are done here rather than through the
 * <random> distributions, whose output is implementation defined, so a
 * seed reproduces the same instance and the same run on every platform.
 *
 * `split()` derives an independent child stream by hashing the next
 * engine output with SplitMix64.
 */
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return engine_(); }

    /// Uniform on the open interval (0, 1), 52 bits of resolution.
    double uniform01() {
        return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
    }

    /// Uniform on (lo, hi); exactly `lo` when lo == hi.
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Exponential variate with the given mean (rate 1/mean). Strictly positive.
    double exponential(double mean) { return -mean * std::log(uniform01()); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (one variate per call).
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t index(std::uint64_t n) {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    Rng split() { return Rng(engine_()); }

    static constexpr std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace sopcc

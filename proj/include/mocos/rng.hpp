#pragma once

#include <cstdint>
#include <random>

namespace mocos {

// Seeded generator with distribution helpers that do not depend on the
// standard library's implementation-defined distributions, so sequences are
// identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        // Lemire-style rejection keeps the draw unbiased.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return static_cast<std::size_t>(x % n);
    }

    bool bernoulli(double p_one) { return uniform() < p_one; }

    // Standard normal via Box-Muller.
    double normal();

    // Independent substream keyed by (this stream's seed material, key).
    Rng fork(std::uint64_t key) const;

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

private:
    std::mt19937_64 engine_;
};

} // namespace mocos

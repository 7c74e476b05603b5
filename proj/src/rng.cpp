#include "mocos/rng.hpp"

#include <cmath>
#include <numbers>

namespace mocos {

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng Rng::fork(std::uint64_t key) const {
    std::mt19937_64 copy = engine_;
    return Rng(mix(copy(), key));
}

} // namespace mocos

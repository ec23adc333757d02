#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "latentshift/matrix.hpp"

namespace latentshift {

/// Seeded pseudo-random generator used everywhere randomness is needed.
///
/// Algorithm: xoshiro256++ (Blackman & Vigna), state expanded from the 64-bit
/// seed with SplitMix64. Gaussian draws use the basic Box-Muller transform and
/// consume exactly two uniforms per draw (no caching), so sequences replay
/// identically across runs and platforms for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 bits of precision.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller: z = sqrt(-2 ln(1-u1)) * cos(2 pi u2).
    double next_gaussian() {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double next_gaussian(double mean, double stddev) {
        return mean + stddev * next_gaussian();
    }

    Matrix gaussian_matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (double& v : m.values()) v = next_gaussian();
        return m;
    }

    Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
        Matrix m(rows, cols);
        for (double& v : m.values()) v = lo + (hi - lo) * next_uniform();
        return m;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& s) {
        std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_ = 0;
    std::uint64_t state_[4] = {};
};

} // namespace latentshift

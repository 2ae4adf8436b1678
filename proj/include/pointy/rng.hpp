// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace pointy {

// =====================================================================
//  Deterministic RNG
// =====================================================================
//
// SplitMix64 over a 64-bit counter. The entire generator state is one
// word, so it serializes into checkpoints and reproduces bit-identical
// streams on any platform with IEEE-754 doubles. Algorithm: the state
// advances by the golden-ratio increment 0x9E3779B97F4A7C15 and each
// output is the finalizer mix of the advanced state (Steele et al.).
class Rng {
  public:
    Rng() : state_(0) {}
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n) via rejection (no modulo bias).
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller (fresh pair each call, first kept).
    double normal() {
        double u1 = next_double();
        const double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// n distinct indices from [0, pool) in draw order (partial Fisher-Yates).
    std::vector<std::int64_t> sample_without_replacement(std::int64_t pool, std::int64_t n) {
        std::vector<std::int64_t> idx(static_cast<std::size_t>(pool));
        std::iota(idx.begin(), idx.end(), std::int64_t{0});
        std::vector<std::int64_t> out;
        out.reserve(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            const auto j = i + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(pool - i)));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
            out.push_back(idx[static_cast<std::size_t>(i)]);
        }
        return out;
    }

  private:
    std::uint64_t state_;
};

}  // namespace pointy

#pragma once

#include <cmath>
#include <cstdint>

#include "hskip/core.hpp"

namespace hskip {

/// splitmix64. Small, fast, and identical everywhere, which is all the
/// simulator needs; this is not cryptographic randomness.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        state_ += kGolden;
        return mix64(state_);
    }

    /// Uniform in [0, 1).
    double next_double() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Unbiased uniform in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t threshold = -n % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    std::size_t index(std::size_t n) noexcept {
        return static_cast<std::size_t>(below(static_cast<std::uint64_t>(n)));
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_double(); }

    /// Pareto via inverse transform: scale * u^(-1/alpha), u in (0, 1].
    double pareto(double alpha, double scale) noexcept {
        const double u = 1.0 - next_double();
        return scale * std::pow(u, -1.0 / alpha);
    }

private:
    std::uint64_t state_;
};

}  // namespace hskip

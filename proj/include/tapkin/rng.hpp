#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tapkin {

/// Seeded random stream with a fully specified normal generator, so that
/// identical seeds give bit-identical draws on any platform/compiler.
/// (std::normal_distribution is implementation-defined; Box-Muller is not.)
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() {
        // 53-bit mantissa from the top bits of a 64-bit draw
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller, one value per call (no pair caching,
    /// keeps the draw order trivially reproducible).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace tapkin

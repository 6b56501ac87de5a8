#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace oculab {

/// Seeded generator whose draws are identical on every platform.
/// std::mt19937_64 is fully specified by the standard; the standard
/// distributions are not, so the transforms live here.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool coin() { return (engine_() >> 63) != 0; }

    /// Box-Muller; draws two uniforms per call and discards the sine branch
    /// so the stream position depends only on the call count.
    double normal(double mean, double sd) {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        return mean + sd * z;
    }

    /// Normal truncated below at zero by rejection; falls back to zero when
    /// the mass above zero is negligible.
    double truncated_normal_nonneg(double mean, double sd) {
        if (sd <= 0.0) return mean > 0.0 ? mean : 0.0;
        for (int i = 0; i < 64; ++i) {
            const double x = normal(mean, sd);
            if (x >= 0.0) return x;
        }
        return 0.0;
    }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::mt19937_64 engine_;
};

}  // namespace oculab

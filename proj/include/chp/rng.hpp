#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace chp {

// Seeded generator with transforms written out by hand so that streams are
// reproducible across standard libraries (std::*_distribution are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Exp(1) by inversion.
    double exponential() { return -std::log1p(-uniform()); }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    // Index drawn proportionally to non-negative weights; total must be > 0.
    std::size_t categorical(std::span<const double> weights, double total) {
        const double target = uniform() * total;
        double acc = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            acc += weights[i];
            last_positive = i;
            if (target < acc) return i;
        }
        return last_positive;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace chp

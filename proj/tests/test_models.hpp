#pragma once

// Small fixture models shared by the unit tests.

#include <cmath>

#include "chp/hawkes_model.hpp"
#include "chp/lob.hpp"
#include "chp/size_model.hpp"

namespace testing_models {

using namespace chp;

inline HawkesModel single_type(EventType e, double mu, Kernel self) {
    PerEvent<double> rates{};
    rates[index(e)] = mu;
    auto m = HawkesModel::poisson(rates);
    m.kernels[index(e)][index(e)] = std::move(self);
    return m;
}

inline HawkesModel u_shaped_poisson(double level) {
    auto m = HawkesModel::poisson({});
    for (std::size_t i = 0; i < kNumEventTypes; ++i)
        for (std::size_t b = 0; b < m.num_bins(); ++b)
            m.baselines[i][b] = level * (1.0 + 0.1 * std::abs(static_cast<double>(b) - 6.0)) * (1.0 + 0.05 * i);
    return m;
}

// Dense 12x12 exponential kernels; a few entries inhibitory when requested.
inline HawkesModel mixed_exponential(bool inhibitory) {
    auto m = u_shaped_poisson(0.3);
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            const double beta = (i + j) % 2 == 0 ? 8.0 : 3.0;
            double norm = i == j ? 0.2 : 0.02;
            if (inhibitory && (i + 2 * j) % 7 == 0 && i != j) norm = -0.03;
            m.kernels[i][j] = Kernel::exponential(norm * beta, beta);
        }
    }
    return m;
}

inline HawkesModel mixed_power_law() {
    auto m = u_shaped_poisson(0.3);
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            const double gamma = 2.0 + 0.1 * static_cast<double>((i + j) % 5);
            const double delta = 0.05;
            double norm = i == j ? 0.25 : 0.015;
            if ((i + 3 * j) % 11 == 0 && i != j) norm = -0.02;
            m.kernels[i][j] = Kernel::power_law(norm * (gamma - 1.0) / delta, delta, gamma);
        }
    }
    return m;
}

inline HawkesModel mixed_nonparametric() {
    auto m = u_shaped_poisson(0.3);
    const std::vector<double> edges{0.0, 0.01, 0.05, 0.2, 1.0, 3.0};
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            const double s = i == j ? 1.0 : 0.08;
            const double sign = (i + j) % 5 == 0 && i != j ? -1.0 : 1.0;
            m.kernels[i][j] = Kernel::nonparametric(edges, {sign * 3.0 * s, sign * 1.0 * s, 0.3 * s, -0.02 * s, 0.01 * s});
        }
    }
    return m;
}

// Poisson order flow whose spread wanders over roughly 0..15 ticks.
inline HawkesModel spread_market(double beta) {
    PerEvent<double> r{};
    r[index(EventType::LoAsk0)] = r[index(EventType::LoBid0)] = 1.0;
    r[index(EventType::CoAsk0)] = r[index(EventType::CoBid0)] = 0.6;
    r[index(EventType::MoAsk0)] = r[index(EventType::MoBid0)] = 0.6;
    r[index(EventType::LoAskMinus1)] = r[index(EventType::LoBidPlus1)] = 0.15;
    r[index(EventType::LoAskPlus1)] = r[index(EventType::LoBidMinus1)] = 1.0;
    r[index(EventType::CoAskPlus1)] = r[index(EventType::CoBidMinus1)] = 0.5;
    return HawkesModel::poisson(r, beta);
}

inline DepthDistribution market_depth() { return DepthDistribution({1, 2, 3}, {1.0, 1.0, 1.0}); }

inline PerEvent<SizeDistribution> unit_sizes() { return {}; }

inline SizeDistribution spiked(double p) {
    SizeDistribution d;
    d.spike_weights = {0.05, 0.05, 0.05, 0.4, 0.05, 0.02};
    d.body_weight = 0.38;
    d.geom_p = p;
    return d;
}

inline PerEvent<SizeDistribution> spiked_sizes() {
    PerEvent<SizeDistribution> s{};
    for (auto e : kAllEventTypes)
        if (has_size_distribution(e)) s[index(e)] = spiked(0.02);
    return s;
}

}  // namespace testing_models

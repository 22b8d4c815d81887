#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chp/calibration/nonparametric.hpp"
#include "chp/calibration/parametric.hpp"
#include "chp/error.hpp"
#include "chp/hawkes_model.hpp"
#include "chp/lob.hpp"
#include "chp/size_model.hpp"

namespace chp {

struct DayParameters {
    NonParamEstimate estimate;
    std::optional<double> spread_beta;
};

struct ParameterDispersion {
    std::string name;
    double mean{0.0};
    double sd{0.0};
    double cv{0.0};
    bool flagged{false};
};

struct AggregateParameters {
    NonParamEstimate mean;  // cross-day mean of every cell value and baseline
    EventMatrix<std::vector<double>> value_sd;
    PerEvent<std::vector<double>> baseline_sd;
    std::optional<double> spread_beta;
    std::size_t days{0};
    // Baselines, kernel norms and the spread exponent, flagged when their
    // cross-day coefficient of variation exceeds the threshold.
    std::vector<ParameterDispersion> stationarity;
};

// Sample mean and standard deviation (n - 1 denominator).
inline std::pair<double, double> mean_sd(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    double m = 0.0;
    for (double x : xs) m += x;
    m /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return {m, xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

inline ParameterDispersion dispersion(std::string name, std::span<const double> xs, double cv_threshold) {
    const auto [m, sd] = mean_sd(xs);
    ParameterDispersion p{std::move(name), m, sd, 0.0, false};
    if (sd > 0.0) p.cv = m != 0.0 ? sd / std::abs(m) : std::numeric_limits<double>::infinity();
    p.flagged = p.cv > cv_threshold;
    return p;
}

inline AggregateParameters aggregate_days(std::span<const DayParameters> days, double cv_threshold = 0.5) {
    if (days.size() < 2) throw ContractViolation("insufficient days: aggregation needs at least 2, got " + std::to_string(days.size()));
    const auto& first = days.front().estimate;
    for (const auto& d : days) {
        if (d.estimate.edges != first.edges || d.estimate.num_bins() != first.num_bins())
            throw ContractViolation("days were estimated on different grids");
    }
    AggregateParameters agg;
    agg.days = days.size();
    agg.mean = first;
    agg.mean.day_id = "mean";
    agg.mean.warnings.clear();
    agg.mean.value_se = {};
    agg.mean.baseline_se = {};
    const std::size_t C = first.num_cells(), nb = first.num_bins();
    std::vector<double> xs(days.size());

    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        agg.mean.counts[i] = 0;
        for (const auto& d : days) agg.mean.counts[i] += d.estimate.counts[i];
        agg.baseline_sd[i].resize(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            for (std::size_t k = 0; k < days.size(); ++k) xs[k] = days[k].estimate.baselines[i][b];
            auto p = dispersion("baseline." + std::string(name(event_type_from_index(i))) + ".bin" + std::to_string(b + 1), xs,
                                cv_threshold);
            agg.mean.baselines[i][b] = p.mean;
            agg.baseline_sd[i][b] = p.sd;
            agg.stationarity.push_back(std::move(p));
        }
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            agg.value_sd[i][j].resize(C);
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t k = 0; k < days.size(); ++k) xs[k] = days[k].estimate.values[i][j][c];
                const auto [m, sd] = mean_sd(xs);
                agg.mean.values[i][j][c] = m;
                agg.value_sd[i][j][c] = sd;
            }
            for (std::size_t k = 0; k < days.size(); ++k) xs[k] = days[k].estimate.norm(i, j);
            agg.stationarity.push_back(dispersion("norm." + std::string(name(event_type_from_index(i))) + "<-" +
                                                      std::string(name(event_type_from_index(j))),
                                                  xs, cv_threshold));
        }
    }

    std::vector<double> betas;
    for (const auto& d : days)
        if (d.spread_beta) betas.push_back(*d.spread_beta);
    if (!betas.empty()) {
        auto p = dispersion("spread_beta", betas, cv_threshold);
        agg.spread_beta = p.mean;
        agg.stationarity.push_back(std::move(p));
    }
    return agg;
}

// Averages the LO_ask-1 and LO_bid+1 rows (baselines and kernel cells).
inline NonParamEstimate symmetrize_in_spread(NonParamEstimate est) {
    const auto a = index(EventType::LoAskMinus1), b = index(EventType::LoBidPlus1);
    for (std::size_t k = 0; k < est.baselines[a].size(); ++k) {
        const double m = 0.5 * (est.baselines[a][k] + est.baselines[b][k]);
        est.baselines[a][k] = est.baselines[b][k] = m;
    }
    for (std::size_t j = 0; j < kNumEventTypes; ++j) {
        for (std::size_t c = 0; c < est.num_cells(); ++c) {
            const double m = 0.5 * (est.values[a][j][c] + est.values[b][j][c]);
            est.values[a][j][c] = est.values[b][j][c] = m;
        }
    }
    return est;
}

struct BuiltModel {
    HawkesModel model;
    PerEvent<SizeDistribution> sizes;
    DepthDistribution depth;
    ParametricFit fit;
    double spectral_radius{0.0};
    bool simulatable{false};
};

// Simulation-ready model from the aggregate: in-spread rows made identical,
// parametric kernels fitted to the mean cell values, stability checked.
inline BuiltModel build_model(const AggregateParameters& agg, double spread_beta, PerEvent<SizeDistribution> sizes,
                              DepthDistribution depth, double session_start = kNasdaqOpen) {
    BuiltModel out;
    const auto est = symmetrize_in_spread(agg.mean);
    out.fit = fit_parametric(est);
    auto& m = out.model;
    m.baselines = est.baselines;
    m.kernels = out.fit.kernels;
    m.spread_beta = spread_beta;
    m.tod_bin_seconds = est.tod_bin_seconds;
    m.session_start = session_start;
    m.session_end = session_start + est.session_length;
    m.validate();
    out.sizes = std::move(sizes);
    out.depth = std::move(depth);
    out.spectral_radius = spectral_radius(m);
    out.simulatable = out.spectral_radius < 1.0;
    return out;
}

}  // namespace chp

#pragma once

// End-to-end calibration and diagnostics over classified event streams.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chp/calibration/aggregate.hpp"
#include "chp/calibration/grid.hpp"
#include "chp/calibration/nonparametric.hpp"
#include "chp/calibration/parametric.hpp"
#include "chp/calibration/spread_beta.hpp"
#include "chp/diagnostics.hpp"
#include "chp/error.hpp"
#include "chp/hawkes_model.hpp"
#include "chp/lob.hpp"
#include "chp/simulate.hpp"
#include "chp/size_model.hpp"

namespace chp {

struct CalibrationConfig {
    EstimationGrid grid{};
    NonParamOptions nonparam{};  // spread_beta and day_id are set per run
    SpreadBetaOptions beta{};
    std::optional<double> fixed_spread_beta;  // skip the regression
    SizeFitOptions sizes{};
    double cv_threshold{0.5};
    double session_start{kNasdaqOpen};
};

struct DayInput {
    std::string id;
    std::vector<EventRecord> events;
    std::vector<BookSnapshot> trajectory;  // optional, feeds the depth distribution
};

struct CalibrationOutput {
    BuiltModel built;
    AggregateParameters aggregate;
    std::optional<SpreadBetaResult> spread_regression;
    std::vector<DayParameters> days;
    std::vector<std::string> warnings;
};

// Per event type size fit pooled over days; thin samples fall back to a
// geometric law with the sample mean.
inline PerEvent<SizeDistribution> fit_all_sizes(std::span<const DayInput> days, const SizeFitOptions& opt,
                                                 std::vector<std::string>& warnings) {
    PerEvent<SizeDistribution> out{};
    for (auto e : kAllEventTypes) {
        if (!has_size_distribution(e)) continue;
        std::vector<std::int64_t> sizes;
        for (const auto& d : days)
            for (const auto& ev : d.events)
                if (ev.type == e) sizes.push_back(ev.size);
        if (static_cast<std::int64_t>(sizes.size()) >= opt.min_samples) {
            out[index(e)] = fit_sizes(sizes, opt).dist;
            continue;
        }
        SizeDistribution d;
        if (!sizes.empty()) {
            double mean = 0.0;
            for (auto s : sizes) mean += static_cast<double>(s);
            mean /= static_cast<double>(sizes.size());
            d.geom_p = std::clamp(1.0 / mean, 1e-9, 1.0);
        }
        warnings.push_back("sizes." + std::string(name(e)) + ": only " + std::to_string(sizes.size()) +
                           " samples, geometric fallback");
        out[index(e)] = d;
    }
    return out;
}

// Depth found at newly revealed outer levels, from the book trajectories.
inline DepthDistribution fit_depth(std::span<const DayInput> days, std::vector<std::string>& warnings) {
    std::vector<std::int64_t> samples;
    for (const auto& d : days) {
        if (d.trajectory.empty()) continue;
        if (d.trajectory.size() != d.events.size())
            throw ContractViolation("day " + d.id + ": trajectory and events differ in length");
        for (std::size_t k = 1; k < d.trajectory.size(); ++k) {
            const auto& prev = d.trajectory[k - 1];
            const auto& cur = d.trajectory[k];
            const auto type = d.events[k].type;
            if ((type == EventType::MoAsk0 || type == EventType::CoAsk0) && cur.ask0_price > prev.ask0_price &&
                cur.ask_plus1_depth > 0)
                samples.push_back(cur.ask_plus1_depth);
            if ((type == EventType::MoBid0 || type == EventType::CoBid0) && cur.bid0_price < prev.bid0_price &&
                cur.bid_minus1_depth > 0)
                samples.push_back(cur.bid_minus1_depth);
        }
    }
    if (samples.empty()) {
        warnings.emplace_back("depth: no revealed levels observed, using the default depth distribution");
        return {};
    }
    return DepthDistribution::from_samples(samples);
}

// Book before each event when a trajectory is available; the first event's
// view takes its spread from the event and assumes non-empty queues.
inline std::vector<BookView> day_views(const DayInput& day) {
    if (day.trajectory.empty() || day.events.empty()) return {};
    BookView first;
    first.spread_ticks = std::max<std::int64_t>(day.events.front().spread_ticks, 0);
    first.nonempty.fill(true);
    return views_from_trajectory(day.events, day.trajectory, first);
}

// classify -> spread exponent -> sizes/depth -> per-day kernels and baselines
// -> cross-day aggregate -> parametric model.
inline CalibrationOutput calibrate(std::span<const DayInput> days, const CalibrationConfig& cfg) {
    if (days.size() < 2)
        throw ContractViolation("insufficient days: calibration needs at least 2, got " + std::to_string(days.size()));
    CalibrationOutput out;

    double beta = 0.0;
    std::vector<std::optional<double>> day_beta(days.size());
    if (cfg.fixed_spread_beta) {
        beta = *cfg.fixed_spread_beta;
    } else {
        SpreadBetaAccumulator pooled(cfg.beta);
        for (std::size_t d = 0; d < days.size(); ++d) {
            pooled.add_day(days[d].events);
            try {
                day_beta[d] = estimate_spread_beta(days[d].events, cfg.beta).beta;
            } catch (const ContractViolation& e) {
                out.warnings.push_back("day " + days[d].id + ": no spread exponent (" + e.what() + ")");
            }
        }
        out.spread_regression = pooled.result();
        beta = out.spread_regression->beta;
    }
    if (!(beta > 0.0))
        throw ContractViolation("estimated spread exponent " + std::to_string(beta) + " is not positive");

    const auto sizes = fit_all_sizes(days, cfg.sizes, out.warnings);
    auto depth = fit_depth(days, out.warnings);

    cfg.grid.validate();
    for (std::size_t d = 0; d < days.size(); ++d) {
        auto opt = cfg.nonparam;
        opt.spread_beta = beta;
        opt.day_id = days[d].id;
        auto est = estimate_nonparametric(days[d].events, cfg.grid, opt, day_views(days[d]));
        for (const auto& w : est.warnings) out.warnings.push_back("day " + days[d].id + ": " + w);
        out.days.push_back({std::move(est), day_beta[d]});
    }
    out.aggregate = aggregate_days(out.days, cfg.cv_threshold);
    out.built = build_model(out.aggregate, beta, sizes, std::move(depth), cfg.session_start);
    if (!out.built.simulatable)
        out.warnings.push_back("fitted model is not stable (spectral radius " +
                               std::to_string(out.built.spectral_radius) + "); simulation will refuse it");
    return out;
}

struct DimensionDiagnostics {
    std::size_t residuals{0};
    KsResult ks;
    double mean_residual{0.0};
};

struct HoeffdingReport {
    EventType type{EventType::MoBid0};
    HoeffdingResult result;
};

struct DiagnosticsReport {
    ResidualSeries residuals;
    PerEvent<DimensionDiagnostics> dims;
    PerEvent<std::vector<std::pair<double, double>>> qq;
    std::vector<HoeffdingReport> hoeffding;
};

struct DiagnosticsOptions {
    IntensityOptions intensity{};
    std::size_t n_quantiles{100};
    double hoeffding_window{0.01};
};

// Residuals, Q-Q pairs and KS per dimension, plus the size / next-arrival
// independence test for every limit and market order type with enough pairs.
inline DiagnosticsReport diagnose(std::span<const EventRecord> events, const HawkesModel& model,
                                  std::span<const BookView> views, const DiagnosticsOptions& opt = {}) {
    DiagnosticsReport rep;
    rep.residuals = compute_residuals(events, model, views, opt.intensity);
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        const auto& tau = rep.residuals.tau[i];
        auto& d = rep.dims[i];
        d.residuals = tau.size();
        d.ks = rep.residuals.ks[i];
        if (!tau.empty()) {
            double s = 0.0;
            for (double x : tau) s += x;
            d.mean_residual = s / static_cast<double>(tau.size());
        }
        if (tau.size() >= 1) rep.qq[i] = qq_pairs(tau, std::min(opt.n_quantiles, tau.size()));
    }
    for (auto e : kAllEventTypes) {
        if (!has_size_distribution(e)) continue;
        const auto [sizes, counts] = size_arrival_pairs(events, e, opt.hoeffding_window);
        if (sizes.size() < 30) continue;
        rep.hoeffding.push_back({e, hoeffding_independence(sizes, counts)});
    }
    return rep;
}

}  // namespace chp

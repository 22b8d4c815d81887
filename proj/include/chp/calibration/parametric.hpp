#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "chp/calibration/nonparametric.hpp"
#include "chp/error.hpp"
#include "chp/kernel.hpp"

namespace chp {

struct FamilyFit {
    Kernel kernel;
    double rss{0.0};
    double aic{0.0};
    bool converged{false};
};

struct KernelFitReport {
    FamilyFit exponential;
    FamilyFit power_law;
    KernelFamily chosen{KernelFamily::Exponential};
    bool fallback{false};  // chosen family forced by a failed fit of the other

    const Kernel& kernel() const { return chosen == KernelFamily::Exponential ? exponential.kernel : power_law.kernel; }
};

struct ParametricFit {
    EventMatrix<Kernel> kernels;
    EventMatrix<KernelFitReport> report;
};

namespace detail {

// Cell averages of a unit-amplitude kernel shape, so that the model for the
// cell values is alpha * basis.
struct CellData {
    std::span<const double> edges;
    std::span<const double> values;
    std::vector<double> widths;
    double vwv{0.0};  // sum w v^2

    CellData(std::span<const double> e, std::span<const double> v) : edges(e), values(v), widths(v.size()) {
        for (std::size_t c = 0; c < v.size(); ++c) {
            widths[c] = e[c + 1] - e[c];
            vwv += widths[c] * v[c] * v[c];
        }
    }

    std::size_t n() const { return values.size(); }

    // Profiled (alpha, rss) for a given basis.
    std::pair<double, double> profile(const std::vector<double>& g) const {
        double wvg = 0.0, wgg = 0.0;
        for (std::size_t c = 0; c < n(); ++c) {
            wvg += widths[c] * values[c] * g[c];
            wgg += widths[c] * g[c] * g[c];
        }
        if (!(wgg > 0.0) || !std::isfinite(wgg)) return {0.0, vwv};
        const double alpha = wvg / wgg;
        return {alpha, std::max(0.0, vwv - alpha * wvg)};
    }
};

inline std::vector<double> exp_basis(const CellData& d, double beta) {
    std::vector<double> g(d.n());
    for (std::size_t c = 0; c < d.n(); ++c) {
        const double x = beta * d.widths[c];
        g[c] = std::exp(-beta * d.edges[c]) * (x > 0.0 ? -std::expm1(-x) / x : 1.0);
    }
    return g;
}

inline std::vector<double> power_law_basis(const CellData& d, double delta, double gamma) {
    std::vector<double> g(d.n());
    const double q = 1.0 - gamma;
    for (std::size_t c = 0; c < d.n(); ++c) {
        const double a = q * std::log1p(d.edges[c] / delta);
        const double b = q * std::log1p(d.edges[c + 1] / delta);
        g[c] = -std::exp(a) * std::expm1(b - a) * delta / ((gamma - 1.0) * d.widths[c]);
    }
    return g;
}

inline double aic(double rss, std::size_t n, int k) {
    const double floor = 1e-300;
    return static_cast<double>(n) * std::log(std::max(rss, floor) / static_cast<double>(n)) + 2.0 * k;
}

// Index of the smallest value; ties keep the first.
inline std::size_t argmin(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

inline FamilyFit fit_exponential(const CellData& d) {
    const double lo = std::log(0.1 / d.edges.back());
    const double hi = std::log(10.0 / d.widths.front());
    const std::size_t n_grid = 120;
    auto rss_at = [&](double lb) { return d.profile(exp_basis(d, std::exp(lb))).second; };
    std::vector<double> xs(n_grid), fs(n_grid);
    for (std::size_t k = 0; k < n_grid; ++k) {
        xs[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_grid - 1);
        fs[k] = rss_at(xs[k]);
    }
    const auto best = argmin(fs);
    FamilyFit fit;
    double lb = xs[best];
    if (best > 0 && best + 1 < n_grid) {
        lb = boost::math::tools::brent_find_minima(rss_at, xs[best - 1], xs[best + 1], 52).first;
        fit.converged = true;
    }
    const double beta = std::exp(lb);
    const auto [alpha, rss] = d.profile(exp_basis(d, beta));
    if (d.vwv == 0.0) fit.converged = true;
    fit.kernel = Kernel::exponential(alpha, beta);
    fit.rss = rss;
    fit.aic = aic(rss, d.n(), 2);
    return fit;
}

inline FamilyFit fit_power_law(const CellData& d) {
    const double ld_lo = std::log(d.widths.front() / 10.0), ld_hi = std::log(d.edges.back());
    const double lg_lo = std::log(0.02), lg_hi = std::log(20.0);
    const std::size_t n_grid = 40;
    auto rss_at = [&](double ld, double lg) {
        return d.profile(power_law_basis(d, std::exp(ld), 1.0 + std::exp(lg))).second;
    };
    auto step = [](double lo, double hi, std::size_t k, std::size_t n) {
        return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    };
    std::size_t bd = 0, bg = 0;
    double bf = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n_grid; ++a) {
        for (std::size_t b = 0; b < n_grid; ++b) {
            const double f = rss_at(step(ld_lo, ld_hi, a, n_grid), step(lg_lo, lg_hi, b, n_grid));
            if (f < bf) {
                bf = f;
                bd = a;
                bg = b;
            }
        }
    }
    FamilyFit fit;
    double ld = step(ld_lo, ld_hi, bd, n_grid), lg = step(lg_lo, lg_hi, bg, n_grid);
    const bool interior = bd > 0 && bd + 1 < n_grid && bg > 0 && bg + 1 < n_grid;
    if (interior) {
        // Nested one-dimensional minimizations inside the neighbouring grid cells.
        const double d0 = step(ld_lo, ld_hi, bd - 1, n_grid), d1 = step(ld_lo, ld_hi, bd + 1, n_grid);
        const double g0 = step(lg_lo, lg_hi, bg - 1, n_grid), g1 = step(lg_lo, lg_hi, bg + 1, n_grid);
        auto inner = [&](double g) { return boost::math::tools::brent_find_minima([&](double x) { return rss_at(x, g); }, d0, d1, 40); };
        lg = boost::math::tools::brent_find_minima([&](double g) { return inner(g).second; }, g0, g1, 40).first;
        ld = inner(lg).first;
        fit.converged = true;
    }
    const double delta = std::exp(ld), gamma = 1.0 + std::exp(lg);
    const auto [alpha, rss] = d.profile(power_law_basis(d, delta, gamma));
    if (d.vwv == 0.0) fit.converged = true;
    fit.kernel = Kernel::power_law(alpha, delta, gamma);
    fit.rss = rss;
    fit.aic = aic(rss, d.n(), 3);
    return fit;
}

}  // namespace detail

// Weighted least-squares fits of both parametric families to cell averages
// of a piecewise-constant kernel (weights = cell widths); the lower Gaussian
// AIC wins. A family whose fit ran into the search boundary loses by default.
inline KernelFitReport fit_kernel_cells(std::span<const double> edges, std::span<const double> values) {
    if (values.empty() || edges.size() != values.size() + 1)
        throw ContractViolation("kernel cells need edges.size() == values.size() + 1");
    const detail::CellData d(edges, values);
    KernelFitReport r;
    r.exponential = detail::fit_exponential(d);
    r.power_law = detail::fit_power_law(d);
    const bool pl_better = r.power_law.aic < r.exponential.aic;
    if (r.exponential.converged == r.power_law.converged) {
        r.chosen = pl_better ? KernelFamily::PowerLaw : KernelFamily::Exponential;
    } else {
        r.chosen = r.exponential.converged ? KernelFamily::Exponential : KernelFamily::PowerLaw;
        r.fallback = (r.chosen == KernelFamily::PowerLaw) != pl_better;
    }
    return r;
}

inline ParametricFit fit_parametric(const NonParamEstimate& est) {
    ParametricFit out;
    for (std::size_t i = 0; i < kNumEventTypes; ++i) {
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            out.report[i][j] = fit_kernel_cells(est.edges, est.values[i][j]);
            out.kernels[i][j] = out.report[i][j].kernel();
        }
    }
    return out;
}

}  // namespace chp

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chp/error.hpp"
#include "chp/event_type.hpp"
#include "chp/hawkes_model.hpp"
#include "chp/intensity.hpp"
#include "chp/simulate.hpp"

namespace chp {

// Book views prevailing before each event, from the pre-event spreads of a
// classified stream. Queue emptiness is not recorded there, so all queues
// are taken as non-empty.
inline std::vector<BookView> views_from_events(std::span<const EventRecord> events) {
    std::vector<BookView> v(events.size());
    for (std::size_t k = 0; k < events.size(); ++k) {
        if (events[k].spread_ticks < 0)
            throw ContractViolation("event " + std::to_string(k) + " carries no spread");
        v[k].spread_ticks = events[k].spread_ticks;
        v[k].nonempty.fill(true);
        v[k].nonempty[index(QueueKey::AskMinus1)] = v[k].nonempty[index(QueueKey::BidPlus1)] = false;
    }
    return v;
}

// Book views before each event from a simulated trajectory (state after
// each event) and the initial book.
inline std::vector<BookView> views_from_trajectory(std::span<const EventRecord> events,
                                                   std::span<const BookSnapshot> trajectory, const BookView& initial) {
    if (events.size() != trajectory.size())
        throw ContractViolation("trajectory has " + std::to_string(trajectory.size()) + " rows for " +
                                std::to_string(events.size()) + " events");
    std::vector<BookView> v(events.size());
    for (std::size_t k = 0; k < events.size(); ++k) {
        if (trajectory[k].time != events[k].time || trajectory[k].type != events[k].type)
            throw ContractViolation("trajectory and events misaligned at row " + std::to_string(k));
        v[k] = k == 0 ? initial : trajectory[k - 1].view();
    }
    return v;
}

// Integrated effective intensities (compensators) along an event stream.
// The floored intensity is integrated exactly between events by bisection on
// sign-definite pieces; spread factors are constant between events.
class CompensatorSweep {
public:
    CompensatorSweep(const HawkesModel& model, IntensityOptions opt = {}) : model_(&model), state_(model, opt) {}

    double now() const { return t_; }
    const PerEvent<double>& value() const { return lambda_; }

    void advance_to(double target, const BookView& view) {
        if (target < t_) throw ContractViolation("compensator cannot run backwards");
        const double end = std::min(target, model_->session_length());
        while (t_ < end) {
            const double seg = std::min(end, model_->next_bin_boundary(t_));
            for (std::size_t i = 0; i < kNumEventTypes; ++i) {
                const double f = intensity_factor(event_type_from_index(i), view, model_->spread_beta);
                if (f == 0.0) continue;
                lambda_[i] += f * state_.integrate_floored(i, seg - t_);
            }
            t_ = seg;
            state_.advance_to(t_);
        }
    }

    void record(EventType e) { state_.record(e); }

private:
    const HawkesModel* model_;
    IntensityState state_;
    PerEvent<double> lambda_{};
    double t_{0.0};
};

struct KsResult {
    double statistic{0.0};
    double p_value{1.0};
};

// Asymptotic Kolmogorov tail probability P(K > x).
inline double kolmogorov_q(double x) {
    if (x < 0.2) return 1.0;
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        q += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(q, 0.0, 1.0);
}

// One-sample KS test against Exp(1) with Stephens' finite-n correction.
inline KsResult ks_exponential(std::vector<double> xs) {
    if (xs.empty()) return {};
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double f = -std::expm1(-std::max(xs[k], 0.0));
        d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
    }
    const double rn = std::sqrt(n);
    return {d, kolmogorov_q((rn + 0.12 + 0.11 / rn) * d)};
}

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ContractViolation("two-sample KS needs non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

struct ResidualSeries {
    PerEvent<std::vector<double>> tau;
    PerEvent<KsResult> ks;
};

// Time-rescaled inter-event durations per dimension. Under the model they are
// i.i.d. Exp(1).
inline ResidualSeries compute_residuals(std::span<const EventRecord> events, const HawkesModel& model,
                                        std::span<const BookView> views, IntensityOptions opt = {}) {
    model.validate();
    if (views.size() != events.size())
        throw ContractViolation("book views and events differ in length: " + std::to_string(views.size()) + " vs " +
                                std::to_string(events.size()));
    ResidualSeries out;
    CompensatorSweep sweep(model, opt);
    PerEvent<double> last{};
    PerEvent<bool> seen{};
    for (std::size_t k = 0; k < events.size(); ++k) {
        const auto& e = events[k];
        if (!(e.time >= sweep.now()) || !(e.time < model.session_length()))
            throw ContractViolation("event " + std::to_string(k) + " out of order or outside the session");
        sweep.advance_to(e.time, views[k]);
        const auto i = index(e.type);
        const double lam = sweep.value()[i];
        if (seen[i]) {
            const double tau = lam - last[i];
            if (tau < -1e-9) throw std::logic_error("negative residual: compensator decreased");
            out.tau[i].push_back(std::max(tau, 0.0));
        }
        seen[i] = true;
        last[i] = lam;
        sweep.record(e.type);
    }
    for (std::size_t i = 0; i < kNumEventTypes; ++i) out.ks[i] = ks_exponential(out.tau[i]);
    return out;
}

// Q-Q pairs (Exp(1) quantile, empirical quantile) at plotting positions
// (k - 0.5) / n_quantiles, empirical quantiles interpolated linearly.
inline std::vector<std::pair<double, double>> qq_pairs(std::vector<double> tau, std::size_t n_quantiles) {
    if (n_quantiles == 0 || tau.size() < n_quantiles)
        throw ContractViolation("qq_pairs needs at least n_quantiles residuals");
    std::sort(tau.begin(), tau.end());
    const double n = static_cast<double>(tau.size());
    std::vector<std::pair<double, double>> out;
    out.reserve(n_quantiles);
    for (std::size_t k = 1; k <= n_quantiles; ++k) {
        const double p = (static_cast<double>(k) - 0.5) / static_cast<double>(n_quantiles);
        const double pos = std::clamp(p * n - 0.5, 0.0, n - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, tau.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        out.emplace_back(-std::log1p(-p), tau[lo] + frac * (tau[hi] - tau[lo]));
    }
    return out;
}

namespace detail {

// Average ranks (1-based) with ties sharing their mean rank.
inline std::vector<double> midranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t s = 0; s < order.size();) {
        std::size_t e = s;
        while (e + 1 < order.size() && v[order[e + 1]] == v[order[s]]) ++e;
        const double mid = 0.5 * static_cast<double>(s + e) + 1.0;
        for (std::size_t k = s; k <= e; ++k) r[order[k]] = mid;
        s = e + 1;
    }
    return r;
}

class Fenwick {
public:
    explicit Fenwick(std::size_t n) : t_(n + 1, 0) {}
    void add(std::size_t i) {
        for (++i; i < t_.size(); i += i & (~i + 1)) ++t_[i];
    }
    // Number of entries with index < i.
    std::int64_t below(std::size_t i) const {
        std::int64_t s = 0;
        for (; i > 0; i -= i & (~i + 1)) s += t_[i];
        return s;
    }

private:
    std::vector<std::int64_t> t_;
};

}  // namespace detail

struct HoeffdingResult {
    double d{0.0};        // scaled so that Y = X gives 1
    std::size_t n{0};
    double null_sd{0.0};  // standard deviation of D under independence
};

// Hoeffding's D with midranks and the bivariate-rank tie convention
// (1/2 for a tie in one coordinate, 1/4 for a tie in both).
inline HoeffdingResult hoeffding_independence(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ContractViolation("hoeffding: samples differ in length");
    const std::size_t n = x.size();
    if (n < 30) throw ContractViolation("hoeffding needs at least 30 pairs, got " + std::to_string(n));
    const auto r = detail::midranks(x);
    const auto s = detail::midranks(y);

    // Dense integer ranks of y for the tree.
    std::vector<double> ys(y.begin(), y.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    std::vector<std::size_t> yr(n);
    for (std::size_t i = 0; i < n; ++i)
        yr[i] = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), y[i]) - ys.begin());

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] != x[b] ? x[a] < x[b] : yr[a] < yr[b];
    });
    std::vector<double> q(n);
    detail::Fenwick tree(ys.size());
    for (std::size_t g0 = 0; g0 < n;) {
        std::size_t g1 = g0;
        while (g1 < n && x[order[g1]] == x[order[g0]]) ++g1;
        // Within the x-tie group, entries are sorted by y rank.
        for (std::size_t a = g0; a < g1;) {
            std::size_t b = a;
            while (b < g1 && yr[order[b]] == yr[order[a]]) ++b;
            const auto yk = yr[order[a]];
            const double ll = static_cast<double>(tree.below(yk));
            const double le = static_cast<double>(tree.below(yk + 1) - tree.below(yk));
            const double el = static_cast<double>(a - g0);
            const double ee = static_cast<double>(b - a - 1);
            for (std::size_t k = a; k < b; ++k) q[order[k]] = 1.0 + ll + 0.5 * (le + el) + 0.25 * ee;
            a = b;
        }
        for (std::size_t k = g0; k < g1; ++k) tree.add(yr[order[k]]);
        g0 = g1;
    }

    long double d1 = 0, d2 = 0, d3 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const long double qi = q[i], ri = r[i], si = s[i];
        d1 += (qi - 1) * (qi - 2);
        d2 += (ri - 1) * (ri - 2) * (si - 1) * (si - 2);
        d3 += (ri - 2) * (si - 2) * (qi - 1);
    }
    const long double nn = static_cast<long double>(n);
    const long double num = (nn - 2) * (nn - 3) * d1 + d2 - 2 * (nn - 2) * d3;
    const long double den = nn * (nn - 1) * (nn - 2) * (nn - 3) * (nn - 4);
    HoeffdingResult res;
    res.n = n;
    res.d = static_cast<double>(30.0L * num / den);
    const double dn = static_cast<double>(n);
    res.null_sd = std::sqrt(2.0 * (dn * dn + 5.0 * dn - 32.0) / (9.0 * dn * (dn - 1.0) * (dn - 3.0) * (dn - 4.0)));
    return res;
}

// (size of an event of type e, number of further type-e events within the
// following window) for every event of type e.
inline std::pair<std::vector<double>, std::vector<double>> size_arrival_pairs(std::span<const EventRecord> events,
                                                                              EventType e, double window = 0.01) {
    std::vector<double> sizes, counts;
    std::vector<double> times;
    for (const auto& ev : events)
        if (ev.type == e) times.push_back(ev.time);
    for (const auto& ev : events) {
        if (ev.type != e) continue;
        const auto lo = std::upper_bound(times.begin(), times.end(), ev.time);
        const auto hi = std::upper_bound(times.begin(), times.end(), ev.time + window);
        sizes.push_back(static_cast<double>(ev.size));
        counts.push_back(static_cast<double>(hi - lo));
    }
    return {std::move(sizes), std::move(counts)};
}

}  // namespace chp

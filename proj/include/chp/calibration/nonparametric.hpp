#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chp/calibration/grid.hpp"
#include "chp/error.hpp"
#include "chp/event_type.hpp"
#include "chp/hawkes_model.hpp"
#include "chp/intensity.hpp"
#include "chp/kernel.hpp"

namespace chp {

struct NonParamOptions {
    double session_length{kNasdaqClose - kNasdaqOpen};
    double tod_bin_seconds{kDefaultTodBinSeconds};
    // In-spread target events are weighted by s^(-spread_beta); 0 disables.
    double spread_beta{0.0};
    std::int64_t min_events{50};
    double ridge{1e-8};
    bool standard_errors{false};
    std::string day_id;
};

// Piecewise-constant kernel estimates on a lag grid plus binned baselines.
struct NonParamEstimate {
    std::vector<double> edges;
    EventMatrix<std::vector<double>> values;  // [i][j][cell]
    PerEvent<std::vector<double>> baselines;  // [i][tod bin]
    // Approximate standard errors (Poisson approximation), empty unless requested.
    EventMatrix<std::vector<double>> value_se;
    PerEvent<std::vector<double>> baseline_se;

    std::string day_id;
    double session_length{0.0};
    double tod_bin_seconds{kDefaultTodBinSeconds};
    PerEvent<std::int64_t> counts{};
    std::vector<std::string> warnings;

    std::size_t num_cells() const { return edges.empty() ? 0 : edges.size() - 1; }
    std::size_t num_bins() const { return baselines[0].size(); }

    Kernel kernel(std::size_t i, std::size_t j) const { return Kernel::nonparametric(edges, values[i][j]); }

    double norm(std::size_t i, std::size_t j) const {
        double n = 0.0;
        for (std::size_t c = 0; c < num_cells(); ++c) n += values[i][j][c] * (edges[c + 1] - edges[c]);
        return n;
    }
};

namespace detail {

// Sums over pair lags d >= 0 of r(d - p) = max(0, d - p), for p any edge
// difference, from lag histograms on the partition by all edge differences.
class LagMoments {
public:
    LagMoments(const std::vector<double>& edges) : n_edges_(edges.size()) {
        struct Item {
            double v;
            std::size_t x, y;
        };
        std::vector<Item> items;
        for (std::size_t x = 0; x < n_edges_; ++x)
            for (std::size_t y = 0; y <= x; ++y) items.push_back({edges[x] - edges[y], x, y});
        std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.v < b.v; });
        breaks_.resize(items.size());
        slot_.assign(n_edges_ * n_edges_, 0);
        for (std::size_t m = 0; m < items.size(); ++m) {
            breaks_[m] = items[m].v;
            slot_[items[m].x * n_edges_ + items[m].y] = m;
        }
        // Equal values share the first slot so that suffix sums include all of them.
        for (std::size_t m = 1; m < items.size(); ++m)
            if (items[m].v == items[m - 1].v) slot_[items[m].x * n_edges_ + items[m].y] = slot_[items[m - 1].x * n_edges_ + items[m - 1].y];
    }

    std::size_t size() const { return breaks_.size(); }

    // Partition slot of a lag d >= 0.
    std::size_t locate(double d) const {
        auto it = std::upper_bound(breaks_.begin(), breaks_.end(), d);
        return static_cast<std::size_t>(it - breaks_.begin()) - 1;
    }

    // Turns per-slot counts and sums into suffix sums, in place.
    static void to_suffix(std::vector<long double>& n, std::vector<long double>& s) {
        for (std::size_t m = n.size() - 1; m-- > 0;) {
            n[m] += n[m + 1];
            s[m] += s[m + 1];
        }
    }

    // sum max(0, d - (e_x - e_y)) given suffix sums.
    long double ramp(const std::vector<double>& edges, std::size_t x, std::size_t y, const std::vector<long double>& n,
                     const std::vector<long double>& s) const {
        const long double p = static_cast<long double>(edges[x]) - static_cast<long double>(edges[y]);
        const std::size_t m = x >= y ? slot_[x * n_edges_ + y] : 0;
        return s[m] - p * n[m];
    }

private:
    std::size_t n_edges_;
    std::vector<double> breaks_;
    std::vector<std::size_t> slot_;
};

inline double interval_overlap(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

using Intervals = std::vector<std::pair<double, double>>;

// Stretches of [0, T) during which dimension i could not fire (zero factor),
// read from the book view before each event. Time after the last event is
// treated as open.
inline Intervals closed_intervals(std::span<const EventRecord> events, std::span<const BookView> views, EventType i,
                                  double T) {
    Intervals out;
    double prev = 0.0;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const double end = std::min(events[k].time, T);
        if (intensity_factor(i, views[k], 1.0) == 0.0 && end > prev) {
            if (!out.empty() && out.back().second == prev)
                out.back().second = end;
            else
                out.emplace_back(prev, end);
        }
        prev = std::max(prev, end);
    }
    return out;
}

inline Intervals complement(const Intervals& A, double T) {
    Intervals out;
    double prev = 0.0;
    for (const auto& [a, b] : A) {
        if (a > prev) out.emplace_back(prev, a);
        prev = b;
    }
    if (T > prev) out.emplace_back(prev, T);
    return out;
}

inline double total_length(const Intervals& A) {
    double m = 0.0;
    for (const auto& [a, b] : A) m += b - a;
    return m;
}

inline std::vector<Eigen::MatrixXd> restricted_grams(std::span<const EventRecord> events,
                                                    const std::vector<double>& edges, std::size_t nb, double bin,
                                                    double T, const std::vector<Intervals>& sets) {
    const std::size_t C = edges.size() - 1;
    const std::size_t dim = nb + kNumEventTypes * C;

    struct Change {
        double t;
        std::uint32_t r;
        int delta;
    };
    std::vector<Change> changes;
    changes.reserve(events.size() * (C + 1) + nb);
    for (std::size_t b = 1; b < nb; ++b) {
        const double t = static_cast<double>(b) * bin;
        changes.push_back({t, static_cast<std::uint32_t>(b - 1), -1});
        changes.push_back({t, static_cast<std::uint32_t>(b), +1});
    }
    for (const auto& e : events) {
        const std::size_t base = nb + index(e.type) * C;
        for (std::size_t c = 0; c <= C; ++c) {
            const double t = e.time + edges[c];
            if (!(t < T)) break;
            if (c > 0) changes.push_back({t, static_cast<std::uint32_t>(base + c - 1), -1});
            if (c < C) changes.push_back({t, static_cast<std::uint32_t>(base + c), +1});
        }
    }
    std::sort(changes.begin(), changes.end(), [](const Change& a, const Change& b) { return a.t < b.t; });

    // Per set: measure of A within [0, t], tracked with a moving cursor.
    struct Sweep {
        const Intervals* A;
        std::size_t cursor{0};
        double done{0.0};  // measure of the intervals before the cursor
        Eigen::MatrixXd G;
        Eigen::ArrayXd since;

        double measure(double t) {
            const auto& iv = *A;
            while (cursor < iv.size() && iv[cursor].second <= t) done += iv[cursor].second - iv[cursor].first, ++cursor;
            if (cursor < iv.size() && iv[cursor].first < t) return done + t - iv[cursor].first;
            return done;
        }
    };
    std::vector<Sweep> sweeps;
    for (const auto& A : sets)
        sweeps.push_back({&A, 0, 0.0, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)),
                          Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(dim))});

    Eigen::ArrayXd x = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(dim));
    x[0] = 1.0;
    // Column r only; the matrix is symmetrized at the end.
    auto flush = [&](Sweep& sw, std::size_t r, double m) {
        const auto ri = static_cast<Eigen::Index>(r);
        if (x[ri] == 0.0 || !(m > sw.since[ri])) return;
        const double sr = sw.since[ri];
        sw.G.col(ri).array() += x[ri] * x * (m - sw.since.max(sr)).max(0.0);
    };
    for (const auto& ch : changes) {
        for (auto& sw : sweeps) {
            const double m = sw.measure(ch.t);
            flush(sw, ch.r, m);
            sw.since[static_cast<Eigen::Index>(ch.r)] = m;
        }
        x[static_cast<Eigen::Index>(ch.r)] += ch.delta;
    }
    std::vector<Eigen::MatrixXd> out;
    for (auto& sw : sweeps) {
        const double mT = sw.measure(T);
        for (std::size_t r = 0; r < dim; ++r) {
            flush(sw, r, mT);
            sw.since[static_cast<Eigen::Index>(r)] = mT;
        }
        // Each stretch of a pair was credited to one side only.
        Eigen::MatrixXd sym = sw.G + sw.G.transpose();
        sym.diagonal() -= sw.G.diagonal();
        out.push_back(std::move(sym));
    }
    return out;
}

}  // namespace detail

// Least-squares estimate of a Hawkes model with piecewise-constant kernels on
// the grid cells and one baseline per time-of-day bin. The contrast
//   sum_i [ int_0^T lambda_i(t)^2 dt - 2 sum_{t_k in i} w_k lambda_i(t_k) ]
// is minimized exactly: its Gram matrix int X X^T dt over the regressors X
// (bin indicators and lagged event counts per cell) is assembled from
// pairwise lag histograms. Negative kernel values are kept.
inline NonParamEstimate estimate_nonparametric(std::span<const EventRecord> events, const EstimationGrid& grid,
                                               const NonParamOptions& opt = {}, std::span<const BookView> views = {}) {
    grid.validate();
    const double T = opt.session_length;
    if (!(T > 0.0) || !(opt.tod_bin_seconds > 0.0)) throw ContractViolation("session length and bin width must be positive");
    for (std::size_t k = 0; k < events.size(); ++k) {
        if (!(events[k].time >= 0.0) || !(events[k].time < T))
            throw ContractViolation("event time " + std::to_string(events[k].time) + " outside the session");
        if (k > 0 && events[k].time < events[k - 1].time) throw ContractViolation("events are not time-ordered");
    }

    NonParamEstimate est;
    est.edges = grid.edges();
    est.day_id = opt.day_id;
    est.session_length = T;
    est.tod_bin_seconds = opt.tod_bin_seconds;
    for (const auto& e : events) ++est.counts[index(e.type)];
    for (auto e : kAllEventTypes) {
        if (est.counts[index(e)] < opt.min_events)
            throw ContractViolation("insufficient events for " + std::string(name(e)) + ": " +
                                    std::to_string(est.counts[index(e)]) + " < " + std::to_string(opt.min_events));
    }

    const auto& edges = est.edges;
    const std::size_t C = edges.size() - 1;
    const double tau = edges.back();
    const auto nb = static_cast<std::size_t>(std::ceil(T / opt.tod_bin_seconds - 1e-9));
    const std::size_t nd = kNumEventTypes;
    const std::size_t dim = nb + nd * C;
    auto col = [&](std::size_t j, std::size_t c) { return nb + j * C + c; };
    auto bin_of = [&](double t) { return std::min(static_cast<std::size_t>(t / opt.tod_bin_seconds), nb - 1); };
    auto weight = [&](const EventRecord& e) {
        if (opt.spread_beta != 0.0 && is_in_spread(e.type) && e.spread_ticks >= 1)
            return std::pow(static_cast<double>(e.spread_ticks), -opt.spread_beta);
        return 1.0;
    };

    // Pass over all pairs (later k, earlier k') within the grid support.
    detail::LagMoments lags(edges);
    const std::size_t K = lags.size();
    std::vector<std::vector<long double>> hn(nd * nd), hs(nd * nd);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(nd));
    for (std::size_t k = 0; k < events.size(); ++k) {
        const auto& ek = events[k];
        const auto jk = index(ek.type);
        const double wk = weight(ek);
        B(static_cast<Eigen::Index>(bin_of(ek.time)), static_cast<Eigen::Index>(jk)) += wk;
        for (std::size_t kp = k; kp-- > 0;) {
            const auto& ep = events[kp];
            const double d = ek.time - ep.time;
            if (d > tau) break;
            const auto jp = index(ep.type);
            auto& n = hn[jk * nd + jp];
            auto& s = hs[jk * nd + jp];
            if (n.empty()) {
                n.assign(K, 0.0L);
                s.assign(K, 0.0L);
            }
            const auto m = lags.locate(d);
            n[m] += 1.0L;
            s[m] += d;
            if (d > 0.0) {
                const auto c = static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), d) - edges.begin()) - 1;
                B(static_cast<Eigen::Index>(col(jp, c)), static_cast<Eigen::Index>(jk)) += wk;
            }
        }
    }

    // Kernel block, accumulated as the "later x earlier" half A with G = A + A^T + D.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < nd; ++j) {
        for (std::size_t jp = 0; jp < nd; ++jp) {
            auto& n = hn[j * nd + jp];
            auto& s = hs[j * nd + jp];
            if (n.empty()) continue;
            detail::LagMoments::to_suffix(n, s);
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t cp = 0; cp < C; ++cp) {
                    const long double f = lags.ramp(edges, cp, c + 1, n, s) - lags.ramp(edges, cp, c, n, s) -
                                          lags.ramp(edges, cp + 1, c + 1, n, s) + lags.ramp(edges, cp + 1, c, n, s);
                    G(static_cast<Eigen::Index>(col(j, c)), static_cast<Eigen::Index>(col(jp, cp))) += static_cast<double>(f);
                }
            }
            std::vector<long double>().swap(n);
            std::vector<long double>().swap(s);
        }
    }

    // Remove the parts of those overlaps that fall after the session end.
    for (std::size_t k = events.size(); k-- > 0;) {
        const auto& ek = events[k];
        if (!(ek.time + tau > T)) break;
        const auto jk = index(ek.type);
        for (std::size_t kp = k + 1; kp-- > 0;) {
            const auto& ep = events[kp];
            if (!(ek.time - ep.time < tau)) break;
            const auto jp = index(ep.type);
            for (std::size_t c = 0; c < C; ++c) {
                const double a0 = std::max(ek.time + edges[c], T);
                const double a1 = ek.time + edges[c + 1];
                if (!(a1 > a0)) continue;
                if (kp == k) {
                    G(static_cast<Eigen::Index>(col(jk, c)), static_cast<Eigen::Index>(col(jk, c))) -= 0.5 * (a1 - a0);
                    continue;
                }
                const double l0 = a0 - ep.time, l1 = a1 - ep.time;
                if (!(l0 < tau)) break;
                auto cp = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), l0) - edges.begin()) - 1;
                for (; cp < C && edges[cp] < l1; ++cp) {
                    const double ov = detail::interval_overlap(l0, l1, edges[cp], edges[cp + 1]);
                    G(static_cast<Eigen::Index>(col(jk, c)), static_cast<Eigen::Index>(col(jp, cp))) -= ov;
                }
            }
        }
    }
    G = (G + G.transpose()).eval();
    for (const auto& e : events) {
        const auto j = index(e.type);
        for (std::size_t c = 0; c < C; ++c)
            G(static_cast<Eigen::Index>(col(j, c)), static_cast<Eigen::Index>(col(j, c))) += edges[c + 1] - edges[c];
    }

    // Bin indicator columns.
    for (std::size_t b = 0; b < nb; ++b) {
        const double b0 = static_cast<double>(b) * opt.tod_bin_seconds;
        const double b1 = std::min(T, static_cast<double>(b + 1) * opt.tod_bin_seconds);
        G(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)) = std::max(0.0, b1 - b0);
    }
    for (const auto& e : events) {
        const auto j = index(e.type);
        for (std::size_t c = 0; c < C; ++c) {
            const double a0 = e.time + edges[c];
            const double a1 = std::min(e.time + edges[c + 1], T);
            if (!(a1 > a0)) break;
            for (auto b = bin_of(a0); b < nb; ++b) {
                const double b0 = static_cast<double>(b) * opt.tod_bin_seconds;
                if (!(b0 < a1)) break;
                const double b1 = b + 1 == nb ? T : static_cast<double>(b + 1) * opt.tod_bin_seconds;
                const double ov = detail::interval_overlap(a0, a1, b0, b1);
                const auto r = static_cast<Eigen::Index>(b), q = static_cast<Eigen::Index>(col(j, c));
                G(r, q) += ov;
                G(q, r) += ov;
            }
        }
    }

    // A dimension cannot fire while its factor is zero (locked book for the
    // in-spread orders, empty queue for cancels and market orders); its
    // target uses the Gram matrix restricted to the remaining time. Types
    // with the same closed set share one matrix.
    if (!views.empty() && views.size() != events.size()) throw ContractViolation("one book view per event is required");
    std::vector<BookView> derived;
    if (views.empty()) {
        derived.resize(events.size());
        for (std::size_t k = 0; k < events.size(); ++k) derived[k].spread_ticks = events[k].spread_ticks < 0 ? 1 : events[k].spread_ticks;
        views = derived;
    }
    std::vector<detail::Intervals> closed_sets;
    PerEvent<std::size_t> group{};  // 0: unrestricted, g: closed_sets[g - 1]
    for (auto e : kAllEventTypes) {
        auto closed = detail::closed_intervals(events, views, e, T);
        if (closed.empty()) continue;
        auto it = std::find(closed_sets.begin(), closed_sets.end(), closed);
        if (it == closed_sets.end()) it = closed_sets.insert(closed_sets.end(), std::move(closed));
        group[index(e)] = static_cast<std::size_t>(it - closed_sets.begin()) + 1;
    }
    std::vector<Eigen::MatrixXd> restricted;
    if (!closed_sets.empty()) {
        // Sweep whichever of A and its complement is shorter.
        std::vector<detail::Intervals> sweep_sets;
        std::vector<bool> flipped;
        for (const auto& A : closed_sets) {
            flipped.push_back(detail::total_length(A) > 0.5 * T);
            sweep_sets.push_back(flipped.back() ? detail::complement(A, T) : A);
        }
        restricted = detail::restricted_grams(events, edges, nb, opt.tod_bin_seconds, T, sweep_sets);
        for (std::size_t g = 0; g < restricted.size(); ++g)
            if (!flipped[g]) restricted[g] = G - restricted[g];
    }
    derived.clear();

    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(nd));
    PerEvent<Eigen::VectorXd> full_diag;
    auto solve = [&](const Eigen::MatrixXd& Gm, const std::vector<std::size_t>& targets, bool report_bins) {
        // Drop regressors without exposure.
        std::vector<Eigen::Index> keep;
        for (std::size_t p = 0; p < dim; ++p) {
            if (Gm(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)) > 0.0)
                keep.push_back(static_cast<Eigen::Index>(p));
            else if (p < nb && report_bins)
                est.warnings.push_back("tod bin " + std::to_string(p + 1) + " has no exposure; baseline set to 0");
        }
        const auto nk = static_cast<Eigen::Index>(keep.size());
        const auto nt = static_cast<Eigen::Index>(targets.size());
        Eigen::MatrixXd Gr(nk, nk), Br(nk, nt);
        for (Eigen::Index a = 0; a < nk; ++a) {
            for (Eigen::Index t = 0; t < nt; ++t)
                Br(a, t) = B(keep[static_cast<std::size_t>(a)], static_cast<Eigen::Index>(targets[static_cast<std::size_t>(t)]));
            for (Eigen::Index b = 0; b < nk; ++b)
                Gr(a, b) = Gm(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
        }

        Eigen::MatrixXd theta;
        Eigen::LLT<Eigen::MatrixXd> llt(Gr);
        bool solved = llt.info() == Eigen::Success;
        if (solved) {
            theta = llt.solve(Br);
            solved = theta.allFinite();
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt;
        if (!solved) {
            const double r = opt.ridge * Gr.trace();
            Gr.diagonal().array() += r;
            est.warnings.push_back("singular design matrix; ridge " + std::to_string(r) + " added");
            ldlt.compute(Gr);
            theta = ldlt.solve(Br);
        }

        Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
        if (opt.standard_errors) {
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nk, nk);
            const Eigen::MatrixXd ginv = solved ? Eigen::MatrixXd(llt.solve(eye)) : Eigen::MatrixXd(ldlt.solve(eye));
            for (Eigen::Index a = 0; a < nk; ++a) diag(keep[static_cast<std::size_t>(a)]) = ginv(a, a);
        }
        for (Eigen::Index t = 0; t < nt; ++t) {
            const auto i = targets[static_cast<std::size_t>(t)];
            for (Eigen::Index a = 0; a < nk; ++a) full(keep[static_cast<std::size_t>(a)], static_cast<Eigen::Index>(i)) = theta(a, t);
            full_diag[i] = diag;
        }
    };
    for (std::size_t g = 0; g <= closed_sets.size(); ++g) {
        std::vector<std::size_t> targets;
        for (std::size_t i = 0; i < nd; ++i)
            if (group[i] == g) targets.push_back(i);
        if (!targets.empty()) solve(g == 0 ? G : restricted[g - 1], targets, g == 0);
    }
    G.resize(0, 0);
    restricted.clear();

    for (std::size_t i = 0; i < nd; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double rate = static_cast<double>(est.counts[i]) / T;
        est.baselines[i].resize(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            double mu = full(static_cast<Eigen::Index>(b), ii);
            if (mu < 0.0) {
                est.warnings.push_back("negative baseline " + std::to_string(mu) + " for " +
                                       std::string(name(event_type_from_index(i))) + " bin " + std::to_string(b + 1) +
                                       " projected to 0");
                mu = 0.0;
            }
            est.baselines[i][b] = mu;
        }
        if (opt.standard_errors) {
            est.baseline_se[i].resize(nb);
            for (std::size_t b = 0; b < nb; ++b)
                est.baseline_se[i][b] = std::sqrt(rate * full_diag[i](static_cast<Eigen::Index>(b)));
        }
        for (std::size_t j = 0; j < nd; ++j) {
            auto& v = est.values[i][j];
            v.resize(C);
            for (std::size_t c = 0; c < C; ++c) v[c] = full(static_cast<Eigen::Index>(col(j, c)), ii);
            if (opt.standard_errors) {
                auto& se = est.value_se[i][j];
                se.resize(C);
                for (std::size_t c = 0; c < C; ++c)
                    se[c] = std::sqrt(rate * full_diag[i](static_cast<Eigen::Index>(col(j, c))));
            }
        }
    }
    return est;
}

}  // namespace chp

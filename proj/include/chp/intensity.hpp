#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <span>
#include <vector>

#include "chp/event_type.hpp"
#include "chp/hawkes_model.hpp"
#include "chp/kernel.hpp"
#include "chp/lob.hpp"

namespace chp {

// The parts of the book that intensities depend on.
struct BookView {
    std::int64_t spread_ticks{1};
    std::array<bool, kNumQueues> nonempty{true, true, false, false, true, true};

    static BookView of(const BookState& s) {
        BookView v;
        v.spread_ticks = s.spread_ticks();
        for (auto q : kAllQueues) v.nonempty[index(q)] = !s[q].empty();
        return v;
    }
};

// Multiplier applied to the floored intensity of dimension i in a given book:
// s^beta for the in-spread dimensions, 0 for cancels and market orders whose
// queue is empty, 1 otherwise.
inline double intensity_factor(EventType i, const BookView& book, double spread_beta) {
    if (is_in_spread(i)) {
        if (book.spread_ticks <= 0) return 0.0;
        return book.spread_ticks == 1 ? 1.0 : std::pow(static_cast<double>(book.spread_ticks), spread_beta);
    }
    if (kind(i) != OrderKind::Limit && !book.nonempty[index(target_queue(i))]) return 0.0;
    return 1.0;
}

inline double effective_from_raw(EventType i, double raw, const BookView& book, double spread_beta) {
    const double f = intensity_factor(i, book, spread_beta);
    return f == 0.0 ? 0.0 : std::max(raw, 0.0) * f;
}

inline double effective_intensity(EventType i, double t, std::span<const EventRecord> history,
                                  const HawkesModel& model, const BookView& book) {
    return effective_from_raw(i, raw_intensity(i, t, history, model), book, model.spread_beta);
}

struct IntensityOptions {
    // Events older than this stop contributing through non-exponential
    // kernels. Exponential kernels are always evaluated exactly.
    double memory{std::numeric_limits<double>::infinity()};
};

// Upper bound on the summed effective intensity over [t, window_end] when no
// new events arrive: positive kernel parts at their supremum plus the largest
// baseline met in the window.
inline double total_intensity_bound(double t, double window_end, std::span<const EventRecord> history,
                                    const HawkesModel& model, const BookView& book) {
    double total = 0.0;
    const double last = std::min(window_end, std::nextafter(model.session_length(), 0.0));
    const auto b0 = model.bin_index(t);
    const auto b1 = model.bin_index(std::max(t, last));
    for (auto i : kAllEventTypes) {
        const double f = intensity_factor(i, book, model.spread_beta);
        if (f == 0.0) continue;
        double mu = 0.0;
        for (auto b = b0; b <= b1; ++b) mu = std::max(mu, model.baselines[index(i)][b]);
        double exc = 0.0;
        for (const auto& ev : history) {
            if (!(ev.time < t)) break;
            exc += model.kernels[index(i)][index(ev.type)].positive_sup_from(t - ev.time);
        }
        total += (mu + exc) * f;
    }
    return total;
}

// Incremental evaluation of all twelve raw intensities along a time-ordered
// event stream. Exponential kernels are folded into decaying accumulators
// grouped by decay rate; other kernels keep the relevant event times.
class IntensityState {
public:
    explicit IntensityState(const HawkesModel& model, IntensityOptions opt = {}) : model_(&model), opt_(opt) {
        for (std::size_t i = 0; i < kNumEventTypes; ++i) {
            for (std::size_t j = 0; j < kNumEventTypes; ++j) {
                const auto& k = model.kernels[i][j];
                if (k.is_zero()) continue;
                if (const auto* e = k.as_exponential()) {
                    auto it = std::find(rates_.begin(), rates_.end(), e->beta);
                    std::size_t g = static_cast<std::size_t>(it - rates_.begin());
                    if (it == rates_.end()) rates_.push_back(e->beta);
                    exp_links_[j].push_back({i, g, e->alpha});
                } else {
                    HistLink link{i, &k, std::min(k.support(), opt_.memory), {}};
                    if (const auto* np = k.as_nonparametric()) {
                        link.suffix_max.assign(np->values.size() + 1, 0.0);
                        for (std::size_t c = np->values.size(); c-- > 0;)
                            link.suffix_max[c] = std::max(link.suffix_max[c + 1], np->values[c]);
                    }
                    horizon_[j] = std::max(horizon_[j], link.cutoff);
                    hist_links_[j].push_back(std::move(link));
                }
            }
        }
        pos_.assign(kNumEventTypes * rates_.size(), 0.0);
        neg_.assign(kNumEventTypes * rates_.size(), 0.0);
        decay_.assign(rates_.size(), 1.0);
    }

    double now() const { return now_; }
    const HawkesModel& model() const { return *model_; }

    // Moves the clock forward without events.
    void advance_to(double t) {
        if (t <= now_) return;
        const double dt = t - now_;
        for (std::size_t g = 0; g < rates_.size(); ++g) decay_[g] = std::exp(-rates_[g] * dt);
        if (!rates_.empty()) {
            for (std::size_t i = 0; i < kNumEventTypes; ++i) {
                double* p = &pos_[i * rates_.size()];
                double* n = &neg_[i * rates_.size()];
                for (std::size_t g = 0; g < rates_.size(); ++g) {
                    p[g] *= decay_[g];
                    n[g] *= decay_[g];
                }
            }
        }
        now_ = t;
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            auto& h = history_[j];
            while (!h.empty() && now_ - h.front() >= horizon_[j]) h.pop_front();
        }
    }

    // Registers an event of type j at the current time.
    void record(EventType j) {
        const auto jj = index(j);
        const std::size_t ng = rates_.size();
        for (const auto& l : exp_links_[jj]) {
            if (l.alpha > 0.0)
                pos_[l.target * ng + l.group] += l.alpha;
            else
                neg_[l.target * ng + l.group] += l.alpha;
        }
        if (!hist_links_[jj].empty()) history_[jj].push_back(now_);
    }

    // Kernel contributions (no baseline) to dimension i at the current time.
    double excitation(std::size_t i) const { return excitation_at(i, 0.0); }

    double raw(std::size_t i) const { return baseline_now(i) + excitation(i); }

    PerEvent<double> raw_all() const {
        PerEvent<double> r{};
        for (std::size_t i = 0; i < kNumEventTypes; ++i) r[i] = raw(i);
        return r;
    }

    // sup over t >= now of the positive kernel part for dimension i.
    double positive_excitation_bound(std::size_t i) const {
        double acc = 0.0;
        const std::size_t ng = rates_.size();
        for (std::size_t g = 0; g < ng; ++g) acc += pos_[i * ng + g];
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            for (const auto& l : hist_links_[j]) {
                if (l.target != i) continue;
                for (double tj : history_[j]) acc += positive_sup(l, now_ - tj);
            }
        }
        return acc;
    }

    // Thinning majorant over [now, window_end) for a fixed book, where the
    // window does not cross a time-of-day boundary.
    double bound(const BookView& book) const {
        double total = 0.0;
        for (std::size_t i = 0; i < kNumEventTypes; ++i) {
            const double f = intensity_factor(event_type_from_index(i), book, model_->spread_beta);
            if (f == 0.0) continue;
            total += (baseline_now(i) + positive_excitation_bound(i)) * f;
        }
        return total;
    }

    // Integral of max(0, raw_i) over [now, now + length], assuming no events
    // and no baseline change in between.
    double integrate_floored(std::size_t i, double length) const {
        if (length <= 0.0) return 0.0;
        return integrate_piece(i, baseline_now(i), 0.0, length, 0);
    }

    // Same without flooring (closed form).
    double integrate_raw(std::size_t i, double length) const {
        return baseline_now(i) * length + kernel_integral(i, 0.0, length);
    }

private:
    struct ExpLink {
        std::size_t target;
        std::size_t group;
        double alpha;
    };
    struct HistLink {
        std::size_t target;
        const Kernel* kernel;
        double cutoff;
        std::vector<double> suffix_max;  // nonparametric only
    };

    double baseline_now(std::size_t i) const {
        const auto& m = *model_;
        const double t = std::min(now_, std::nextafter(m.session_length(), 0.0));
        return m.baselines[i][m.bin_index(std::max(t, 0.0))];
    }

    static double truncated_value(const HistLink& l, double u) { return u < l.cutoff ? l.kernel->value(u) : 0.0; }

    static double positive_sup(const HistLink& l, double u) {
        if (u >= l.cutoff) return 0.0;
        if (const auto* np = l.kernel->as_nonparametric()) {
            if (u < np->edges.front()) return std::max(0.0, l.suffix_max.front());
            auto it = std::upper_bound(np->edges.begin(), np->edges.end(), u);
            const auto c = static_cast<std::size_t>(it - np->edges.begin()) - 1;
            return std::max(0.0, l.suffix_max[std::min(c, l.suffix_max.size() - 1)]);
        }
        return std::max(0.0, l.kernel->value(u));
    }

    double excitation_at(std::size_t i, double x) const {
        double acc = 0.0;
        const std::size_t ng = rates_.size();
        for (std::size_t g = 0; g < ng; ++g) {
            const double s = pos_[i * ng + g] + neg_[i * ng + g];
            if (s != 0.0) acc += x == 0.0 ? s : s * std::exp(-rates_[g] * x);
        }
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            for (const auto& l : hist_links_[j]) {
                if (l.target != i) continue;
                for (double tj : history_[j]) acc += truncated_value(l, now_ + x - tj);
            }
        }
        return acc;
    }

    double kernel_integral(std::size_t i, double x0, double x1) const {
        double acc = 0.0;
        const std::size_t ng = rates_.size();
        for (std::size_t g = 0; g < ng; ++g) {
            const double s = pos_[i * ng + g] + neg_[i * ng + g];
            if (s != 0.0)
                acc += s * std::exp(-rates_[g] * x0) * -std::expm1(-rates_[g] * (x1 - x0)) / rates_[g];
        }
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            for (const auto& l : hist_links_[j]) {
                if (l.target != i) continue;
                for (double tj : history_[j]) {
                    const double u0 = now_ + x0 - tj;
                    const double u1 = std::min(now_ + x1 - tj, l.cutoff);
                    if (u1 > u0) acc += l.kernel->integral(u0, u1);
                }
            }
        }
        return acc;
    }

    KernelBounds raw_bounds(std::size_t i, double mu, double x0, double x1) const {
        double lo = mu, hi = mu;
        const std::size_t ng = rates_.size();
        for (std::size_t g = 0; g < ng; ++g) {
            const double p = pos_[i * ng + g], n = neg_[i * ng + g];
            if (p == 0.0 && n == 0.0) continue;
            const double d0 = std::exp(-rates_[g] * x0), d1 = std::exp(-rates_[g] * x1);
            lo += p * d1 + n * d0;
            hi += p * d0 + n * d1;
        }
        for (std::size_t j = 0; j < kNumEventTypes; ++j) {
            for (const auto& l : hist_links_[j]) {
                if (l.target != i) continue;
                for (double tj : history_[j]) {
                    const double u0 = now_ + x0 - tj, u1 = now_ + x1 - tj;
                    if (u0 >= l.cutoff) continue;
                    auto b = l.kernel->bounds(u0, std::min(u1, l.cutoff));
                    if (u1 >= l.cutoff) {
                        b.lo = std::min(b.lo, 0.0);
                        b.hi = std::max(b.hi, 0.0);
                    }
                    lo += b.lo;
                    hi += b.hi;
                }
            }
        }
        return {lo, hi};
    }

    double integrate_piece(std::size_t i, double mu, double x0, double x1, int depth) const {
        const auto b = raw_bounds(i, mu, x0, x1);
        if (b.lo >= 0.0) return mu * (x1 - x0) + kernel_integral(i, x0, x1);
        if (b.hi <= 0.0) return 0.0;
        const double xm = 0.5 * (x0 + x1);
        if (depth >= 48 || x1 - x0 < 1e-12)
            return (x1 - x0) * std::max(0.0, mu + excitation_at(i, xm));
        return integrate_piece(i, mu, x0, xm, depth + 1) + integrate_piece(i, mu, xm, x1, depth + 1);
    }

    const HawkesModel* model_;
    IntensityOptions opt_;
    double now_{0.0};

    std::vector<double> rates_;
    std::vector<double> pos_, neg_, decay_;
    std::array<std::vector<ExpLink>, kNumEventTypes> exp_links_;
    std::array<std::vector<HistLink>, kNumEventTypes> hist_links_;
    std::array<std::deque<double>, kNumEventTypes> history_;
    std::array<double, kNumEventTypes> horizon_{};
};

}  // namespace chp

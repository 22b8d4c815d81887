#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chp/error.hpp"
#include "chp/event_type.hpp"
#include "chp/hawkes_model.hpp"
#include "chp/intensity.hpp"
#include "chp/lob.hpp"
#include "chp/rng.hpp"
#include "chp/size_model.hpp"

namespace chp {

// Book summary after an event.
struct BookSnapshot {
    double time{0.0};
    EventType type{EventType::LoAsk0};
    std::int64_t size{0};
    std::int64_t ask0_price{0};
    std::int64_t bid0_price{0};
    std::int64_t ask0_depth{0};
    std::int64_t bid0_depth{0};
    std::int64_t spread_ticks{0};
    std::int64_t ask_plus1_depth{0};
    std::int64_t bid_minus1_depth{0};

    static BookSnapshot of(const EventRecord& ev, const BookState& s) {
        return {ev.time,
                ev.type,
                ev.size,
                s[QueueKey::Ask0].price,
                s[QueueKey::Bid0].price,
                s[QueueKey::Ask0].depth(),
                s[QueueKey::Bid0].depth(),
                s.spread_ticks(),
                s[QueueKey::AskPlus1].depth(),
                s[QueueKey::BidMinus1].depth()};
    }

    BookView view() const {
        BookView v;
        v.spread_ticks = spread_ticks;
        v.nonempty = {ask_plus1_depth > 0, ask0_depth > 0, false, false, bid0_depth > 0, bid_minus1_depth > 0};
        return v;
    }

    friend bool operator==(const BookSnapshot&, const BookSnapshot&) = default;
};

struct SimulationOptions {
    IntensityOptions intensity{};
    // A rejected candidate further than this from the last majorant
    // evaluation triggers a refresh.
    double staleness{0.1};
    std::int64_t max_events{std::numeric_limits<std::int64_t>::max()};
};

struct SimulationStats {
    std::int64_t accepted{0};
    std::int64_t candidates{0};
};

struct SimulationResult {
    std::vector<EventRecord> events;
    std::vector<BookSnapshot> trajectory;  // state after each event
    SimulationStats stats;
};

// Ogata thinning of the floored, spread-scaled 12-D process coupled to the
// book. Per accepted candidate the random draws happen in a fixed order:
// candidate time, acceptance uniform, type, size (or cancel target), depth of
// any revealed level. Sink is called as sink(event, apply_result, book_after).
template <typename Sink>
SimulationStats simulate_stream(const HawkesModel& model, const PerEvent<SizeDistribution>& sizes,
                                const DepthDistribution& depth, const BookState& initial, double horizon,
                                std::uint64_t seed, Sink&& sink, const SimulationOptions& opt = {}) {
    model.validate();
    if (const double rho = spectral_radius(model); !(rho < 1.0))
        throw ContractViolation("unstable model: spectral radius of |kernel norms| is " + std::to_string(rho));
    if (!(horizon >= 0.0) || horizon > model.session_length())
        throw ContractViolation("horizon must lie in [0, session length]");
    initial.validate();
    for (auto e : kAllEventTypes)
        if (has_size_distribution(e)) sizes[index(e)].validate();

    Rng rng(seed);
    IntensityState state(model, opt.intensity);
    BookState book = initial;
    BookView view = BookView::of(book);
    SimulationStats stats;
    PerEvent<double> eff{};

    double t = 0.0;
    while (t < horizon && stats.accepted < opt.max_events) {
        const double seg_end = std::min(model.next_bin_boundary(t), horizon);
        double bound = state.bound(view);
        double bound_time = t;
        while (stats.accepted < opt.max_events) {
            if (!(bound > 0.0)) {
                t = seg_end;
                break;
            }
            const double cand = t + rng.exponential() / bound;
            if (cand >= seg_end) {
                t = seg_end;
                break;
            }
            ++stats.candidates;
            state.advance_to(cand);
            t = cand;
            double total = 0.0;
            for (std::size_t i = 0; i < kNumEventTypes; ++i) {
                eff[i] = effective_from_raw(event_type_from_index(i), state.raw(i), view, model.spread_beta);
                total += eff[i];
            }
            if (total > bound * (1.0 + 1e-9) + 1e-12)
                throw std::logic_error("thinning majorant violated at t=" + std::to_string(t));
            const double u = rng.uniform();
            if (u * bound >= total) {
                if (t - bound_time > opt.staleness) {
                    bound = state.bound(view);
                    bound_time = t;
                }
                continue;
            }

            const auto type = event_type_from_index(rng.categorical(eff, total));
            EventRecord ev;
            ev.time = t;
            ev.type = type;
            ev.spread_ticks = static_cast<std::int32_t>(view.spread_ticks);
            if (kind(type) == OrderKind::Cancel) {
                ev.order_id = select_cancel_target(book, target_queue(type), rng);
            } else {
                ev.size = sizes[index(type)].sample(rng);
            }
            const auto res = apply_event_in_place(book, ev, depth, rng);
            ev.size = res.applied_size;
            if (kind(type) != OrderKind::Market) ev.order_id = res.order_id;
            state.record(type);
            view = BookView::of(book);
            ++stats.accepted;
            sink(std::as_const(ev), res, std::as_const(book));
            bound = state.bound(view);
            bound_time = t;
        }
        state.advance_to(t);
    }
    return stats;
}

inline SimulationResult simulate(const HawkesModel& model, const PerEvent<SizeDistribution>& sizes,
                                 const DepthDistribution& depth, const BookState& initial, double horizon,
                                 std::uint64_t seed, const SimulationOptions& opt = {}) {
    SimulationResult out;
    out.stats = simulate_stream(
        model, sizes, depth, initial, horizon, seed,
        [&](const EventRecord& ev, const ApplyResult&, const BookState& book) {
            out.events.push_back(ev);
            out.trajectory.push_back(BookSnapshot::of(ev, book));
        },
        opt);
    return out;
}

}  // namespace chp

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chp/error.hpp"
#include "chp/event_type.hpp"
#include "chp/rng.hpp"

namespace chp {

struct RestingOrder {
    std::int64_t id{0};
    std::int64_t size{0};

    friend bool operator==(const RestingOrder&, const RestingOrder&) = default;
};

// One price level. Orders are kept in arrival (time-priority) order.
struct Queue {
    std::int64_t price{0};  // ticks
    std::vector<RestingOrder> orders;

    std::int64_t depth() const {
        return std::accumulate(orders.begin(), orders.end(), std::int64_t{0},
                               [](std::int64_t acc, const RestingOrder& o) { return acc + o.size; });
    }
    bool empty() const { return orders.empty(); }

    friend bool operator==(const Queue&, const Queue&) = default;
};

// Stationary distribution of the depth found at a newly revealed price level.
class DepthDistribution {
public:
    DepthDistribution() : DepthDistribution({100}, {1.0}) {}

    DepthDistribution(std::vector<std::int64_t> values, std::vector<double> weights)
        : values_(std::move(values)), weights_(std::move(weights)) {
        if (values_.empty() || values_.size() != weights_.size())
            throw ContractViolation("depth distribution needs matching non-empty values and weights");
        double total = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) {
            if (values_[k] < 1) throw ContractViolation("depth values must be positive integers");
            if (!(weights_[k] >= 0.0)) throw ContractViolation("depth weights must be non-negative");
            total += weights_[k];
        }
        if (!(total > 0.0)) throw ContractViolation("depth weights sum to zero");
        for (auto& w : weights_) w /= total;
    }

    // Empirical distribution of observed depths.
    static DepthDistribution from_samples(std::span<const std::int64_t> samples) {
        std::vector<std::int64_t> sorted(samples.begin(), samples.end());
        std::sort(sorted.begin(), sorted.end());
        std::vector<std::int64_t> values;
        std::vector<double> weights;
        for (auto v : sorted) {
            if (v < 1) continue;
            if (!values.empty() && values.back() == v) {
                weights.back() += 1.0;
            } else {
                values.push_back(v);
                weights.push_back(1.0);
            }
        }
        if (values.empty()) throw ContractViolation("no positive depth samples");
        return {std::move(values), std::move(weights)};
    }

    std::int64_t sample(Rng& rng) const {
        return values_[rng.categorical(weights_, 1.0)];
    }

    double mean() const {
        double m = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) m += weights_[k] * static_cast<double>(values_[k]);
        return m;
    }

    const std::vector<std::int64_t>& values() const { return values_; }
    const std::vector<double>& weights() const { return weights_; }

private:
    std::vector<std::int64_t> values_;
    std::vector<double> weights_;
};

// The six-queue book: ask+1, ask0, ask-1, bid+1, bid0, bid-1.
// ask-1 and bid+1 are the empty in-spread levels next to the best quotes.
struct BookState {
    std::array<Queue, kNumQueues> queues;
    double tick_size{0.01};
    std::int64_t next_order_id{1};

    Queue& operator[](QueueKey k) { return queues[index(k)]; }
    const Queue& operator[](QueueKey k) const { return queues[index(k)]; }

    std::int64_t spread_ticks() const { return (*this)[QueueKey::Ask0].price - (*this)[QueueKey::Bid0].price; }

    // Book with one resting order per populated level.
    static BookState make(std::int64_t bid0_price, std::int64_t spread_ticks, std::int64_t depth,
                          double tick_size = 0.01) {
        BookState s;
        s.tick_size = tick_size;
        const std::int64_t ask0 = bid0_price + spread_ticks;
        s[QueueKey::AskPlus1].price = ask0 + 1;
        s[QueueKey::Ask0].price = ask0;
        s[QueueKey::AskMinus1].price = ask0 - 1;
        s[QueueKey::BidPlus1].price = bid0_price + 1;
        s[QueueKey::Bid0].price = bid0_price;
        s[QueueKey::BidMinus1].price = bid0_price - 1;
        for (auto k : {QueueKey::AskPlus1, QueueKey::Ask0, QueueKey::Bid0, QueueKey::BidMinus1})
            s[k].orders.push_back({s.next_order_id++, depth});
        return s;
    }

    // Throws ContractViolation when a structural invariant fails.
    void validate() const {
        const auto ask0 = (*this)[QueueKey::Ask0].price;
        const auto bid0 = (*this)[QueueKey::Bid0].price;
        if (ask0 < bid0) throw ContractViolation("crossed book: ask0 below bid0");
        if ((*this)[QueueKey::AskPlus1].price != ask0 + 1 || (*this)[QueueKey::AskMinus1].price != ask0 - 1 ||
            (*this)[QueueKey::BidPlus1].price != bid0 + 1 || (*this)[QueueKey::BidMinus1].price != bid0 - 1)
            throw ContractViolation("queue prices are not adjacent to the best quotes");
        if (!(*this)[QueueKey::AskMinus1].empty() || !(*this)[QueueKey::BidPlus1].empty())
            throw ContractViolation("in-spread queues must be empty");
        if ((*this)[QueueKey::Ask0].empty() || (*this)[QueueKey::Bid0].empty())
            throw ContractViolation("best queues must be non-empty");
        for (const auto& q : queues)
            for (const auto& o : q.orders)
                if (o.size < 1) throw ContractViolation("resting order with non-positive size");
    }

    friend bool operator==(const BookState&, const BookState&) = default;
};

// Whether an event can be applied to the book at all.
inline bool is_applicable(const BookState& s, EventType e) {
    switch (kind(e)) {
        case OrderKind::Limit: return !is_in_spread(e) || s.spread_ticks() >= 1;
        case OrderKind::Cancel:
        case OrderKind::Market: return !s[target_queue(e)].empty();
    }
    return false;
}

struct MarketOrderEffect {
    std::vector<RestingOrder> consumed;  // full or partial fills, in time priority
    std::int64_t executed{0};
    bool depleted{false};
};

// Fills a market order against the best queue of a side. Quantity beyond the
// queue's depth is discarded: the book never walks past one level.
inline MarketOrderEffect mo_size_effect(const BookState& s, Side side, std::int64_t mo_size) {
    if (mo_size < 1) throw ContractViolation("market order size must be >= 1");
    const auto& q = s[side == Side::Ask ? QueueKey::Ask0 : QueueKey::Bid0];
    MarketOrderEffect fx;
    std::int64_t remaining = mo_size;
    for (const auto& o : q.orders) {
        if (remaining == 0) break;
        const auto take = std::min(remaining, o.size);
        fx.consumed.push_back({o.id, take});
        fx.executed += take;
        remaining -= take;
    }
    fx.depleted = fx.executed == q.depth();
    return fx;
}

// Uniform draw over the resting orders of a queue (outright cancel target).
inline std::int64_t select_cancel_target(const BookState& s, QueueKey key, Rng& rng) {
    const auto& q = s[key];
    if (q.empty()) throw ContractViolation("cancel on empty queue " + std::string(name(key)));
    return q.orders[rng.index(q.orders.size())].id;
}

// What apply_event did, beyond the new state.
struct ApplyResult {
    std::int64_t applied_size{0};  // after market-order truncation / cancel lookup
    std::int64_t order_id{0};
    int revealed_levels{0};        // levels re-veiled from the depth distribution
    std::vector<RestingOrder> fills;  // market orders: (resting id, quantity taken)
};

namespace detail {

// ask0 emptied: the book shifts outward by one level and a new outer level is
// revealed with depth drawn from the depth distribution.
inline int deplete(BookState& s, Side side, const DepthDistribution& depth, Rng& rng) {
    const bool ask = side == Side::Ask;
    const auto best = ask ? QueueKey::Ask0 : QueueKey::Bid0;
    const auto outer = ask ? QueueKey::AskPlus1 : QueueKey::BidMinus1;
    const auto inner = ask ? QueueKey::AskMinus1 : QueueKey::BidPlus1;
    const std::int64_t step = ask ? 1 : -1;
    int revealed = 0;
    while (s[best].empty()) {
        s[best] = std::move(s[outer]);
        s[outer] = Queue{s[best].price + step, {}};
        s[outer].orders.push_back({s.next_order_id++, depth.sample(rng)});
        ++revealed;
    }
    s[inner] = Queue{s[best].price - step, {}};
    return revealed;
}

// In-spread limit order: the order becomes the new best level.
inline void improve(BookState& s, Side side, RestingOrder order) {
    const bool ask = side == Side::Ask;
    const auto best = ask ? QueueKey::Ask0 : QueueKey::Bid0;
    const auto outer = ask ? QueueKey::AskPlus1 : QueueKey::BidMinus1;
    const auto inner = ask ? QueueKey::AskMinus1 : QueueKey::BidPlus1;
    const std::int64_t step = ask ? 1 : -1;
    const auto new_price = s[best].price - step;
    s[outer] = std::move(s[best]);  // old outer level is discarded
    s[best] = Queue{new_price, {order}};
    s[inner] = Queue{new_price - step, {}};
}

}  // namespace detail

// Applies one event in place. The event must be applicable; cancels must name
// a resting order of the target queue.
inline ApplyResult apply_event_in_place(BookState& s, const EventRecord& ev, const DepthDistribution& depth,
                                        Rng& rng) {
    const auto key = target_queue(ev.type);
    const auto sd = side(ev.type);
    ApplyResult res;
    if (ev.size < 1) throw ContractViolation("event size must be >= 1");
    switch (kind(ev.type)) {
        case OrderKind::Limit: {
            const auto id = ev.order_id.value_or(s.next_order_id);
            if (id >= s.next_order_id) s.next_order_id = id + 1;
            res.order_id = id;
            res.applied_size = ev.size;
            if (is_in_spread(ev.type)) {
                if (s.spread_ticks() < 1)
                    throw ContractViolation("in-spread limit order with zero spread");
                detail::improve(s, sd, {id, ev.size});
            } else {
                s[key].orders.push_back({id, ev.size});
            }
            break;
        }
        case OrderKind::Cancel: {
            auto& q = s[key];
            if (q.empty()) throw ContractViolation("cancel on empty queue " + std::string(name(key)));
            if (!ev.order_id) throw ContractViolation("cancel without target order id");
            auto it = std::find_if(q.orders.begin(), q.orders.end(),
                                   [&](const RestingOrder& o) { return o.id == *ev.order_id; });
            if (it == q.orders.end())
                throw ContractViolation("cancel target " + std::to_string(*ev.order_id) + " not resting at " +
                                        std::string(name(key)));
            res.order_id = it->id;
            res.applied_size = it->size;
            q.orders.erase(it);
            if ((key == QueueKey::Ask0 || key == QueueKey::Bid0) && q.empty())
                res.revealed_levels = detail::deplete(s, sd, depth, rng);
            break;
        }
        case OrderKind::Market: {
            auto& q = s[key];
            if (q.empty()) throw ContractViolation("market order on empty queue " + std::string(name(key)));
            auto remaining = ev.size;
            std::size_t done = 0;
            for (; done < q.orders.size() && remaining > 0; ++done) {
                auto& o = q.orders[done];
                const auto take = std::min(remaining, o.size);
                o.size -= take;
                remaining -= take;
                res.fills.push_back({o.id, take});
                res.applied_size += take;
                if (o.size > 0) break;
            }
            q.orders.erase(q.orders.begin(),
                           q.orders.begin() + static_cast<std::ptrdiff_t>(std::min(done, q.orders.size())));
            if (q.empty()) res.revealed_levels = detail::deplete(s, sd, depth, rng);
            break;
        }
    }
    return res;
}

inline BookState apply_event(BookState s, const EventRecord& ev, const DepthDistribution& depth, Rng& rng) {
    apply_event_in_place(s, ev, depth, rng);
    return s;
}

}  // namespace chp

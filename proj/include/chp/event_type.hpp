#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "chp/error.hpp"

namespace chp {

// The twelve dimensions of the order-book Hawkes process. The numeric value
// is the dimension index everywhere (model matrices, CSV files, JSON).
enum class EventType : std::uint8_t {
    LoAskPlus1 = 0,
    CoAskPlus1,
    LoAsk0,
    CoAsk0,
    MoAsk0,
    LoAskMinus1,
    LoBidPlus1,
    LoBid0,
    CoBid0,
    MoBid0,
    LoBidMinus1,
    CoBidMinus1,
};

inline constexpr std::size_t kNumEventTypes = 12;

enum class OrderKind : std::uint8_t { Limit, Cancel, Market };
enum class Side : std::uint8_t { Ask, Bid };

// The six queues of the book state.
enum class QueueKey : std::uint8_t { AskPlus1 = 0, Ask0, AskMinus1, BidPlus1, Bid0, BidMinus1 };

inline constexpr std::size_t kNumQueues = 6;

inline constexpr std::array<EventType, kNumEventTypes> kAllEventTypes = {
    EventType::LoAskPlus1, EventType::CoAskPlus1, EventType::LoAsk0,      EventType::CoAsk0,
    EventType::MoAsk0,     EventType::LoAskMinus1, EventType::LoBidPlus1, EventType::LoBid0,
    EventType::CoBid0,     EventType::MoBid0,     EventType::LoBidMinus1, EventType::CoBidMinus1,
};

inline constexpr std::array<QueueKey, kNumQueues> kAllQueues = {
    QueueKey::AskPlus1, QueueKey::Ask0, QueueKey::AskMinus1,
    QueueKey::BidPlus1, QueueKey::Bid0, QueueKey::BidMinus1,
};

constexpr std::size_t index(EventType e) { return static_cast<std::size_t>(e); }
constexpr std::size_t index(QueueKey q) { return static_cast<std::size_t>(q); }

inline EventType event_type_from_index(std::size_t i) {
    if (i >= kNumEventTypes) throw RangeError("event type index " + std::to_string(i) + " out of range");
    return static_cast<EventType>(i);
}

namespace detail {

struct EventTraits {
    std::string_view name;
    OrderKind kind;
    QueueKey queue;
};

// Eligible-event table: which queue each event type acts on.
inline constexpr std::array<EventTraits, kNumEventTypes> kEventTraits = {{
    {"LO_ask+1", OrderKind::Limit, QueueKey::AskPlus1},
    {"CO_ask+1", OrderKind::Cancel, QueueKey::AskPlus1},
    {"LO_ask0", OrderKind::Limit, QueueKey::Ask0},
    {"CO_ask0", OrderKind::Cancel, QueueKey::Ask0},
    {"MO_ask0", OrderKind::Market, QueueKey::Ask0},
    {"LO_ask-1", OrderKind::Limit, QueueKey::AskMinus1},
    {"LO_bid+1", OrderKind::Limit, QueueKey::BidPlus1},
    {"LO_bid0", OrderKind::Limit, QueueKey::Bid0},
    {"CO_bid0", OrderKind::Cancel, QueueKey::Bid0},
    {"MO_bid0", OrderKind::Market, QueueKey::Bid0},
    {"LO_bid-1", OrderKind::Limit, QueueKey::BidMinus1},
    {"CO_bid-1", OrderKind::Cancel, QueueKey::BidMinus1},
}};

inline constexpr std::array<std::string_view, kNumQueues> kQueueNames = {
    "ask+1", "ask0", "ask-1", "bid+1", "bid0", "bid-1",
};

}  // namespace detail

constexpr std::string_view name(EventType e) { return detail::kEventTraits[index(e)].name; }
constexpr OrderKind kind(EventType e) { return detail::kEventTraits[index(e)].kind; }
constexpr QueueKey target_queue(EventType e) { return detail::kEventTraits[index(e)].queue; }
constexpr std::string_view name(QueueKey q) { return detail::kQueueNames[index(q)]; }

constexpr Side side(QueueKey q) { return index(q) < 3 ? Side::Ask : Side::Bid; }
constexpr Side side(EventType e) { return side(target_queue(e)); }

constexpr bool is_in_spread(EventType e) {
    return e == EventType::LoAskMinus1 || e == EventType::LoBidPlus1;
}

// Event types that carry a fitted size distribution (limit and market orders).
constexpr bool has_size_distribution(EventType e) { return kind(e) != OrderKind::Cancel; }

inline std::optional<EventType> parse_event_type(std::string_view s) {
    for (auto e : kAllEventTypes) {
        if (name(e) == s) return e;
    }
    return std::nullopt;
}

inline std::optional<QueueKey> parse_queue_key(std::string_view s) {
    for (auto q : kAllQueues) {
        if (name(q) == s) return q;
    }
    return std::nullopt;
}

// A timestamped classified event. Times are seconds since session start.
// spread_ticks is the spread prevailing when the event arrived (-1 if unknown).
struct EventRecord {
    double time{0.0};
    EventType type{EventType::LoAsk0};
    std::int64_t size{1};
    std::optional<std::int64_t> order_id{};
    std::int32_t spread_ticks{-1};

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

}  // namespace chp

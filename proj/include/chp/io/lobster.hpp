#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "chp/error.hpp"
#include "chp/event_type.hpp"
#include "chp/hawkes_model.hpp"
#include "chp/io/csv.hpp"
#include "chp/lob.hpp"
#include "chp/simulate.hpp"

namespace chp::io {

// LOBSTER message codes.
enum MessageCode : int {
    kNewLimit = 1,
    kPartialCancel = 2,
    kDelete = 3,
    kExecution = 4,
    kHiddenExecution = 5,
    kHalt = 7,
};

// One row of a message file. Prices are integers in units of 1e-4 currency;
// direction is +1 for buy orders and -1 for sell orders (for executions, the
// side of the resting order).
struct RawMessage {
    double time{0.0};  // seconds after midnight
    int type{kNewLimit};
    std::int64_t order_id{0};
    std::int64_t size{0};
    std::int64_t price{0};
    int direction{1};
    std::size_t line{0};  // 1-based line in the source file
};

// Column positions, for files that do not follow the usual order.
struct MessageColumns {
    int time{0};
    int type{1};
    int order_id{2};
    int size{3};
    int price{4};
    int direction{5};

    int count() const { return 1 + std::max({time, type, order_id, size, price, direction}); }
};

struct ParseReport {
    std::size_t rows{0};
    std::size_t malformed{0};
    std::vector<std::string> warnings;  // first few only

    void warn(std::string w) {
        ++malformed;
        if (warnings.size() < 100) warnings.push_back(std::move(w));
    }
};

// Reads a headerless message file. Malformed rows are skipped with a warning;
// a timestamp going backwards is refused.
inline std::vector<RawMessage> parse_messages(std::istream& in, ParseReport& report, const MessageColumns& cols = {},
                                              const std::string& source = "messages") {
    std::vector<RawMessage> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++report.rows;
        const auto f = split(line);
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        if (static_cast<int>(f.size()) < cols.count()) {
            report.warn(where + "expected " + std::to_string(cols.count()) + " columns");
            continue;
        }
        RawMessage m;
        m.line = line_no;
        if (!parse_number(f[cols.time], m.time) || !parse_number(f[cols.type], m.type) ||
            !parse_number(f[cols.order_id], m.order_id) || !parse_number(f[cols.size], m.size) ||
            !parse_number(f[cols.price], m.price) || !parse_number(f[cols.direction], m.direction)) {
            report.warn(where + "unparsable field");
            continue;
        }
        if (m.type < kNewLimit || m.type > kHalt || m.type == 6) {
            report.warn(where + "unknown message type " + std::to_string(m.type));
            continue;
        }
        if (m.direction != 1 && m.direction != -1) {
            report.warn(where + "direction must be +1 or -1");
            continue;
        }
        if (m.size < 0) {
            report.warn(where + "negative size");
            continue;
        }
        if (!out.empty() && m.time < out.back().time)
            throw ContractViolation(where + "timestamp " + format_double(m.time) + " precedes " +
                                    format_double(out.back().time));
        out.push_back(m);
    }
    return out;
}

// Visible levels after a message: (price, size) pairs, best first. Empty
// levels are dropped.
struct BookRow {
    std::vector<std::pair<std::int64_t, std::int64_t>> asks;
    std::vector<std::pair<std::int64_t, std::int64_t>> bids;
};

inline constexpr std::int64_t kEmptyAskPrice = 9999999999;
inline constexpr std::int64_t kEmptyBidPrice = -9999999999;

// Reads an order-book file (ask price, ask size, bid price, bid size per
// level). Row k is the book after line k of the message file.
inline std::vector<BookRow> parse_orderbook(std::istream& in, const std::string& source = "orderbook") {
    std::vector<BookRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split(line);
        if (f.size() % 4 != 0) throw ParseError(source + ":" + std::to_string(line_no) + ": column count not a multiple of 4");
        BookRow r;
        for (std::size_t l = 0; l < f.size(); l += 4) {
            std::int64_t ap = 0, as = 0, bp = 0, bs = 0;
            if (!parse_number(f[l], ap) || !parse_number(f[l + 1], as) || !parse_number(f[l + 2], bp) ||
                !parse_number(f[l + 3], bs))
                throw ParseError(source + ":" + std::to_string(line_no) + ": malformed level");
            if (as > 0 && ap != kEmptyAskPrice) r.asks.emplace_back(ap, as);
            if (bs > 0 && bp != kEmptyBidPrice) r.bids.emplace_back(bp, bs);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

struct ClassifyOptions {
    std::int64_t tick{100};  // price units per tick
    double session_open{kNasdaqOpen};
    double session_close{kNasdaqClose};
    double warmup{60.0};  // seconds after the open used only to seed the book
};

struct DiscardReport {
    std::size_t messages{0};
    std::size_t malformed{0};
    std::size_t emitted{0};
    std::size_t absorbed_executions{0};  // fills merged into a preceding market order
    std::map<std::string, std::size_t> discarded;
    std::vector<std::string> warnings;

    std::size_t total_discarded() const {
        std::size_t n = 0;
        for (const auto& [k, v] : discarded) n += v;
        return n;
    }
};

struct ClassifiedStream {
    std::vector<EventRecord> events;  // times relative to the session open
    std::vector<BookSnapshot> trajectory;  // book after each event, prices in ticks
    DiscardReport report;
};

namespace detail {

// Aggregate depth per price level, reconstructed from messages.
class LevelBook {
public:
    void apply(const RawMessage& m) {
        auto& side = m.direction < 0 ? asks_ : bids_;
        switch (m.type) {
            case kNewLimit: side[m.price] += m.size; break;
            case kPartialCancel:
            case kDelete:
            case kExecution: {
                auto it = side.find(m.price);
                if (it == side.end()) break;
                it->second -= m.size;
                if (it->second <= 0) side.erase(it);
                break;
            }
            default: break;
        }
    }

    void reset(const BookRow& row) {
        asks_.clear();
        bids_.clear();
        for (const auto& [p, s] : row.asks) asks_[p] += s;
        for (const auto& [p, s] : row.bids) bids_[p] += s;
    }

    std::optional<std::int64_t> best_ask() const {
        if (asks_.empty()) return std::nullopt;
        return asks_.begin()->first;
    }
    std::optional<std::int64_t> best_bid() const {
        if (bids_.empty()) return std::nullopt;
        return bids_.rbegin()->first;
    }
    std::int64_t ask_depth(std::int64_t p) const {
        auto it = asks_.find(p);
        return it == asks_.end() ? 0 : it->second;
    }
    std::int64_t bid_depth(std::int64_t p) const {
        auto it = bids_.find(p);
        return it == bids_.end() ? 0 : it->second;
    }

private:
    std::map<std::int64_t, std::int64_t> asks_;
    std::map<std::int64_t, std::int64_t> bids_;
};

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    const auto q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

// Event type of a message given the prevailing quotes, or the reason it is
// not one of the twelve.
inline std::variant<EventType, const char*> classify_message(const RawMessage& m, std::int64_t a, std::int64_t b,
                                                             std::int64_t t) {
    const std::int64_t p = m.price;
    if ((p - a) % t != 0 || (p - b) % t != 0) return "off_tick";
    const bool sell = m.direction < 0;
    switch (m.type) {
        case kNewLimit:
            if (sell) {
                if (p == a) return EventType::LoAsk0;
                if (p == a + t) return EventType::LoAskPlus1;
                if (p < a && (p > b || (p == a - t && p >= b))) return EventType::LoAskMinus1;
            } else {
                if (p == b) return EventType::LoBid0;
                if (p == b - t) return EventType::LoBidMinus1;
                if (p > b && (p < a || (p == b + t && p <= a))) return EventType::LoBidPlus1;
            }
            return "outside_band";
        case kDelete:
            if (sell) {
                if (p == a) return EventType::CoAsk0;
                if (p == a + t) return EventType::CoAskPlus1;
            } else {
                if (p == b) return EventType::CoBid0;
                if (p == b - t) return EventType::CoBidMinus1;
            }
            return "outside_band";
        case kExecution:
            if (sell && p == a) return EventType::MoAsk0;
            if (!sell && p == b) return EventType::MoBid0;
            return "outside_band";
        default: return "unsupported";
    }
}

}  // namespace detail

// Maps raw messages to the twelve event types by side and tick distance from
// the prevailing best quotes, reconstructing the book along the way. When
// order-book rows are supplied (indexed by message line) they replace the
// reconstructed state after every message. Consecutive visible executions
// with the same timestamp and side form one market order.
inline ClassifiedStream classify(std::span<const RawMessage> messages, const ClassifyOptions& opt = {},
                                 std::span<const BookRow> book_rows = {}) {
    if (opt.tick < 1) throw ContractViolation("tick must be a positive integer");
    if (!(opt.session_close > opt.session_open)) throw ContractViolation("session close must follow the open");
    ClassifiedStream out;
    auto& rep = out.report;
    rep.messages = messages.size();
    detail::LevelBook book;
    const auto t = opt.tick;

    struct Pending {
        EventRecord ev;
        int direction;
        double raw_time;
    };
    std::optional<Pending> pending;

    auto snapshot = [&](const EventRecord& ev) {
        BookSnapshot s;
        s.time = ev.time;
        s.type = ev.type;
        s.size = ev.size;
        const auto a = book.best_ask(), b = book.best_bid();
        if (a) {
            s.ask0_price = detail::floor_div(*a, t);
            s.ask0_depth = book.ask_depth(*a);
            s.ask_plus1_depth = book.ask_depth(*a + t);
        }
        if (b) {
            s.bid0_price = detail::floor_div(*b, t);
            s.bid0_depth = book.bid_depth(*b);
            s.bid_minus1_depth = book.bid_depth(*b - t);
        }
        s.spread_ticks = a && b ? s.ask0_price - s.bid0_price : -1;
        return s;
    };
    auto emit = [&](const EventRecord& ev) {
        out.events.push_back(ev);
        out.trajectory.push_back(snapshot(ev));
        ++rep.emitted;
    };
    auto discard = [&](const char* why) { ++rep.discarded[why]; };
    auto apply = [&](const RawMessage& m) {
        book.apply(m);
        if (!book_rows.empty()) {
            if (m.line == 0 || m.line > book_rows.size())
                throw ContractViolation("order-book file has no row for message line " + std::to_string(m.line));
            book.reset(book_rows[m.line - 1]);
        }
    };

    for (const auto& m : messages) {
        if (pending) {
            if (m.type == kExecution && m.time == pending->raw_time && m.direction == pending->direction) {
                pending->ev.size += m.size;
                ++rep.absorbed_executions;
                apply(m);
                continue;
            }
            emit(pending->ev);
            pending.reset();
        }
        if (m.type == kHalt) {
            discard("halt");
            continue;
        }
        if (m.type == kHiddenExecution) {
            discard("hidden_execution");
            continue;
        }
        if (m.time < opt.session_open || m.time >= opt.session_close) {
            apply(m);
            discard("outside_session");
            continue;
        }
        if (m.time < opt.session_open + opt.warmup) {
            apply(m);
            discard("warmup");
            continue;
        }
        if (m.type == kPartialCancel) {
            apply(m);
            discard("partial_cancel");
            continue;
        }
        const auto a = book.best_ask(), b = book.best_bid();
        if (!a || !b || m.size < 1) {
            apply(m);
            discard(!a || !b ? "no_quote" : "zero_size");
            continue;
        }
        const auto cls = detail::classify_message(m, *a, *b, t);
        if (const auto* why = std::get_if<const char*>(&cls)) {
            apply(m);
            discard(*why);
            continue;
        }
        EventRecord ev;
        ev.type = std::get<EventType>(cls);
        ev.time = m.time - opt.session_open;
        ev.size = m.size;
        ev.spread_ticks = static_cast<std::int32_t>((*a - *b) / t);
        if (kind(ev.type) != OrderKind::Market) ev.order_id = m.order_id;
        apply(m);
        if (kind(ev.type) == OrderKind::Market) {
            pending = Pending{ev, m.direction, m.time};
        } else {
            emit(ev);
        }
    }
    if (pending) emit(pending->ev);
    return out;
}

// Writes a simulated session as message and order-book files that classify()
// maps back to the same event sequence. Use as the sink of simulate_stream.
// The initial book is written as limit orders one second before the open.
class LobsterWriter {
public:
    LobsterWriter(std::ostream& messages, std::ostream* book, const BookState& initial,
                  double session_open = kNasdaqOpen, std::int64_t tick = 100)
        : msg_(messages), book_(book), open_(session_open), tick_(tick) {
        levels_.ask = initial[QueueKey::Ask0].price;
        levels_.bid = initial[QueueKey::Bid0].price;
        const double t0 = open_ - 1.0;
        auto seed = [&](QueueKey q, std::int64_t& depth, int direction) {
            for (const auto& o : initial[q].orders) {
                depth += o.size;
                write({t0, kNewLimit, o.id, o.size, initial[q].price * tick_, direction, 0});
            }
        };
        seed(QueueKey::Ask0, levels_.ask_depth, -1);
        seed(QueueKey::AskPlus1, levels_.ask1_depth, -1);
        seed(QueueKey::Bid0, levels_.bid_depth, 1);
        seed(QueueKey::BidMinus1, levels_.bid1_depth, 1);
    }

    void operator()(const EventRecord& ev, const ApplyResult& res, const BookState& after) {
        const double time = open_ + ev.time;
        const bool ask = side(ev.type) == Side::Ask;
        const int direction = ask ? -1 : 1;
        std::int64_t price = 0;
        switch (target_queue(ev.type)) {
            case QueueKey::AskPlus1: price = levels_.ask + 1; break;
            case QueueKey::Ask0: price = levels_.ask; break;
            case QueueKey::AskMinus1: price = levels_.ask - 1; break;
            case QueueKey::BidPlus1: price = levels_.bid + 1; break;
            case QueueKey::Bid0: price = levels_.bid; break;
            case QueueKey::BidMinus1: price = levels_.bid - 1; break;
        }
        price *= tick_;
        switch (kind(ev.type)) {
            case OrderKind::Limit:
            case OrderKind::Cancel:
                update(after);
                write({time, kind(ev.type) == OrderKind::Limit ? kNewLimit : kDelete, res.order_id, res.applied_size,
                       price, direction, 0});
                break;
            case OrderKind::Market:
                for (std::size_t k = 0; k < res.fills.size(); ++k) {
                    if (k + 1 == res.fills.size()) {
                        update(after);
                    } else {
                        (ask ? levels_.ask_depth : levels_.bid_depth) -= res.fills[k].size;
                    }
                    write({time, kExecution, res.fills[k].id, res.fills[k].size, price, direction, 0});
                }
                break;
        }
    }

private:
    struct Levels {
        std::int64_t ask{0}, bid{0};
        std::int64_t ask_depth{0}, ask1_depth{0}, bid_depth{0}, bid1_depth{0};
    };

    void update(const BookState& s) {
        levels_.ask = s[QueueKey::Ask0].price;
        levels_.bid = s[QueueKey::Bid0].price;
        levels_.ask_depth = s[QueueKey::Ask0].depth();
        levels_.ask1_depth = s[QueueKey::AskPlus1].depth();
        levels_.bid_depth = s[QueueKey::Bid0].depth();
        levels_.bid1_depth = s[QueueKey::BidMinus1].depth();
    }

    void write(const RawMessage& m) {
        msg_ << format_double(m.time) << ',' << m.type << ',' << m.order_id << ',' << m.size << ',' << m.price << ','
             << m.direction << '\n';
        if (!book_) return;
        auto level = [&](std::int64_t ap, std::int64_t as, std::int64_t bp, std::int64_t bs) {
            *book_ << (as > 0 ? ap * tick_ : kEmptyAskPrice) << ',' << as << ',' << (bs > 0 ? bp * tick_ : kEmptyBidPrice)
                   << ',' << bs;
        };
        level(levels_.ask, levels_.ask_depth, levels_.bid, levels_.bid_depth);
        *book_ << ',';
        level(levels_.ask + 1, levels_.ask1_depth, levels_.bid - 1, levels_.bid1_depth);
        *book_ << '\n';
    }

    std::ostream& msg_;
    std::ostream* book_;
    double open_;
    std::int64_t tick_;
    Levels levels_;
};

}  // namespace chp::io

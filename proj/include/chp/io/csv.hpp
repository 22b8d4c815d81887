#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "chp/error.hpp"
#include "chp/event_type.hpp"
#include "chp/simulate.hpp"

namespace chp::io {

// Shortest representation that reads back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

// Event type by name (LO_ask+1) or by dimension index.
inline std::optional<EventType> parse_event_field(std::string_view s) {
    s = trim(s);
    if (auto e = parse_event_type(s)) return e;
    std::size_t i = 0;
    if (parse_number(s, i) && i < kNumEventTypes) return event_type_from_index(i);
    return std::nullopt;
}

inline constexpr std::string_view kClassifiedHeader = "time,event_type,size,spread_ticks,order_id";

inline void write_classified_row(std::ostream& out, const EventRecord& e) {
    out << format_double(e.time) << ',' << name(e.type) << ',' << e.size << ',' << e.spread_ticks << ',';
    if (e.order_id) out << *e.order_id;
    out << '\n';
}

inline void write_classified(std::ostream& out, std::span<const EventRecord> events) {
    out << kClassifiedHeader << '\n';
    for (const auto& e : events) write_classified_row(out, e);
}

// Reads a classified event file. Any malformed row is a schema violation.
inline std::vector<EventRecord> read_classified(std::istream& in, const std::string& source = "classified") {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kClassifiedHeader)
        throw ParseError(source + ": expected header '" + std::string(kClassifiedHeader) + "'");
    std::vector<EventRecord> events;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split(line);
        auto fail = [&](const std::string& why) {
            return ParseError(source + ":" + std::to_string(line_no) + ": " + why);
        };
        if (f.size() != 5) throw fail("expected 5 columns, got " + std::to_string(f.size()));
        EventRecord e;
        const auto type = parse_event_field(f[1]);
        std::int64_t spread = 0;
        if (!parse_number(f[0], e.time) || !std::isfinite(e.time)) throw fail("bad time");
        if (!type) throw fail("unknown event type '" + std::string(f[1]) + "'");
        e.type = *type;
        if (!parse_number(f[2], e.size) || e.size < 1) throw fail("bad size");
        if (!parse_number(f[3], spread) || spread < -1) throw fail("bad spread_ticks");
        e.spread_ticks = static_cast<std::int32_t>(spread);
        if (!trim(f[4]).empty()) {
            std::int64_t id = 0;
            if (!parse_number(f[4], id)) throw fail("bad order_id");
            e.order_id = id;
        }
        if (!events.empty() && e.time < events.back().time) throw fail("timestamps out of order");
        events.push_back(e);
    }
    return events;
}

inline constexpr std::string_view kTrajectoryHeader =
    "time,event_type,size,ask0_price,bid0_price,ask0_depth,bid0_depth,spread_ticks,ask_plus1_depth,bid_minus1_depth";

inline void write_trajectory_row(std::ostream& out, const BookSnapshot& r) {
    out << format_double(r.time) << ',' << name(r.type) << ',' << r.size << ',' << r.ask0_price << ','
        << r.bid0_price << ',' << r.ask0_depth << ',' << r.bid0_depth << ',' << r.spread_ticks << ','
        << r.ask_plus1_depth << ',' << r.bid_minus1_depth << '\n';
}

inline void write_trajectory(std::ostream& out, std::span<const BookSnapshot> rows) {
    out << kTrajectoryHeader << '\n';
    for (const auto& r : rows) write_trajectory_row(out, r);
}

// The two trailing depth columns are optional; when absent the outer queues
// are reported as non-empty.
inline std::vector<BookSnapshot> read_trajectory(std::istream& in, const std::string& source = "trajectory") {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source + ": empty file");
    const auto header = split(trim(line));
    const bool extended = header.size() == 10;
    if (header.size() != 8 && !extended) throw ParseError(source + ": unexpected header");
    std::vector<BookSnapshot> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split(line);
        auto fail = [&](const std::string& why) {
            return ParseError(source + ":" + std::to_string(line_no) + ": " + why);
        };
        if (f.size() != header.size()) throw fail("wrong column count");
        BookSnapshot r;
        const auto type = parse_event_field(f[1]);
        if (!type) throw fail("unknown event type");
        r.type = *type;
        bool ok = parse_number(f[0], r.time) && parse_number(f[2], r.size) && parse_number(f[3], r.ask0_price) &&
                  parse_number(f[4], r.bid0_price) && parse_number(f[5], r.ask0_depth) &&
                  parse_number(f[6], r.bid0_depth) && parse_number(f[7], r.spread_ticks);
        if (extended) {
            ok = ok && parse_number(f[8], r.ask_plus1_depth) && parse_number(f[9], r.bid_minus1_depth);
        } else {
            r.ask_plus1_depth = r.bid_minus1_depth = 1;
        }
        if (!ok) throw fail("malformed row");
        rows.push_back(r);
    }
    return rows;
}

template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    writer(out);
    if (!out) throw std::runtime_error("error writing " + path);
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

}  // namespace chp::io

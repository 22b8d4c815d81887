#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "chp/error.hpp"
#include "chp/event_type.hpp"
#include "chp/hawkes_model.hpp"
#include "chp/io/json_io.hpp"
#include "chp/simulate.hpp"
#include "chp/size_model.hpp"

namespace chp::io {

struct MeanSd {
    std::size_t n{0};
    double mean{0.0};
    double sd{0.0};  // population standard deviation
};

inline MeanSd mean_sd_of(std::span<const double> xs) {
    MeanSd r;
    r.n = xs.size();
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(xs.size()));
    return r;
}

struct SpikeStat {
    std::int64_t point{0};
    double mass{0.0};    // empirical probability at the point
    double excess{0.0};  // mass minus the mean of its two neighbours
};

struct SizeStats {
    std::int64_t count{0};
    std::map<std::int64_t, std::int64_t> histogram;
    std::vector<SpikeStat> spikes;
    // Log-binned density on [2^k, 2^(k+1)) for plotting on log-log axes.
    std::vector<std::pair<double, double>> log_density;
};

struct EmpiricalStats {
    PerEvent<std::int64_t> counts{};
    PerEvent<SizeStats> sizes;
    MeanSd in_spread_distance;  // ticks between the old and new best quote
    double in_spread_one_tick{0.0};
    MeanSd depletion_gap;       // ticks the best quote moves when its queue empties
    double depletion_one_tick{0.0};
    std::vector<std::int64_t> revealed_depths;  // outer-level depth after a depletion
    std::vector<std::int64_t> tod_counts;        // per time-of-day bin
    std::vector<std::int64_t> ten_minute_counts;
    double cancel_share_best{0.0};  // share of cancels at the best quotes
};

inline SizeStats size_stats(std::span<const std::int64_t> sizes) {
    SizeStats s;
    s.count = static_cast<std::int64_t>(sizes.size());
    for (auto v : sizes) ++s.histogram[v];
    if (sizes.empty()) return s;
    const double n = static_cast<double>(sizes.size());
    auto mass = [&](std::int64_t k) {
        auto it = s.histogram.find(k);
        return it == s.histogram.end() ? 0.0 : static_cast<double>(it->second) / n;
    };
    for (auto p : default_spike_points()) {
        const double m = mass(p);
        const double neighbours = p > 1 ? 0.5 * (mass(p - 1) + mass(p + 1)) : mass(p + 1);
        s.spikes.push_back({p, m, m - neighbours});
    }
    std::map<int, std::int64_t> bins;
    for (const auto& [k, c] : s.histogram)
        if (k >= 1) bins[static_cast<int>(std::floor(std::log2(static_cast<double>(k))))] += c;
    for (const auto& [b, c] : bins) {
        const double lo = std::ldexp(1.0, b), width = lo;
        s.log_density.emplace_back(lo * std::sqrt(2.0), static_cast<double>(c) / (n * width));
    }
    return s;
}

// Summary statistics of a classified stream and the book after each event.
inline EmpiricalStats empirical_stats(std::span<const EventRecord> events, std::span<const BookSnapshot> trajectory,
                                      double session_length = kNasdaqClose - kNasdaqOpen,
                                      double tod_bin_seconds = kDefaultTodBinSeconds) {
    if (!trajectory.empty() && trajectory.size() != events.size())
        throw ContractViolation("trajectory and events differ in length");
    EmpiricalStats st;
    PerEvent<std::vector<std::int64_t>> sizes;
    const auto n_tod = static_cast<std::size_t>(std::ceil(session_length / tod_bin_seconds - 1e-9));
    const auto n_ten = static_cast<std::size_t>(std::ceil(session_length / 600.0 - 1e-9));
    st.tod_counts.assign(n_tod, 0);
    st.ten_minute_counts.assign(n_ten, 0);
    std::int64_t cancels = 0, best_cancels = 0;
    for (const auto& e : events) {
        ++st.counts[index(e.type)];
        if (has_size_distribution(e.type)) sizes[index(e.type)].push_back(e.size);
        if (kind(e.type) == OrderKind::Cancel) {
            ++cancels;
            if (e.type == EventType::CoAsk0 || e.type == EventType::CoBid0) ++best_cancels;
        }
        if (e.time >= 0.0 && e.time < session_length) {
            ++st.tod_counts[std::min(n_tod - 1, static_cast<std::size_t>(e.time / tod_bin_seconds))];
            ++st.ten_minute_counts[std::min(n_ten - 1, static_cast<std::size_t>(e.time / 600.0))];
        }
    }
    for (std::size_t i = 0; i < kNumEventTypes; ++i) st.sizes[i] = size_stats(sizes[i]);
    st.cancel_share_best = cancels > 0 ? static_cast<double>(best_cancels) / static_cast<double>(cancels) : 0.0;

    std::vector<double> distances, gaps;
    for (std::size_t k = 1; k < trajectory.size(); ++k) {
        const auto& prev = trajectory[k - 1];
        const auto& cur = trajectory[k];
        const auto type = events[k].type;
        if (type == EventType::LoAskMinus1) distances.push_back(static_cast<double>(prev.ask0_price - cur.ask0_price));
        if (type == EventType::LoBidPlus1) distances.push_back(static_cast<double>(cur.bid0_price - prev.bid0_price));
        const bool ask_hit = (type == EventType::MoAsk0 || type == EventType::CoAsk0) && cur.ask0_price > prev.ask0_price;
        const bool bid_hit = (type == EventType::MoBid0 || type == EventType::CoBid0) && cur.bid0_price < prev.bid0_price;
        if (ask_hit) {
            gaps.push_back(static_cast<double>(cur.ask0_price - prev.ask0_price));
            if (cur.ask_plus1_depth > 0) st.revealed_depths.push_back(cur.ask_plus1_depth);
        }
        if (bid_hit) {
            gaps.push_back(static_cast<double>(prev.bid0_price - cur.bid0_price));
            if (cur.bid_minus1_depth > 0) st.revealed_depths.push_back(cur.bid_minus1_depth);
        }
    }
    st.in_spread_distance = mean_sd_of(distances);
    st.depletion_gap = mean_sd_of(gaps);
    auto share_one = [](const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        return static_cast<double>(std::count(v.begin(), v.end(), 1.0)) / static_cast<double>(v.size());
    };
    st.in_spread_one_tick = share_one(distances);
    st.depletion_one_tick = share_one(gaps);
    return st;
}

inline Json to_json(const MeanSd& m) { return {{"n", m.n}, {"mean", m.mean}, {"sd", m.sd}}; }

inline Json to_json(const EmpiricalStats& st) {
    Json j;
    Json counts = Json::object(), sizes = Json::object();
    for (auto e : kAllEventTypes) {
        const auto key = std::string(name(e));
        counts[key] = st.counts[index(e)];
        if (!has_size_distribution(e)) continue;
        const auto& s = st.sizes[index(e)];
        Json hist = Json::array(), spikes = Json::array(), dens = Json::array();
        for (const auto& [k, c] : s.histogram) hist.push_back({k, c});
        for (const auto& sp : s.spikes) spikes.push_back({{"point", sp.point}, {"mass", sp.mass}, {"excess", sp.excess}});
        for (const auto& [x, d] : s.log_density) dens.push_back({x, d});
        sizes[key] = {{"count", s.count}, {"histogram", hist}, {"spikes", spikes}, {"log_density", dens}};
    }
    j["event_counts"] = counts;
    j["sizes"] = sizes;
    j["in_spread_distance"] = to_json(st.in_spread_distance);
    j["in_spread_one_tick_share"] = st.in_spread_one_tick;
    j["depletion_gap"] = to_json(st.depletion_gap);
    j["depletion_one_tick_share"] = st.depletion_one_tick;
    std::map<std::int64_t, std::int64_t> depth_hist;
    for (auto d : st.revealed_depths) ++depth_hist[d];
    Json dh = Json::array();
    for (const auto& [d, c] : depth_hist) dh.push_back({d, c});
    j["revealed_depth_histogram"] = dh;
    j["tod_counts"] = st.tod_counts;
    j["ten_minute_counts"] = st.ten_minute_counts;
    j["cancel_share_at_best"] = st.cancel_share_best;
    return j;
}

}  // namespace chp::io

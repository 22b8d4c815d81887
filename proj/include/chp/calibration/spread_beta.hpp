#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "chp/error.hpp"
#include "chp/event_type.hpp"

namespace chp {

struct SpreadBetaOptions {
    double window{0.01};  // seconds
    std::int64_t min_spread{2};
    std::int64_t min_windows{10000};  // per spread group
};

struct SpreadGroup {
    std::int64_t spread{0};
    std::int64_t windows{0};
    std::int64_t arrivals{0};
    double mean() const { return windows > 0 ? static_cast<double>(arrivals) / static_cast<double>(windows) : 0.0; }
};

struct SpreadBetaResult {
    double beta{0.0};
    double intercept{0.0};
    double r_squared{0.0};
    std::vector<SpreadGroup> groups;  // groups used in the regression
};

// Mean number of in-spread arrivals in a short window as a function of the
// spread at the window start, accumulated over one or more days. The session
// is cut into consecutive windows; the spread prevailing at a window start is
// the pre-event spread of the next event.
class SpreadBetaAccumulator {
public:
    explicit SpreadBetaAccumulator(SpreadBetaOptions opt = {}) : opt_(opt) {
        if (!(opt_.window > 0.0)) throw ContractViolation("spread window must be positive");
    }

    void add_day(std::span<const EventRecord> events) {
        if (events.empty()) return;
        std::size_t next = 0;  // first event at or after the window start
        const auto n_windows = static_cast<std::int64_t>(std::floor(events.back().time / opt_.window));
        for (std::int64_t m = 0; m < n_windows; ++m) {
            const double u = static_cast<double>(m) * opt_.window;
            const double v = u + opt_.window;
            while (next < events.size() && events[next].time < u) ++next;
            if (next == events.size()) break;
            const auto s = events[next].spread_ticks;
            if (s < 0) continue;
            std::int64_t count = 0;
            for (auto k = next; k < events.size() && events[k].time < v; ++k)
                if (is_in_spread(events[k].type)) ++count;
            auto& g = groups_[s];
            g.spread = s;
            ++g.windows;
            g.arrivals += count;
        }
    }

    const std::map<std::int64_t, SpreadGroup>& groups() const { return groups_; }

    // OLS of log mean count on log spread over the usable groups.
    SpreadBetaResult result() const {
        SpreadBetaResult r;
        for (const auto& [s, g] : groups_)
            if (s >= opt_.min_spread && g.windows >= opt_.min_windows && g.arrivals > 0) r.groups.push_back(g);
        if (r.groups.size() < 3)
            throw ContractViolation("spread regression needs at least 3 spread groups with s >= " +
                                    std::to_string(opt_.min_spread) + ", got " + std::to_string(r.groups.size()));
        const double n = static_cast<double>(r.groups.size());
        double sx = 0, sy = 0;
        for (const auto& g : r.groups) {
            sx += std::log(static_cast<double>(g.spread));
            sy += std::log(g.mean());
        }
        const double mx = sx / n, my = sy / n;
        double sxx = 0, sxy = 0, syy = 0;
        for (const auto& g : r.groups) {
            const double dx = std::log(static_cast<double>(g.spread)) - mx, dy = std::log(g.mean()) - my;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        r.beta = sxy / sxx;
        r.intercept = my - r.beta * mx;
        r.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
        return r;
    }

private:
    SpreadBetaOptions opt_;
    std::map<std::int64_t, SpreadGroup> groups_;
};

inline SpreadBetaResult estimate_spread_beta(std::span<const EventRecord> events, const SpreadBetaOptions& opt = {}) {
    SpreadBetaAccumulator acc(opt);
    acc.add_day(events);
    return acc.result();
}

}  // namespace chp

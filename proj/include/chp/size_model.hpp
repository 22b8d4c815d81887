#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "chp/error.hpp"
#include "chp/rng.hpp"

namespace chp {

inline const std::vector<std::int64_t>& default_spike_points() {
    static const std::vector<std::int64_t> points{1, 10, 50, 100, 200, 500};
    return points;
}

// Order-size law: point masses at round numbers on top of a geometric body
// supported on {1, 2, ...}:
//   pmf(k) = w_k [k is a spike] + body_weight * p (1 - p)^(k - 1)
struct SizeDistribution {
    std::vector<std::int64_t> spike_points = default_spike_points();
    std::vector<double> spike_weights = std::vector<double>(default_spike_points().size(), 0.0);
    double body_weight{1.0};
    double geom_p{1.0};

    void validate() const {
        if (spike_points.size() != spike_weights.size())
            throw ContractViolation("spike_points and spike_weights differ in length");
        for (std::size_t k = 0; k < spike_points.size(); ++k) {
            if (spike_points[k] < 1) throw ContractViolation("spike points must be positive");
            if (k > 0 && spike_points[k] <= spike_points[k - 1])
                throw ContractViolation("spike points must be strictly ascending");
        }
        double total = body_weight;
        for (double w : spike_weights) {
            if (!(w >= 0.0)) throw ContractViolation("spike weights must be non-negative");
            total += w;
        }
        if (!(body_weight >= 0.0)) throw ContractViolation("body weight must be non-negative");
        if (std::abs(total - 1.0) > 1e-9) throw ContractViolation("size distribution weights must sum to 1");
        if (!(geom_p > 0.0 && geom_p <= 1.0)) throw ContractViolation("geom_p must lie in (0, 1]");
    }

    double geometric_pmf(std::int64_t k) const {
        if (k < 1) return 0.0;
        if (geom_p >= 1.0) return k == 1 ? 1.0 : 0.0;
        return geom_p * std::exp(static_cast<double>(k - 1) * std::log1p(-geom_p));
    }

    double spike_weight_at(std::int64_t k) const {
        auto it = std::lower_bound(spike_points.begin(), spike_points.end(), k);
        if (it == spike_points.end() || *it != k) return 0.0;
        return spike_weights[static_cast<std::size_t>(it - spike_points.begin())];
    }

    double pmf(std::int64_t k) const { return spike_weight_at(k) + body_weight * geometric_pmf(k); }

    double mean() const {
        double m = body_weight / geom_p;
        for (std::size_t s = 0; s < spike_points.size(); ++s) m += spike_weights[s] * static_cast<double>(spike_points[s]);
        return m;
    }

    // Exact inverse-CDF draw using one uniform.
    std::int64_t sample(Rng& rng) const {
        double u = rng.uniform();
        for (std::size_t s = 0; s < spike_points.size(); ++s) {
            if (u < spike_weights[s]) return spike_points[s];
            u -= spike_weights[s];
        }
        if (geom_p >= 1.0 || body_weight <= 0.0) return body_weight > 0.0 ? 1 : spike_points.back();
        const double v = std::clamp(u / body_weight, 0.0, 1.0 - 1e-16);
        const double k = std::floor(std::log1p(-v) / std::log1p(-geom_p));
        return 1 + static_cast<std::int64_t>(std::min(k, 1e15));
    }
};

// Multiset of sizes as value -> count.
using SizeHistogram = std::map<std::int64_t, std::int64_t>;

inline SizeHistogram make_histogram(std::span<const std::int64_t> sizes) {
    SizeHistogram h;
    for (auto s : sizes) {
        if (s < 1) throw ContractViolation("order sizes must be positive");
        ++h[s];
    }
    return h;
}

inline double log_likelihood(const SizeDistribution& d, const SizeHistogram& h) {
    double ll = 0.0;
    for (const auto& [k, n] : h) {
        const double p = d.pmf(k);
        if (p <= 0.0) return -std::numeric_limits<double>::infinity();
        ll += static_cast<double>(n) * std::log(p);
    }
    return ll;
}

struct SizeFitOptions {
    std::vector<std::int64_t> spike_points = default_spike_points();
    std::int64_t min_samples{100};
    double tolerance{1e-10};  // on the change in log-likelihood
    int max_iterations{20000};
};

struct SizeFitResult {
    SizeDistribution dist;
    std::vector<double> log_likelihood_trace;
    bool converged{false};
};

// Maximum likelihood for the spiked mixture by EM: spike-point observations
// are split between spike and body by their responsibilities, after which the
// geometric parameter has the closed form (body count) / (body-weighted sum).
inline SizeFitResult fit_sizes(const SizeHistogram& h, const SizeFitOptions& opt = {}) {
    const auto& spikes = opt.spike_points;
    std::int64_t n_total = 0;
    for (const auto& [k, n] : h) {
        if (k < 1) throw ContractViolation("order sizes must be positive");
        n_total += n;
    }
    if (n_total < opt.min_samples)
        throw ContractViolation("size fit needs at least " + std::to_string(opt.min_samples) + " samples, got " +
                                std::to_string(n_total));

    SizeFitResult res;
    res.dist.spike_points = spikes;
    res.dist.spike_weights.assign(spikes.size(), 0.0);
    const double n = static_cast<double>(n_total);

    auto spike_slot = [&](std::int64_t k) -> std::ptrdiff_t {
        auto it = std::lower_bound(spikes.begin(), spikes.end(), k);
        return it != spikes.end() && *it == k ? it - spikes.begin() : -1;
    };

    // Degenerate sample: a single distinct value.
    if (h.size() == 1) {
        const auto v = h.begin()->first;
        if (auto s = spike_slot(v); s >= 0) {
            res.dist.spike_weights[static_cast<std::size_t>(s)] = 1.0;
            res.dist.body_weight = 0.0;
            res.dist.geom_p = 1.0;
        } else {
            res.dist.body_weight = 1.0;
            res.dist.geom_p = 1.0 / static_cast<double>(v);
        }
        res.log_likelihood_trace.push_back(log_likelihood(res.dist, h));
        res.converged = true;
        return res;
    }

    std::vector<double> spike_counts(spikes.size(), 0.0);
    double off_count = 0.0, off_sum = 0.0, all_sum = 0.0;
    for (const auto& [k, c] : h) {
        all_sum += static_cast<double>(k) * static_cast<double>(c);
        if (auto s = spike_slot(k); s >= 0) {
            spike_counts[static_cast<std::size_t>(s)] = static_cast<double>(c);
        } else {
            off_count += static_cast<double>(c);
            off_sum += static_cast<double>(k) * static_cast<double>(c);
        }
    }

    // Start: half of every spike's empirical mass on the spike.
    auto& d = res.dist;
    double spike_total = 0.0;
    for (std::size_t s = 0; s < spikes.size(); ++s) {
        d.spike_weights[s] = 0.5 * spike_counts[s] / n;
        spike_total += d.spike_weights[s];
    }
    d.body_weight = 1.0 - spike_total;
    d.geom_p = std::clamp(n / all_sum, 1e-12, 1.0);

    double ll = log_likelihood(d, h);
    res.log_likelihood_trace.push_back(ll);
    for (int it = 0; it < opt.max_iterations; ++it) {
        double body_count = off_count, body_sum = off_sum, new_spike_total = 0.0;
        std::vector<double> new_w(spikes.size(), 0.0);
        for (std::size_t s = 0; s < spikes.size(); ++s) {
            if (spike_counts[s] == 0.0) continue;
            const double a = d.spike_weights[s];
            const double b = d.body_weight * d.geometric_pmf(spikes[s]);
            const double r = a + b > 0.0 ? a / (a + b) : 0.0;
            new_w[s] = spike_counts[s] * r / n;
            new_spike_total += new_w[s];
            body_count += spike_counts[s] * (1.0 - r);
            body_sum += spike_counts[s] * (1.0 - r) * static_cast<double>(spikes[s]);
        }
        d.spike_weights = new_w;
        d.body_weight = std::max(0.0, 1.0 - new_spike_total);
        d.geom_p = body_sum > 0.0 ? std::clamp(body_count / body_sum, 1e-12, 1.0) : 1.0;
        const double next = log_likelihood(d, h);
        res.log_likelihood_trace.push_back(next);
        if (std::abs(next - ll) < opt.tolerance) {
            res.converged = true;
            break;
        }
        ll = next;
    }
    return res;
}

inline SizeFitResult fit_sizes(std::span<const std::int64_t> sizes, const SizeFitOptions& opt = {}) {
    return fit_sizes(make_histogram(sizes), opt);
}

}  // namespace chp

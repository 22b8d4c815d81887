#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "chp/error.hpp"

namespace chp {

// phi(t) = alpha * exp(-beta t)
struct ExponentialKernel {
    double alpha{0.0};
    double beta{1.0};
};

// phi(t) = alpha * (1 + t / delta)^(-gamma), gamma > 1
struct PowerLawKernel {
    double alpha{0.0};
    double delta{1.0};
    double gamma{2.0};
};

// Piecewise constant: phi(t) = values[c] on [edges[c], edges[c+1]), zero elsewhere.
struct NonParametricKernel {
    std::vector<double> edges;
    std::vector<double> values;
};

enum class KernelFamily { Exponential, PowerLaw, NonParametric };

inline std::string_view family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::Exponential: return "exponential";
        case KernelFamily::PowerLaw: return "power_law";
        case KernelFamily::NonParametric: return "nonparametric";
    }
    return "?";
}

struct KernelBounds {
    double lo;
    double hi;
};

// Excitation kernel phi(t), t >= 0. Values may be negative (inhibition).
class Kernel {
public:
    Kernel() : rep_(ExponentialKernel{0.0, 1.0}) {}

    static Kernel exponential(double alpha, double beta) {
        if (!(beta > 0.0) || !std::isfinite(beta) || !std::isfinite(alpha))
            throw ContractViolation("exponential kernel requires finite alpha and beta > 0");
        return Kernel(ExponentialKernel{alpha, beta});
    }

    static Kernel power_law(double alpha, double delta, double gamma) {
        if (!(delta > 0.0) || !(gamma > 1.0) || !std::isfinite(alpha) || !std::isfinite(delta) ||
            !std::isfinite(gamma))
            throw ContractViolation("power-law kernel requires delta > 0 and gamma > 1");
        return Kernel(PowerLawKernel{alpha, delta, gamma});
    }

    static Kernel nonparametric(std::vector<double> edges, std::vector<double> values) {
        if (edges.size() < 2 || values.size() + 1 != edges.size())
            throw ContractViolation("nonparametric kernel needs n+1 edges for n values");
        if (edges.front() < 0.0) throw ContractViolation("nonparametric kernel grid must start at t >= 0");
        for (std::size_t k = 1; k < edges.size(); ++k) {
            if (!(edges[k] > edges[k - 1]))
                throw ContractViolation("nonparametric kernel grid must be strictly ascending");
        }
        for (double v : values) {
            if (!std::isfinite(v)) throw ContractViolation("nonparametric kernel value is not finite");
        }
        return Kernel(NonParametricKernel{std::move(edges), std::move(values)});
    }

    static Kernel zero() { return Kernel(); }

    KernelFamily family() const { return static_cast<KernelFamily>(rep_.index()); }

    const ExponentialKernel* as_exponential() const { return std::get_if<ExponentialKernel>(&rep_); }
    const PowerLawKernel* as_power_law() const { return std::get_if<PowerLawKernel>(&rep_); }
    const NonParametricKernel* as_nonparametric() const { return std::get_if<NonParametricKernel>(&rep_); }

    bool is_zero() const {
        if (auto* e = as_exponential()) return e->alpha == 0.0;
        if (auto* p = as_power_law()) return p->alpha == 0.0;
        const auto& np = std::get<NonParametricKernel>(rep_);
        return std::all_of(np.values.begin(), np.values.end(), [](double v) { return v == 0.0; });
    }

    double operator()(double t) const { return value(t); }

    double value(double t) const {
        if (t < 0.0) return 0.0;
        if (auto* e = as_exponential()) return e->alpha * std::exp(-e->beta * t);
        if (auto* p = as_power_law()) return p->alpha * std::pow(1.0 + t / p->delta, -p->gamma);
        const auto& np = std::get<NonParametricKernel>(rep_);
        const auto c = cell_of(np, t);
        return c < np.values.size() ? np.values[c] : 0.0;
    }

    // Integral of phi over [0, t].
    double cumulative(double t) const {
        if (t <= 0.0) return 0.0;
        if (auto* e = as_exponential()) return e->alpha / e->beta * -std::expm1(-e->beta * t);
        if (auto* p = as_power_law()) {
            const double scale = p->alpha * p->delta / (p->gamma - 1.0);
            return scale * -std::expm1((1.0 - p->gamma) * std::log1p(t / p->delta));
        }
        const auto& np = std::get<NonParametricKernel>(rep_);
        double acc = 0.0;
        for (std::size_t c = 0; c < np.values.size(); ++c) {
            const double lo = np.edges[c];
            if (t <= lo) break;
            const double hi = std::min(t, np.edges[c + 1]);
            acc += np.values[c] * (hi - lo);
        }
        return acc;
    }

    // Integral of phi over [t0, t1].
    double integral(double t0, double t1) const {
        if (t1 <= t0) return 0.0;
        if (auto* e = as_exponential()) {
            const double a = std::max(t0, 0.0);
            return e->alpha / e->beta * std::exp(-e->beta * a) * -std::expm1(-e->beta * (t1 - a));
        }
        return cumulative(t1) - cumulative(t0);
    }

    // Integral of phi over [0, inf).
    double norm() const {
        if (auto* e = as_exponential()) return e->alpha / e->beta;
        if (auto* p = as_power_law()) return p->alpha * p->delta / (p->gamma - 1.0);
        const auto& np = std::get<NonParametricKernel>(rep_);
        double acc = 0.0;
        for (std::size_t c = 0; c < np.values.size(); ++c) acc += np.values[c] * (np.edges[c + 1] - np.edges[c]);
        return acc;
    }

    // Time beyond which phi is identically zero.
    double support() const {
        if (auto* np = as_nonparametric()) return np->edges.back();
        return std::numeric_limits<double>::infinity();
    }

    // Min and max of phi over [u0, u1], u0 >= 0.
    KernelBounds bounds(double u0, double u1) const {
        if (auto* np = as_nonparametric()) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            if (u0 < np->edges.front() || u1 >= np->edges.back()) lo = hi = 0.0;
            const std::size_t first = cell_of(*np, std::max(u0, np->edges.front()));
            for (std::size_t c = first; c < np->values.size() && np->edges[c] <= u1; ++c) {
                lo = std::min(lo, np->values[c]);
                hi = std::max(hi, np->values[c]);
            }
            if (lo > hi) lo = hi = 0.0;
            return {lo, hi};
        }
        // exponential and power law are monotone in |phi|
        const double a = value(u0);
        const double b = value(u1);
        return {std::min(a, b), std::max(a, b)};
    }

    // sup over t >= u of max(phi(t), 0).
    double positive_sup_from(double u) const {
        if (auto* np = as_nonparametric()) {
            double best = 0.0;
            for (std::size_t c = cell_of(*np, std::max(u, np->edges.front())); c < np->values.size(); ++c)
                best = std::max(best, np->values[c]);
            return best;
        }
        return std::max(value(u), 0.0);
    }

    // Integral of max(phi, 0) over [0, inf).
    double positive_norm() const {
        if (auto* np = as_nonparametric()) {
            double acc = 0.0;
            for (std::size_t c = 0; c < np->values.size(); ++c)
                acc += std::max(np->values[c], 0.0) * (np->edges[c + 1] - np->edges[c]);
            return acc;
        }
        return std::max(norm(), 0.0);
    }

private:
    using Rep = std::variant<ExponentialKernel, PowerLawKernel, NonParametricKernel>;
    explicit Kernel(Rep r) : rep_(std::move(r)) {}

    // Index c with edges[c] <= t < edges[c+1]; values.size() when outside.
    static std::size_t cell_of(const NonParametricKernel& np, double t) {
        if (t < np.edges.front() || t >= np.edges.back()) return np.values.size();
        auto it = std::upper_bound(np.edges.begin(), np.edges.end(), t);
        return static_cast<std::size_t>(it - np.edges.begin()) - 1;
    }

    Rep rep_;
};

}  // namespace chp

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chp/error.hpp"
#include "chp/event_type.hpp"
#include "chp/kernel.hpp"

namespace chp {

inline constexpr double kNasdaqOpen = 34200.0;   // 09:30:00
inline constexpr double kNasdaqClose = 57600.0;  // 16:00:00
inline constexpr double kDefaultTodBinSeconds = 1800.0;

template <typename T>
using PerEvent = std::array<T, kNumEventTypes>;

template <typename T>
using EventMatrix = std::array<std::array<T, kNumEventTypes>, kNumEventTypes>;

// 12-dimensional Hawkes model with time-of-day stepped baselines.
// kernels[i][j] is the excitation of dimension i by events of dimension j.
struct HawkesModel {
    PerEvent<std::vector<double>> baselines;  // [event][tod bin], events/second
    EventMatrix<Kernel> kernels;
    double spread_beta{1.0};
    double tod_bin_seconds{kDefaultTodBinSeconds};
    double session_start{kNasdaqOpen};  // time of day, seconds after midnight
    double session_end{kNasdaqClose};

    double session_length() const { return session_end - session_start; }

    std::size_t num_bins() const {
        return static_cast<std::size_t>(std::ceil(session_length() / tod_bin_seconds - 1e-9));
    }

    // Zero-based bin index of a session time; the last bin absorbs rounding.
    std::size_t bin_index(double t) const {
        if (!(t >= 0.0) || !(t < session_length()))
            throw RangeError("time " + std::to_string(t) + " outside session [0, " +
                             std::to_string(session_length()) + ")");
        const auto b = static_cast<std::size_t>(std::floor(t / tod_bin_seconds));
        return std::min(b, num_bins() - 1);
    }

    // One-based time-of-day bin Q(t) in 1..num_bins().
    std::size_t tod_bin(double t) const { return bin_index(t) + 1; }

    // Start of the bin following the one containing t.
    double next_bin_boundary(double t) const {
        const auto b = bin_index(t);
        return b + 1 >= num_bins() ? session_length() : static_cast<double>(b + 1) * tod_bin_seconds;
    }

    double baseline(EventType e, double t) const { return baselines[index(e)][bin_index(t)]; }

    // A model with all kernels zero and a constant baseline per event.
    static HawkesModel poisson(const PerEvent<double>& rates, double spread_beta = 1.0) {
        HawkesModel m;
        m.spread_beta = spread_beta;
        const auto bins = m.num_bins();
        for (std::size_t i = 0; i < kNumEventTypes; ++i) m.baselines[i].assign(bins, rates[i]);
        return m;
    }

    // Throws ContractViolation on shape or sign violations.
    void validate() const {
        if (!(tod_bin_seconds > 0.0)) throw ContractViolation("tod_bin_seconds must be positive");
        if (!(session_end > session_start)) throw ContractViolation("session_end must follow session_start");
        if (!(spread_beta > 0.0)) throw ContractViolation("spread_beta must be positive");
        const auto bins = num_bins();
        for (std::size_t i = 0; i < kNumEventTypes; ++i) {
            if (baselines[i].size() != bins)
                throw ContractViolation("baseline row " + std::string(name(event_type_from_index(i))) + " has " +
                                        std::to_string(baselines[i].size()) + " bins, expected " +
                                        std::to_string(bins));
            for (double mu : baselines[i]) {
                if (!(mu >= 0.0) || !std::isfinite(mu)) throw ContractViolation("baselines must be finite and >= 0");
            }
        }
    }
};

// Matrix of |norm(kernels[i][j])|.
inline Eigen::MatrixXd abs_norm_matrix(const HawkesModel& m) {
    Eigen::MatrixXd a(kNumEventTypes, kNumEventTypes);
    for (std::size_t i = 0; i < kNumEventTypes; ++i)
        for (std::size_t j = 0; j < kNumEventTypes; ++j) a(i, j) = std::abs(m.kernels[i][j].norm());
    return a;
}

inline double spectral_radius(const Eigen::MatrixXd& a) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_radius(const HawkesModel& m) { return spectral_radius(abs_norm_matrix(m)); }

inline bool is_stable(const HawkesModel& m) { return spectral_radius(m) < 1.0; }

// lambda_i(t) = mu_i(Q(t)) + sum_j sum_{T_j < t} phi_ij(t - T_j), before flooring.
// Kernels count event occurrences only; sizes do not enter.
inline double raw_intensity(EventType i, double t, std::span<const EventRecord> history, const HawkesModel& model) {
    double r = model.baseline(i, t);
    const auto& row = model.kernels[index(i)];
    for (const auto& ev : history) {
        if (!(ev.time < t)) break;
        r += row[index(ev.type)].value(t - ev.time);
    }
    return r;
}

}  // namespace chp

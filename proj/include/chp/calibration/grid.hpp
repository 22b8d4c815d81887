#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "chp/error.hpp"

namespace chp {

// Lag grid for kernel estimation: n_lin cells of width dt_lin, followed by
// n_log cells whose right edges grow geometrically, L * rho^m with
// L = n_lin * dt_lin.
struct EstimationGrid {
    double dt_lin{0.001};
    std::size_t n_lin{100};
    double rho{1.3};
    std::size_t n_log{30};

    void validate() const {
        if (!(dt_lin > 0.0)) throw ContractViolation("grid dt_lin must be positive");
        if (n_lin == 0) throw ContractViolation("grid needs at least one linear cell");
        if (n_log > 0 && !(rho > 1.0)) throw ContractViolation("grid rho must exceed 1");
    }

    std::vector<double> edges() const {
        validate();
        std::vector<double> e;
        e.reserve(n_lin + n_log + 1);
        for (std::size_t k = 0; k <= n_lin; ++k) e.push_back(static_cast<double>(k) * dt_lin);
        const double lin_end = e.back();
        for (std::size_t m = 1; m <= n_log; ++m) e.push_back(lin_end * std::pow(rho, static_cast<double>(m)));
        return e;
    }

    std::vector<double> widths() const {
        const auto e = edges();
        std::vector<double> w(e.size() - 1);
        for (std::size_t c = 0; c < w.size(); ++c) w[c] = e[c + 1] - e[c];
        return w;
    }

    std::size_t num_cells() const { return n_lin + n_log; }
    double tau_max() const { return edges().back(); }
};

}  // namespace chp

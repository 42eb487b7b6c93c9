#pragma once

#include <cmath>
#include <limits>

#include "mfrisk/density.hpp"
#include "mfrisk/errors.hpp"

namespace mfrisk {

/// Per-zone fidelity comparison between a true distribution P and its
/// approximation Q. efficiency_pct = 100 - info_overhead_pct, where the
/// overhead is KL(P||Q) relative to H(P). May be negative when KL > H.
struct FidelityReport {
    double zone_mph = 0.0;
    double entropy_bits = 0.0;
    double kl_bits = 0.0;
    double info_overhead_pct = 0.0;
    double efficiency_pct = 0.0;
};

namespace detail {
inline void require_normalized(const DiscreteDistribution& p, const char* op) {
    double total = 0.0;
    for (const double m : p.masses) total += m;
    if (std::abs(total - 1.0) > 1e-9)
        throw input_error(std::string(op) + ": distribution is not normalized");
}
}  // namespace detail

// H(P) = -sum p_i log2(p_i), with 0 log 0 = 0.
inline double shannon_entropy(const DiscreteDistribution& p) {
    detail::require_normalized(p, "shannon_entropy");
    double h = 0.0;
    for (const double m : p.masses)
        if (m > 0.0) h -= m * std::log2(m);
    return std::max(h, 0.0);
}

// KL(P||Q) = sum p_i log2(p_i / q_i) over a shared grid.
inline double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    if (p.grid.size() != q.grid.size())
        throw input_error("kl_divergence: grids differ in length");
    for (std::size_t i = 0; i < p.grid.size(); ++i)
        if (std::abs(p.grid[i] - q.grid[i]) > 1e-9)
            throw input_error("kl_divergence: grids do not match");
    detail::require_normalized(p, "kl_divergence");
    detail::require_normalized(q, "kl_divergence");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.masses.size(); ++i) {
        if (p.masses[i] <= 0.0) continue;
        if (q.masses[i] <= 0.0) return std::numeric_limits<double>::infinity();
        kl += p.masses[i] * std::log2(p.masses[i] / q.masses[i]);
    }
    return std::max(kl, 0.0);
}

inline FidelityReport approximation_efficiency(const DiscreteDistribution& p,
                                               const DiscreteDistribution& q) {
    FidelityReport report;
    report.entropy_bits = shannon_entropy(p);
    if (!(report.entropy_bits > 0.0))
        throw input_error("approximation_efficiency: zero-entropy distribution");
    report.kl_bits = kl_divergence(p, q);
    report.info_overhead_pct = 100.0 * report.kl_bits / report.entropy_bits;
    report.efficiency_pct = 100.0 - report.info_overhead_pct;
    return report;
}

}  // namespace mfrisk

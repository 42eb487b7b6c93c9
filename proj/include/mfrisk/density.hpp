#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "mfrisk/errors.hpp"
#include "mfrisk/rng.hpp"

namespace mfrisk {

/// Gaussian kernel density estimate: the kernel width is the standard
/// deviation of the kernel placed on each sample point.
struct Density {
    std::vector<double> samples;
    double width = 1.0;
};

/// Normalized point masses on a strictly increasing grid.
struct DiscreteDistribution {
    std::vector<double> grid;
    std::vector<double> masses;

    DiscreteDistribution(std::vector<double> g, std::vector<double> m)
        : grid(std::move(g)), masses(std::move(m)) {
        if (grid.size() != masses.size())
            throw input_error("discrete distribution: grid and masses differ in length");
        if (grid.empty()) throw input_error("discrete distribution: empty");
        double total = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (i > 0 && !(grid[i] > grid[i - 1]))
                throw input_error("discrete distribution: grid must be strictly increasing");
            if (masses[i] < 0.0) throw input_error("discrete distribution: negative mass");
            total += masses[i];
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw input_error("discrete distribution: masses must sum to 1");
    }
};

inline Density kde_fit(std::vector<double> samples, double width) {
    if (samples.empty()) throw input_error("kde_fit: empty sample set");
    if (!(width > 0.0)) throw input_error("kde_fit: kernel width must be positive");
    return Density{std::move(samples), width};
}

inline double density_evaluate(const Density& d, double x) {
    const double inv_h = 1.0 / d.width;
    const double norm = inv_h / std::sqrt(2.0 * std::numbers::pi);
    double sum = 0.0;
    for (const double s : d.samples) {
        const double z = (x - s) * inv_h;
        sum += std::exp(-0.5 * z * z);
    }
    return norm * sum / static_cast<double>(d.samples.size());
}

inline double density_cdf(const Density& d, double x) {
    const double inv_h = 1.0 / d.width;
    double sum = 0.0;
    for (const double s : d.samples) sum += 0.5 * std::erfc(-(x - s) * inv_h / std::numbers::sqrt2);
    return sum / static_cast<double>(d.samples.size());
}

/// Exact draw from the KDE: uniform sample point plus kernel noise.
inline double density_sample(const Density& d, CounterRng& rng) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(d.samples.size()));
    return d.samples[j] + d.width * rng.normal();
}

inline std::pair<double, double> sample_range(const Density& d) {
    const auto [lo, hi] = std::minmax_element(d.samples.begin(), d.samples.end());
    return {*lo, *hi};
}

// Masses proportional to the density at the grid points, floored at 1e-12
// so downstream divergences stay finite, then renormalized.
inline DiscreteDistribution discretize(const Density& d, std::span<const double> grid) {
    if (grid.size() < 2) throw input_error("discretize: need at least 2 grid points");
    std::vector<double> masses(grid.size());
    double total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw input_error("discretize: grid must be strictly increasing");
        masses[i] = std::max(density_evaluate(d, grid[i]), 1e-12);
        total += masses[i];
    }
    for (double& m : masses) m /= total;
    return DiscreteDistribution(std::vector<double>(grid.begin(), grid.end()), std::move(masses));
}

/// Shared evaluation grid covering both densities' samples padded by eight
/// kernel widths, in uniform steps.
inline std::vector<double> fidelity_grid(const Density& p, const Density& q, double step = 0.5) {
    if (!(step > 0.0)) throw input_error("fidelity_grid: step must be positive");
    const auto [plo, phi] = sample_range(p);
    const auto [qlo, qhi] = sample_range(q);
    const double pad = 8.0 * std::max(p.width, q.width);
    const double lo = std::min(plo, qlo) - pad;
    const double hi = std::max(phi, qhi) + pad;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step)) + 1;
    std::vector<double> grid(std::max<std::size_t>(n, 2));
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = lo + static_cast<double>(i) * step;
    return grid;
}

}  // namespace mfrisk

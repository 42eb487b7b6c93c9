#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mfrisk/rng.hpp"

namespace oracle {

// Trapezoidal quadrature on a uniform grid.
inline double trapezoid(const std::function<double(double)>& f, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double sum = 0.5 * (f(lo) + f(hi));
    for (int i = 1; i < n; ++i) sum += f(lo + i * h);
    return sum * h;
}

// Standard normal CDF from the Taylor series
//   Phi(x) = 1/2 + phi(x) * (x + x^3/3 + x^5/(3*5) + ...)
// with the series evaluated in long double. Valid for |x| <= 8; the result
// for larger |x| saturates to 0/1 far below the tolerances used in tests.
// This is an independent route from the erfc-based implementation.
inline double normal_cdf_series(double x) {
    if (x < -8.0) return 1.0 - normal_cdf_series(-x);
    if (x > 8.0) return 1.0;
    const long double xl = x;
    long double term = xl;
    long double sum = xl;
    for (int k = 1; k < 400; ++k) {
        term *= xl * xl / (2.0L * k + 1.0L);
        sum += term;
        if (std::abs((double)term) < 1e-20) break;
    }
    const long double pdf = std::exp(-0.5L * xl * xl) / std::sqrt(2.0L * 3.14159265358979323846264338327950288L);
    return static_cast<double>(0.5L + pdf * sum);
}

// Kolmogorov-Smirnov statistic between samples and a reference CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        ks = std::max(ks, std::abs(f - static_cast<double>(i + 1) / n));
        ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
    }
    return ks;
}

// Random normalized masses for property tests.
inline std::vector<double> random_masses(std::size_t n, mfrisk::CounterRng& rng) {
    std::vector<double> m(n);
    double total = 0.0;
    for (double& v : m) {
        v = 1e-6 + rng.uniform();
        total += v;
    }
    for (double& v : m) v /= total;
    return m;
}

inline std::vector<double> unit_grid(std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i);
    return g;
}

}  // namespace oracle

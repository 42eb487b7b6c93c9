#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mfrisk/csv.hpp"
#include "mfrisk/errors.hpp"

namespace mfrisk {

enum class CrashType { pedestrian, side_impact, front_impact };

inline std::string to_string(CrashType t) {
    switch (t) {
        case CrashType::pedestrian: return "pedestrian";
        case CrashType::side_impact: return "side_impact";
        default: return "front_impact";
    }
}

inline CrashType crash_type_from(std::string_view token) {
    if (token == "pedestrian") return CrashType::pedestrian;
    if (token == "side_impact") return CrashType::side_impact;
    if (token == "front_impact") return CrashType::front_impact;
    throw input_error("unknown crash type '" + std::string(token) + "'");
}

/// Observed fatality fraction at one impact speed, weighted by sample size.
struct CurvePoint {
    double speed_mph = 0.0;
    double fatality_fraction = 0.0;
    double n_obs = 1.0;
};

/// Probit fatality curve: p(fatal | speed) = Phi(a + b * speed), b > 0.
struct FatalityCurve {
    CrashType crash_type = CrashType::pedestrian;
    double intercept_a = 0.0;
    double slope_b = 0.0;
};

inline double standard_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double standard_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Inverse standard normal CDF (Acklam's rational approximation plus one
/// Halley refinement); absolute error well below 1e-12 on (0, 1).
inline double standard_normal_inv(double p) {
    if (!(p > 0.0) || !(p < 1.0)) throw input_error("standard_normal_inv: p outside (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against the forward CDF; skipped in the far tails
    // where exp(x^2/2) would overflow and the approximation is already
    // far more accurate than anything downstream needs.
    if (std::abs(x) > 8.0) return x;
    const double e = standard_normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

/// log Phi(x), stable across both tails.
inline double log_standard_normal_cdf(double x) {
    if (x > -37.0) {
        const double p = standard_normal_cdf(x);
        if (p > 0.5) return std::log1p(-standard_normal_cdf(-x));
        return std::log(p);
    }
    // asymptotic expansion for the far lower tail where erfc underflows
    const double x2 = x * x;
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
           std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

namespace detail {

// Fractions of exactly 0 or 1 are pulled inside (0,1) by half an
// observation so the probit transform stays finite.
inline double corrected_fraction(const CurvePoint& pt) {
    const double nudge = 1.0 / (2.0 * pt.n_obs);
    if (pt.fatality_fraction <= 0.0) return nudge;
    if (pt.fatality_fraction >= 1.0) return 1.0 - nudge;
    return pt.fatality_fraction;
}

// Both tails of Phi evaluated directly, so p and q = 1 - p each carry full
// relative precision even when the other saturates.
struct TailPair {
    double p;  // Phi(eta)
    double q;  // Phi(-eta)
};

inline TailPair tails(double eta) {
    return {std::max(standard_normal_cdf(eta), 1e-300),
            std::max(standard_normal_cdf(-eta), 1e-300)};
}

}  // namespace detail

/// Weighted binomial probit log-likelihood at (a, b).
inline double probit_loglik(std::span<const CurvePoint> points, double a, double b) {
    double ll = 0.0;
    for (const auto& pt : points) {
        const double y = detail::corrected_fraction(pt);
        const double eta = a + b * pt.speed_mph;
        ll += pt.n_obs *
              (y * log_standard_normal_cdf(eta) + (1.0 - y) * log_standard_normal_cdf(-eta));
    }
    return ll;
}

inline std::array<double, 2> probit_loglik_gradient(std::span<const CurvePoint> points,
                                                    double a, double b) {
    double ga = 0.0, gb = 0.0;
    for (const auto& pt : points) {
        const double y = detail::corrected_fraction(pt);
        const double eta = a + b * pt.speed_mph;
        const auto [p, q] = detail::tails(eta);
        const double g = pt.n_obs * standard_normal_pdf(eta) * (y - p) / (p * q);
        ga += g;
        gb += g * pt.speed_mph;
    }
    return {ga, gb};
}

/// Maximum-likelihood probit fit via damped Newton iterations. Falls back to
/// the Fisher information when the observed Hessian is not negative definite.
inline FatalityCurve probit_fit(std::span<const CurvePoint> points, CrashType type) {
    if (points.size() < 2) throw input_error("probit_fit: need at least 2 points");
    std::vector<double> speeds;
    bool any_low = false, any_high = false;
    for (const auto& pt : points) {
        if (!(pt.n_obs > 0.0)) throw input_error("probit_fit: n_obs must be positive");
        if (pt.fatality_fraction < 0.0 || pt.fatality_fraction > 1.0)
            throw input_error("probit_fit: fatality fraction outside [0, 1]");
        speeds.push_back(pt.speed_mph);
        if (pt.fatality_fraction < 1.0) any_low = true;
        if (pt.fatality_fraction > 0.0) any_high = true;
    }
    std::sort(speeds.begin(), speeds.end());
    if (speeds.back() - speeds.front() < 1e-12)
        throw input_error("probit_fit: all points share one speed");
    if (!any_low || !any_high)
        throw input_error("probit_fit: fractions are all 0 or all 1");

    // Start from a weighted linear fit of the probit-transformed fractions.
    double sw = 0.0, sx = 0.0, sz = 0.0, sxx = 0.0, sxz = 0.0;
    for (const auto& pt : points) {
        const double z = standard_normal_inv(detail::corrected_fraction(pt));
        sw += pt.n_obs;
        sx += pt.n_obs * pt.speed_mph;
        sz += pt.n_obs * z;
        sxx += pt.n_obs * pt.speed_mph * pt.speed_mph;
        sxz += pt.n_obs * pt.speed_mph * z;
    }
    const double det0 = sw * sxx - sx * sx;
    double b = det0 != 0.0 ? (sw * sxz - sx * sz) / det0 : 0.0;
    double a = (sz - b * sx) / sw;

    double ll = probit_loglik(points, a, b);
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
        double ga = 0.0, gb = 0.0;
        double haa = 0.0, hab = 0.0, hbb = 0.0;  // observed Hessian
        double faa = 0.0, fab = 0.0, fbb = 0.0;  // Fisher information
        for (const auto& pt : points) {
            const double y = detail::corrected_fraction(pt);
            const double s = pt.speed_mph;
            const double eta = a + b * s;
            const auto [p, q] = detail::tails(eta);
            const double phi = standard_normal_pdf(eta);
            const double g = pt.n_obs * phi * (y - p) / (p * q);
            const double h = pt.n_obs * (-eta * phi * (y - p) / (p * q) +
                                         phi * phi * (-p * q - (y - p) * (q - p)) / (p * p * q * q));
            const double f = pt.n_obs * phi * phi / (p * q);
            ga += g;
            gb += g * s;
            haa += h;
            hab += h * s;
            hbb += h * s * s;
            faa += f;
            fab += f * s;
            fbb += f * s * s;
        }

        double newton_da = 0.0, newton_db = 0.0;
        bool have_newton = false;
        const double hdet = haa * hbb - hab * hab;
        if (haa < 0.0 && hdet > 0.0) {
            newton_da = -(hbb * ga - hab * gb) / hdet;
            newton_db = -(haa * gb - hab * ga) / hdet;
            have_newton = true;
        }
        const double fdet = faa * fbb - fab * fab;
        if (!(fdet > 0.0) && !have_newton)
            throw numeric_error("probit_fit: singular information matrix");
        const double fisher_da = fdet > 0.0 ? (fbb * ga - fab * gb) / fdet : 0.0;
        const double fisher_db = fdet > 0.0 ? (faa * gb - fab * ga) / fdet : 0.0;

        // Try the Newton direction first, the Fisher-scoring direction as a
        // fallback; never accept a step that lowers the likelihood.
        bool moved = false;
        double step_a = 0.0, step_b = 0.0;
        for (int which = 0; which < 2 && !moved; ++which) {
            const double da = which == 0 && have_newton ? newton_da : fisher_da;
            const double db = which == 0 && have_newton ? newton_db : fisher_db;
            if (da == 0.0 && db == 0.0) continue;
            for (double t = 1.0; t > 1e-12; t *= 0.5) {
                const double next_ll = probit_loglik(points, a + t * da, b + t * db);
                if (next_ll > ll) {
                    a += t * da;
                    b += t * db;
                    ll = next_ll;
                    step_a = t * da;
                    step_b = t * db;
                    moved = true;
                    break;
                }
            }
        }
        if (!moved) {
            // no ascent representable in double: at the numerical optimum
            converged = true;
            break;
        }
        if (std::max(std::abs(step_a), std::abs(step_b)) <
            1e-10 * (1.0 + std::abs(a) + std::abs(b))) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw numeric_error("probit_fit: did not converge (possible perfect separation)");
    if (!(b > 0.0))
        throw numeric_error("probit_fit: fitted slope is not positive");
    return FatalityCurve{type, a, b};
}

inline double fatality_probability(const FatalityCurve& curve, double speed) {
    return standard_normal_cdf(curve.intercept_a + curve.slope_b * speed);
}

inline double survival_probability(const FatalityCurve& curve, double speed) {
    return 1.0 - fatality_probability(curve, speed);
}

inline constexpr std::string_view kFatalityHeader =
    "crash_type,speed_mph,fatality_fraction,n_obs";

/// Parses the fatality points CSV, keyed by crash type.
inline std::map<CrashType, std::vector<CurvePoint>> parse_fatality_points(std::istream& in) {
    std::map<CrashType, std::vector<CurvePoint>> points;
    for (const auto& [row, fields] : csv::read_table(in, kFatalityHeader)) {
        if (fields.size() != 4)
            throw input_error("row " + std::to_string(row) + ": expected 4 fields, got " +
                              std::to_string(fields.size()));
        CurvePoint pt;
        CrashType type;
        try {
            type = crash_type_from(fields[0]);
        } catch (const input_error&) {
            throw input_error("row " + std::to_string(row) + ": unknown crash type '" + fields[0] + "'");
        }
        pt.speed_mph = csv::parse_double(fields[1], row, "speed_mph");
        pt.fatality_fraction = csv::parse_double(fields[2], row, "fatality_fraction");
        if (pt.fatality_fraction < 0.0 || pt.fatality_fraction > 1.0)
            throw input_error("row " + std::to_string(row) + ": fatality_fraction outside [0, 1]");
        pt.n_obs = csv::parse_double(fields[3], row, "n_obs");
        if (!(pt.n_obs > 0.0))
            throw input_error("row " + std::to_string(row) + ": n_obs must be positive");
        points[type].push_back(pt);
    }
    return points;
}

inline void write_fatality_points(std::ostream& out,
                                  const std::map<CrashType, std::vector<CurvePoint>>& points) {
    out << kFatalityHeader << "\n";
    for (const auto& [type, pts] : points)
        for (const auto& pt : pts)
            out << to_string(type) << ',' << csv::format_double(pt.speed_mph) << ','
                << csv::format_double(pt.fatality_fraction) << ',' << csv::format_double(pt.n_obs)
                << "\n";
}

}  // namespace mfrisk

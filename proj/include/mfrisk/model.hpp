#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "mfrisk/data.hpp"
#include "mfrisk/errors.hpp"
#include "mfrisk/rng.hpp"

namespace mfrisk {

/// One regression observation: zone-average baseline speed, external-sign
/// indicator, and the observed speed under the IVS condition.
struct TrainingRow {
    double baseline_speed = 0.0;
    int delta_es = 0;
    double target_speed = 0.0;
};

struct ModelWeights {
    std::array<double, 4> pooled{};  // intercept, linear, sign offset, curvature
    std::vector<std::array<double, 4>> fold_weights;
};

struct PredActual {
    double predicted = 0.0;
    double actual = 0.0;
};

struct CvResult {
    std::vector<std::array<double, 4>> fold_weights;
    std::vector<PredActual> predictions;
};

inline std::array<double, 4> design_row(double baseline_speed, int delta) {
    return {1.0, baseline_speed, static_cast<double>(delta), baseline_speed * baseline_speed};
}

inline double predict(const std::array<double, 4>& w, double baseline_speed, int delta) {
    const auto x = design_row(baseline_speed, delta);
    return w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + w[3] * x[3];
}

namespace detail {

// Householder QR on the n x 4 design with unit-normalized columns; the
// normalization keeps the rank test meaningful across feature scales.
inline std::array<double, 4> solve_least_squares(std::vector<std::array<double, 4>> x,
                                                 std::vector<double> y) {
    const std::size_t n = x.size();
    constexpr std::size_t kCols = 4;
    std::array<double, kCols> scale{};
    for (std::size_t j = 0; j < kCols; ++j) {
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += x[i][j] * x[i][j];
        scale[j] = std::sqrt(norm);
        if (!(scale[j] > 0.0)) throw numeric_error("least squares: zero design column");
        for (std::size_t i = 0; i < n; ++i) x[i][j] /= scale[j];
    }

    for (std::size_t k = 0; k < kCols; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < n; ++i) norm += x[i][k] * x[i][k];
        norm = std::sqrt(norm);
        if (norm < 1e-10) throw numeric_error("least squares: rank-deficient design");
        const double alpha = x[k][k] >= 0.0 ? -norm : norm;
        std::vector<double> v(n - k);
        v[0] = x[k][k] - alpha;
        for (std::size_t i = k + 1; i < n; ++i) v[i - k] = x[i][k];
        double vtv = 0.0;
        for (const double vi : v) vtv += vi * vi;
        if (vtv > 0.0) {
            for (std::size_t j = k; j < kCols; ++j) {
                double dot = 0.0;
                for (std::size_t i = k; i < n; ++i) dot += v[i - k] * x[i][j];
                const double f = 2.0 * dot / vtv;
                for (std::size_t i = k; i < n; ++i) x[i][j] -= f * v[i - k];
            }
            double dot = 0.0;
            for (std::size_t i = k; i < n; ++i) dot += v[i - k] * y[i];
            const double f = 2.0 * dot / vtv;
            for (std::size_t i = k; i < n; ++i) y[i] -= f * v[i - k];
        }
        x[k][k] = alpha;
    }

    std::array<double, kCols> w{};
    for (std::size_t k = kCols; k-- > 0;) {
        double acc = y[k];
        for (std::size_t j = k + 1; j < kCols; ++j) acc -= x[k][j] * w[j];
        if (std::abs(x[k][k]) < 1e-10) throw numeric_error("least squares: rank-deficient design");
        w[k] = acc / x[k][k];
    }
    for (std::size_t j = 0; j < kCols; ++j) w[j] /= scale[j];
    return w;
}

}  // namespace detail

/// Ordinary least squares for the quadratic speed model.
inline std::array<double, 4> fit_least_squares(std::span<const TrainingRow> rows) {
    if (rows.size() < 4)
        throw input_error("fit_least_squares: need at least 4 rows, got " +
                          std::to_string(rows.size()));
    std::vector<std::array<double, 4>> x;
    std::vector<double> y;
    x.reserve(rows.size());
    y.reserve(rows.size());
    for (const auto& r : rows) {
        if (!std::isfinite(r.baseline_speed) || !std::isfinite(r.target_speed))
            throw input_error("fit_least_squares: non-finite row");
        x.push_back(design_row(r.baseline_speed, r.delta_es));
        y.push_back(r.target_speed);
    }
    return detail::solve_least_squares(std::move(x), std::move(y));
}

/// Seeded k-fold cross-validation: shuffles rows once, holds out each fold,
/// fits on the complement, and collects held-out predictions.
inline CvResult kfold_cv(std::span<const TrainingRow> rows, int k, CounterRng& rng) {
    if (k < 2) throw input_error("kfold_cv: k must be at least 2");
    if (rows.size() < static_cast<std::size_t>(k))
        throw input_error("kfold_cv: fewer rows than folds");

    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_below(i)]);

    CvResult result;
    result.fold_weights.reserve(k);
    result.predictions.reserve(rows.size());
    const std::size_t base = rows.size() / static_cast<std::size_t>(k);
    const std::size_t extra = rows.size() % static_cast<std::size_t>(k);
    std::size_t start = 0;
    for (int fold = 0; fold < k; ++fold) {
        const std::size_t size = base + (static_cast<std::size_t>(fold) < extra ? 1 : 0);
        const std::size_t end = start + size;
        std::vector<TrainingRow> train;
        train.reserve(rows.size() - size);
        for (std::size_t i = 0; i < order.size(); ++i)
            if (i < start || i >= end) train.push_back(rows[order[i]]);
        const auto w = fit_least_squares(train);
        result.fold_weights.push_back(w);
        for (std::size_t i = start; i < end; ++i) {
            const auto& r = rows[order[i]];
            result.predictions.push_back({predict(w, r.baseline_speed, r.delta_es), r.target_speed});
        }
        start = end;
    }
    return result;
}

struct FoldPrediction {
    double mean = 0.0;
    double sem = 0.0;  // standard error of the fold means
};

inline FoldPrediction predict_folds(const ModelWeights& w, double baseline_speed, int delta) {
    if (w.fold_weights.empty())
        throw input_error("predict_folds: no fold weights available");
    double mean = 0.0;
    for (const auto& fw : w.fold_weights) mean += predict(fw, baseline_speed, delta);
    mean /= static_cast<double>(w.fold_weights.size());
    double ss = 0.0;
    for (const auto& fw : w.fold_weights) {
        const double d = predict(fw, baseline_speed, delta) - mean;
        ss += d * d;
    }
    const auto k = static_cast<double>(w.fold_weights.size());
    const double sd = k > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    return {mean, sd / std::sqrt(k)};
}

inline double median_abs_error(std::span<const PredActual> pairs) {
    if (pairs.empty()) throw input_error("median_abs_error: empty input");
    std::vector<double> abs_err;
    abs_err.reserve(pairs.size());
    for (const auto& p : pairs) abs_err.push_back(std::abs(p.predicted - p.actual));
    std::sort(abs_err.begin(), abs_err.end());
    const std::size_t n = abs_err.size();
    if (n % 2 == 1) return abs_err[n / 2];
    return 0.5 * (abs_err[n / 2 - 1] + abs_err[n / 2]);
}

/// Participant-pooled mean baseline speed per zone from low-fidelity records.
inline std::map<double, double> zone_baseline_averages(std::span<const SpeedRecord> records) {
    std::map<double, std::pair<double, long>> acc;
    for (const auto& r : records) {
        if (r.fidelity != Fidelity::low || r.ivs_present) continue;
        auto& [sum, count] = acc[r.zone_mph];
        sum += r.speed_mph;
        ++count;
    }
    std::map<double, double> averages;
    for (const auto& [zone, sc] : acc) averages[zone] = sc.first / static_cast<double>(sc.second);
    return averages;
}

/// Pairs each low-fidelity IVS observation with its zone's baseline average.
inline std::vector<TrainingRow> build_training_rows(std::span<const SpeedRecord> records) {
    const auto baselines = zone_baseline_averages(records);
    if (baselines.empty())
        throw input_error("build_training_rows: no low-fidelity baseline records");
    std::vector<TrainingRow> rows;
    for (const auto& r : records) {
        if (r.fidelity != Fidelity::low || !r.ivs_present) continue;
        const auto it = baselines.find(r.zone_mph);
        if (it == baselines.end())
            throw input_error("build_training_rows: zone " + csv::format_double(r.zone_mph) +
                              " has IVS records but no baseline records");
        rows.push_back({it->second, delta_es(condition_of(r)), r.speed_mph});
    }
    if (rows.empty()) throw input_error("build_training_rows: no IVS-condition records");
    return rows;
}

}  // namespace mfrisk

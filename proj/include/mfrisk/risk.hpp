#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <thread>
#include <vector>

#include "mfrisk/data.hpp"
#include "mfrisk/density.hpp"
#include "mfrisk/errors.hpp"
#include "mfrisk/fatality.hpp"
#include "mfrisk/model.hpp"
#include "mfrisk/rng.hpp"

namespace mfrisk {

enum class Outcome { fatality = 0, survival = 1 };

// Unit loss: -1 for a fatality, +1 for survival.
inline constexpr double loss(Outcome o) { return o == Outcome::fatality ? -1.0 : 1.0; }

/// Marginal probability of posted speed zones.
struct ZoneMarginal {
    std::vector<double> zones;
    std::vector<double> probabilities;

    ZoneMarginal(std::vector<double> z, std::vector<double> p)
        : zones(std::move(z)), probabilities(std::move(p)) {
        if (zones.empty()) throw input_error("zone marginal: no zones");
        if (zones.size() != probabilities.size())
            throw input_error("zone marginal: zones and probabilities differ in length");
        double total = 0.0;
        for (const double w : probabilities) {
            if (w < 0.0) throw input_error("zone marginal: negative probability");
            total += w;
        }
        if (!(total > 0.0)) throw input_error("zone marginal: probabilities sum to zero");
        for (double& w : probabilities) w /= total;
    }

    static ZoneMarginal uniform(std::vector<double> z) {
        const std::size_t n = z.size();
        if (n == 0) throw input_error("zone marginal: no zones");
        return ZoneMarginal(std::move(z), std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    double sample(CounterRng& rng) const {
        const double u = rng.uniform();
        double cum = 0.0;
        for (std::size_t i = 0; i < zones.size(); ++i) {
            cum += probabilities[i];
            if (u < cum) return zones[i];
        }
        return zones.back();
    }
};

inline constexpr std::array<Condition, 3> kConditions = {
    Condition::baseline, Condition::ivs_plus_es, Condition::ivs_minus_es};

inline constexpr std::array<CrashType, 3> kCrashTypes = {
    CrashType::pedestrian, CrashType::side_impact, CrashType::front_impact};

/// Speed sampling densities per (condition, zone).
struct ConditionDistributions {
    double kernel_width = 2.0;
    std::map<Condition, std::map<double, Density>> entries;

    const Density& at(Condition c, double zone) const {
        const auto ci = entries.find(c);
        if (ci == entries.end())
            throw input_error("condition distributions: missing condition " + to_string(c));
        const auto zi = ci->second.find(zone);
        if (zi == ci->second.end())
            throw input_error("condition distributions: missing zone " + csv::format_double(zone) +
                              " for condition " + to_string(c));
        return zi->second;
    }
};

/// Per-zone KDE over hourly weighted-average speeds from binned counts.
inline std::map<double, Density> build_baseline_densities(std::span<const BinnedZoneCount> bins,
                                                          double bin_width, double kde_width) {
    std::map<double, Density> densities;
    for (auto& [zone, averages] : hourly_average_speeds(bins, bin_width))
        densities.emplace(zone, kde_fit(std::move(averages), kde_width));
    if (densities.empty()) throw input_error("build_baseline_densities: no bins");
    return densities;
}

/// Builds the per-condition speed distributions: the baseline densities pass
/// through unchanged; for each IVS condition, baseline-average draws are
/// mapped through the fitted quadratic model and re-estimated with a KDE of
/// the prediction kernel width. One draw set per zone serves both conditions.
inline ConditionDistributions build_condition_distributions(
    const std::map<double, Density>& baseline, const ModelWeights& weights, int n_pred,
    double pred_kernel_width, std::uint64_t seed) {
    if (baseline.empty()) throw input_error("build_condition_distributions: no baseline densities");
    if (n_pred < 1) throw input_error("build_condition_distributions: n_pred must be positive");
    if (!(pred_kernel_width > 0.0))
        throw input_error("build_condition_distributions: kernel width must be positive");

    ConditionDistributions result;
    result.kernel_width = pred_kernel_width;
    result.entries[Condition::baseline] = baseline;

    std::uint64_t zone_index = 0;
    for (const auto& [zone, density] : baseline) {
        CounterRng rng(seed, zone_index++);
        std::vector<double> draws(static_cast<std::size_t>(n_pred));
        for (double& d : draws) d = density_sample(density, rng);
        for (const Condition c : {Condition::ivs_plus_es, Condition::ivs_minus_es}) {
            std::vector<double> predicted;
            predicted.reserve(draws.size());
            const int delta = delta_es(c);
            for (const double s : draws) predicted.push_back(predict(weights.pooled, s, delta));
            result.entries[c].emplace(zone, kde_fit(std::move(predicted), pred_kernel_width));
        }
    }
    return result;
}

/// Expected value of the unit-loss outcome per crash estimate.
struct RiskEstimate {
    Condition condition = Condition::baseline;
    CrashType crash_type = CrashType::pedestrian;
    double ev_mean = 0.0;
    double ev_se = 0.0;
    long n_trials = 0;
};

/// Exact expectation of the unit loss over a discretized speed distribution.
inline double expected_value_closed_form(const DiscreteDistribution& speeds,
                                         const FatalityCurve& curve) {
    double ev = 0.0;
    for (std::size_t i = 0; i < speeds.grid.size(); ++i) {
        const double pf = fatality_probability(curve, speeds.grid[i]);
        ev += speeds.masses[i] * (pf * loss(Outcome::fatality) + (1.0 - pf) * loss(Outcome::survival));
    }
    return ev;
}

namespace detail {

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace detail

/// Monte-Carlo risk simulation. Each trial draws a zone, then one speed per
/// condition, and scores the exact expected unit loss against every fatality
/// curve. Trial randomness depends only on (master_seed, trial index), and
/// accumulation runs over fixed-size blocks reduced in a fixed order, so
/// results are bit-identical for any worker count.
inline std::vector<RiskEstimate> monte_carlo_risk(const ZoneMarginal& zone_marginal,
                                                  const ConditionDistributions& dists,
                                                  const std::map<CrashType, FatalityCurve>& curves,
                                                  long n_trials, std::uint64_t master_seed,
                                                  int workers = 0) {
    if (n_trials < 1) throw input_error("monte_carlo_risk: n_trials must be at least 1");
    for (const CrashType t : kCrashTypes)
        if (curves.find(t) == curves.end())
            throw input_error("monte_carlo_risk: missing fatality curve for " + to_string(t));
    for (const Condition c : kConditions)
        for (const double z : zone_marginal.zones) (void)dists.at(c, z);

    constexpr std::size_t kCells = 9;  // 3 conditions x 3 crash types
    constexpr long kBlock = 4096;
    const long n_blocks = (n_trials + kBlock - 1) / kBlock;
    const std::uint64_t sim_seed = substream_seed(master_seed, "simulate");

    struct CellPartial {
        std::array<double, kCells> sum{};
        std::array<double, kCells> sumsq{};
    };
    std::vector<CellPartial> partials(static_cast<std::size_t>(n_blocks));

    std::array<const FatalityCurve*, 3> curve_ptr{};
    for (std::size_t t = 0; t < kCrashTypes.size(); ++t)
        curve_ptr[t] = &curves.at(kCrashTypes[t]);

    const auto run_block = [&](long block) {
        std::array<detail::KahanSum, kCells> sum{};
        std::array<detail::KahanSum, kCells> sumsq{};
        const long begin = block * kBlock;
        const long end = std::min(n_trials, begin + kBlock);
        for (long trial = begin; trial < end; ++trial) {
            CounterRng rng(sim_seed, static_cast<std::uint64_t>(trial));
            const double zone = zone_marginal.sample(rng);
            for (std::size_t c = 0; c < kConditions.size(); ++c) {
                const double speed = density_sample(dists.at(kConditions[c], zone), rng);
                for (std::size_t t = 0; t < kCrashTypes.size(); ++t) {
                    const double pf = fatality_probability(*curve_ptr[t], speed);
                    const double ev =
                        pf * loss(Outcome::fatality) + (1.0 - pf) * loss(Outcome::survival);
                    sum[c * 3 + t].add(ev);
                    sumsq[c * 3 + t].add(ev * ev);
                }
            }
        }
        auto& out = partials[static_cast<std::size_t>(block)];
        for (std::size_t i = 0; i < kCells; ++i) {
            out.sum[i] = sum[i].sum;
            out.sumsq[i] = sumsq[i].sum;
        }
    };

    int n_workers = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    n_workers = std::clamp<int>(n_workers, 1, static_cast<int>(n_blocks));
    if (n_workers == 1) {
        for (long b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::atomic<long> next_block{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w)
            pool.emplace_back([&] {
                for (long b = next_block.fetch_add(1); b < n_blocks; b = next_block.fetch_add(1))
                    run_block(b);
            });
        for (auto& th : pool) th.join();
    }

    std::array<detail::KahanSum, kCells> sum{};
    std::array<detail::KahanSum, kCells> sumsq{};
    for (const auto& p : partials)
        for (std::size_t i = 0; i < kCells; ++i) {
            sum[i].add(p.sum[i]);
            sumsq[i].add(p.sumsq[i]);
        }

    std::vector<RiskEstimate> estimates;
    estimates.reserve(kCells);
    const auto n = static_cast<double>(n_trials);
    for (std::size_t c = 0; c < kConditions.size(); ++c)
        for (std::size_t t = 0; t < kCrashTypes.size(); ++t) {
            const std::size_t i = c * 3 + t;
            RiskEstimate est;
            est.condition = kConditions[c];
            est.crash_type = kCrashTypes[t];
            est.n_trials = n_trials;
            est.ev_mean = sum[i].sum / n;
            if (n_trials > 1) {
                const double var = std::max(0.0, (sumsq[i].sum - n * est.ev_mean * est.ev_mean) /
                                                     (n - 1.0));
                est.ev_se = std::sqrt(var / n);
            }
            estimates.push_back(est);
        }
    return estimates;
}

enum class SafetyLabel { safer, comparable, riskier };

inline std::string to_string(SafetyLabel l) {
    switch (l) {
        case SafetyLabel::safer: return "safer";
        case SafetyLabel::comparable: return "comparable";
        default: return "riskier";
    }
}

/// One IVS condition versus baseline for one crash type.
struct BaselineComparison {
    CrashType crash_type = CrashType::pedestrian;
    Condition condition = Condition::ivs_plus_es;
    double ev_diff = 0.0;  // condition minus baseline; positive is safer
    double two_se = 0.0;   // separation threshold
    SafetyLabel label = SafetyLabel::comparable;
};

/// Labels each IVS condition safer/comparable/riskier than baseline using a
/// two-standard-error separation rule on the EV difference.
inline std::vector<BaselineComparison> compare_to_baseline(std::span<const RiskEstimate> estimates) {
    const auto find = [&](Condition c, CrashType t) -> const RiskEstimate* {
        for (const auto& e : estimates)
            if (e.condition == c && e.crash_type == t) return &e;
        return nullptr;
    };
    std::vector<BaselineComparison> report;
    for (const CrashType t : kCrashTypes) {
        const RiskEstimate* base = find(Condition::baseline, t);
        for (const Condition c : {Condition::ivs_plus_es, Condition::ivs_minus_es}) {
            const RiskEstimate* est = find(c, t);
            if (est == nullptr) continue;
            if (base == nullptr)
                throw input_error("compare_to_baseline: missing baseline estimate for " +
                                  to_string(t));
            BaselineComparison cmp;
            cmp.crash_type = t;
            cmp.condition = c;
            cmp.ev_diff = est->ev_mean - base->ev_mean;
            cmp.two_se = 2.0 * std::sqrt(est->ev_se * est->ev_se + base->ev_se * base->ev_se);
            if (cmp.ev_diff > cmp.two_se) cmp.label = SafetyLabel::safer;
            else if (cmp.ev_diff < -cmp.two_se) cmp.label = SafetyLabel::riskier;
            else cmp.label = SafetyLabel::comparable;
            report.push_back(cmp);
        }
    }
    return report;
}

}  // namespace mfrisk

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mfrisk/data.hpp"
#include "mfrisk/errors.hpp"
#include "mfrisk/fatality.hpp"
#include "mfrisk/rng.hpp"

namespace mfrisk {

/// Calibration targets for the synthetic dataset. Speeds are drawn from
/// normal location/scale families per (zone, condition) cell: the location
/// is the zone's posted speed scaled by the percent-posted target plus a
/// per-participant offset, the scale is the cell spread. All draws are
/// deterministic in (config, seed).
struct SyntheticConfig {
    std::vector<double> zones = {40.0, 50.0, 55.0, 60.0};

    // Percent-posted-speed targets per condition; the IVS vectors are
    // parallel to `zones`.
    double baseline_pct = 106.8;
    std::vector<double> ivs_plus_es_pct = {96.0, 105.5, 107.3, 109.0};
    std::vector<double> ivs_minus_es_pct = {119.0, 123.0, 125.0, 127.0};

    int participants_per_group = 12;
    int rows_per_cell = 600;  // records per (zone, group, IVS phase)
    double lowfi_speed_sd_mph = 3.5;
    double participant_sd_mph = 1.0;

    int hifi_hours = 168;
    int hifi_vehicles_per_hour = 120;
    double hifi_speed_sd_mph = 6.0;
    double hifi_hourly_drift_sd_mph = 1.0;
    double hifi_pct = 106.8;
    double bin_width_mph = 5.0;

    struct CurveSpec {
        double intercept_a;
        double slope_b;
    };
    CurveSpec pedestrian{-7.5, 0.30};
    CurveSpec side_impact{-2.75, 0.091};
    CurveSpec front_impact{-3.80, 0.08};
    double fatality_speed_min = 5.0;
    double fatality_speed_max = 85.0;
    double fatality_speed_step = 5.0;
    int fatality_n_obs = 2000;

    void validate() const {
        if (zones.empty()) throw input_error("synthetic config: empty zone list");
        for (const double z : zones)
            if (!(z > 0.0)) throw input_error("synthetic config: zones must be positive");
        if (ivs_plus_es_pct.size() != zones.size() || ivs_minus_es_pct.size() != zones.size())
            throw input_error("synthetic config: percent targets must match the zone list");
        if (!(lowfi_speed_sd_mph > 0.0) || !(participant_sd_mph >= 0.0) ||
            !(hifi_speed_sd_mph > 0.0) || !(hifi_hourly_drift_sd_mph >= 0.0))
            throw input_error("synthetic config: spreads must be positive");
        if (!(baseline_pct > 0.0) || !(hifi_pct > 0.0))
            throw input_error("synthetic config: percent targets must be positive");
        if (participants_per_group < 1 || rows_per_cell < 1 || hifi_hours < 1 ||
            hifi_vehicles_per_hour < 1 || fatality_n_obs < 1)
            throw input_error("synthetic config: counts must be positive");
        if (!(bin_width_mph > 0.0)) throw input_error("synthetic config: bin width must be positive");
        if (!(fatality_speed_step > 0.0) || !(fatality_speed_max > fatality_speed_min))
            throw input_error("synthetic config: bad fatality speed range");
        for (const CurveSpec& c : {pedestrian, side_impact, front_impact})
            if (!(c.slope_b > 0.0))
                throw input_error("synthetic config: fatality slopes must be positive");
    }
};

struct SyntheticDataset {
    std::vector<SpeedRecord> lowfi;
    std::vector<BinnedZoneCount> hifi;
    std::map<CrashType, std::vector<CurvePoint>> fatality_points;
};

namespace detail {

inline std::string participant_token(char group_tag, int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%c%02d", group_tag, index + 1);
    return buf;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg,
                                                   std::uint64_t seed) {
    cfg.validate();
    SyntheticDataset out;

    // Low fidelity: two participant groups, each driving every zone with the
    // IVS off (baseline) and on.
    const std::uint64_t lowfi_seed = substream_seed(seed, "synthetic-lowfi");
    const std::uint64_t offset_seed = substream_seed(seed, "synthetic-participants");
    const std::array<TechGroup, 2> groups = {TechGroup::ivs_plus_es, TechGroup::ivs_minus_es};
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        CounterRng offset_rng(offset_seed, gi);
        std::vector<double> offsets(static_cast<std::size_t>(cfg.participants_per_group));
        for (double& o : offsets) o = cfg.participant_sd_mph * offset_rng.normal();
        const char tag = gi == 0 ? 'a' : 'b';
        for (std::size_t zi = 0; zi < cfg.zones.size(); ++zi) {
            for (int phase = 0; phase < 2; ++phase) {  // 0 = baseline, 1 = IVS on
                const double pct =
                    phase == 0 ? cfg.baseline_pct
                               : (groups[gi] == TechGroup::ivs_plus_es ? cfg.ivs_plus_es_pct[zi]
                                                                       : cfg.ivs_minus_es_pct[zi]);
                const double mu = cfg.zones[zi] * pct / 100.0;
                CounterRng rng(lowfi_seed, (zi * groups.size() + gi) * 2 + static_cast<std::size_t>(phase));
                for (int r = 0; r < cfg.rows_per_cell; ++r) {
                    const int p = r % cfg.participants_per_group;
                    SpeedRecord rec;
                    rec.participant_id = detail::participant_token(tag, p);
                    rec.fidelity = Fidelity::low;
                    rec.tech_group = groups[gi];
                    rec.ivs_present = phase == 1;
                    rec.zone_mph = cfg.zones[zi];
                    rec.speed_mph = std::max(
                        mu + offsets[static_cast<std::size_t>(p)] + cfg.lowfi_speed_sd_mph * rng.normal(),
                        1.0);
                    out.lowfi.push_back(std::move(rec));
                }
            }
        }
    }

    // High fidelity: hourly binned counts per zone with a small hour-to-hour
    // drift in the hourly mean.
    const std::uint64_t hifi_seed = substream_seed(seed, "synthetic-hifi");
    for (std::size_t zi = 0; zi < cfg.zones.size(); ++zi) {
        CounterRng rng(hifi_seed, zi);
        const double zone_mu = cfg.zones[zi] * cfg.hifi_pct / 100.0;
        for (int hour = 0; hour < cfg.hifi_hours; ++hour) {
            const double hour_mu = zone_mu + cfg.hifi_hourly_drift_sd_mph * rng.normal();
            std::map<double, long> counts;
            for (int v = 0; v < cfg.hifi_vehicles_per_hour; ++v) {
                const double speed = std::max(hour_mu + cfg.hifi_speed_sd_mph * rng.normal(), 0.0);
                const double lower = std::floor(speed / cfg.bin_width_mph) * cfg.bin_width_mph;
                ++counts[lower];
            }
            for (const auto& [lower, count] : counts)
                out.hifi.push_back({cfg.zones[zi], hour, lower, count});
        }
    }

    // Fatality curve points: binomial draws around the true probit curves.
    const std::uint64_t fatal_seed = substream_seed(seed, "synthetic-fatality");
    const std::array<std::pair<CrashType, SyntheticConfig::CurveSpec>, 3> curve_specs = {
        {{CrashType::pedestrian, cfg.pedestrian},
         {CrashType::side_impact, cfg.side_impact},
         {CrashType::front_impact, cfg.front_impact}}};
    for (std::size_t ti = 0; ti < curve_specs.size(); ++ti) {
        const auto& [type, spec] = curve_specs[ti];
        CounterRng rng(fatal_seed, ti);
        for (double s = cfg.fatality_speed_min; s <= cfg.fatality_speed_max + 1e-9;
             s += cfg.fatality_speed_step) {
            const double p = standard_normal_cdf(spec.intercept_a + spec.slope_b * s);
            long k = 0;
            for (int i = 0; i < cfg.fatality_n_obs; ++i)
                if (rng.uniform() < p) ++k;
            out.fatality_points[type].push_back(
                {s, static_cast<double>(k) / static_cast<double>(cfg.fatality_n_obs),
                 static_cast<double>(cfg.fatality_n_obs)});
        }
    }

    return out;
}

}  // namespace mfrisk

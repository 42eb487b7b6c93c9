#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mfrisk/csv.hpp"
#include "mfrisk/errors.hpp"

namespace mfrisk {

enum class Fidelity { low, high };

enum class TechGroup { ivs_plus_es, ivs_minus_es, none };

// Driving condition a speed observation belongs to. IVS rows inherit the
// participant's technology group; rows without IVS active are baseline.
enum class Condition { baseline, ivs_plus_es, ivs_minus_es };

inline std::string to_string(Fidelity f) { return f == Fidelity::low ? "low" : "high"; }

inline std::string to_string(TechGroup g) {
    switch (g) {
        case TechGroup::ivs_plus_es: return "ivs_plus_es";
        case TechGroup::ivs_minus_es: return "ivs_minus_es";
        default: return "none";
    }
}

inline std::string to_string(Condition c) {
    switch (c) {
        case Condition::baseline: return "baseline";
        case Condition::ivs_plus_es: return "ivs_plus_es";
        default: return "ivs_minus_es";
    }
}

/// One observed vehicle speed.
struct SpeedRecord {
    std::string participant_id;
    Fidelity fidelity = Fidelity::low;
    TechGroup tech_group = TechGroup::none;
    bool ivs_present = false;
    double zone_mph = 0.0;   // posted speed of the zone
    double speed_mph = 0.0;  // observed speed
};

/// Count of observations in one 5-mph speed bin for one zone and hour.
struct BinnedZoneCount {
    double zone_mph = 0.0;
    long hour_index = 0;
    double bin_lower_mph = 0.0;
    long count = 0;
};

inline Condition condition_of(const SpeedRecord& r) {
    if (!r.ivs_present) return Condition::baseline;
    if (r.tech_group == TechGroup::ivs_plus_es) return Condition::ivs_plus_es;
    if (r.tech_group == TechGroup::ivs_minus_es) return Condition::ivs_minus_es;
    throw input_error("record with IVS active has no technology group");
}

// External-sign indicator: 1 when IVS is shown alongside roadside signs,
// 0 when it replaces them. Undefined for baseline.
inline int delta_es(Condition c) {
    if (c == Condition::ivs_plus_es) return 1;
    if (c == Condition::ivs_minus_es) return 0;
    throw input_error("delta_es is undefined for the baseline condition");
}

inline bool zone_in_set(double zone, std::span<const double> zones) {
    return std::any_of(zones.begin(), zones.end(),
                       [zone](double z) { return std::abs(z - zone) < 1e-9; });
}

inline constexpr std::string_view kLowfiHeader =
    "participant_id,fidelity,tech_group,ivs_present,zone_mph,speed_mph";
inline constexpr std::string_view kHifiHeader = "zone_mph,hour_index,bin_lower_mph,count";

/// Parses the low-fidelity record CSV; fails with the offending row number.
inline std::vector<SpeedRecord> parse_lowfi_records(std::istream& in,
                                                    std::span<const double> zones) {
    std::vector<SpeedRecord> records;
    for (const auto& [row, fields] : csv::read_table(in, kLowfiHeader)) {
        if (fields.size() != 6)
            throw input_error("row " + std::to_string(row) + ": expected 6 fields, got " +
                              std::to_string(fields.size()));
        SpeedRecord r;
        r.participant_id = fields[0];
        if (r.participant_id.empty())
            throw input_error("row " + std::to_string(row) + ": empty participant_id");

        if (fields[1] == "low") r.fidelity = Fidelity::low;
        else if (fields[1] == "high") r.fidelity = Fidelity::high;
        else throw input_error("row " + std::to_string(row) + ": unknown fidelity '" + fields[1] + "'");

        if (fields[2] == "ivs_plus_es") r.tech_group = TechGroup::ivs_plus_es;
        else if (fields[2] == "ivs_minus_es") r.tech_group = TechGroup::ivs_minus_es;
        else if (fields[2] == "none") r.tech_group = TechGroup::none;
        else throw input_error("row " + std::to_string(row) + ": unknown tech_group '" + fields[2] + "'");

        if (fields[3] == "0") r.ivs_present = false;
        else if (fields[3] == "1") r.ivs_present = true;
        else throw input_error("row " + std::to_string(row) + ": ivs_present must be 0 or 1");

        r.zone_mph = csv::parse_double(fields[4], row, "zone_mph");
        if (!zone_in_set(r.zone_mph, zones))
            throw input_error("row " + std::to_string(row) + ": unknown zone " + fields[4]);

        r.speed_mph = csv::parse_double(fields[5], row, "speed_mph");
        if (!(r.speed_mph > 0.0))
            throw input_error("row " + std::to_string(row) + ": speed must be positive, got " + fields[5]);

        if (r.fidelity == Fidelity::high && (r.tech_group != TechGroup::none || r.ivs_present))
            throw input_error("row " + std::to_string(row) +
                              ": high-fidelity records must be baseline (tech_group none, no IVS)");
        if (r.ivs_present && r.tech_group == TechGroup::none)
            throw input_error("row " + std::to_string(row) + ": IVS active but tech_group is none");

        records.push_back(std::move(r));
    }
    return records;
}

inline void write_lowfi_records(std::ostream& out, std::span<const SpeedRecord> records) {
    out << kLowfiHeader << "\n";
    for (const auto& r : records) {
        out << r.participant_id << ',' << to_string(r.fidelity) << ',' << to_string(r.tech_group)
            << ',' << (r.ivs_present ? '1' : '0') << ',' << csv::format_double(r.zone_mph) << ','
            << csv::format_double(r.speed_mph) << "\n";
    }
}

/// Parses the binned high-fidelity CSV; fails with the offending row number.
inline std::vector<BinnedZoneCount> parse_hifi_bins(std::istream& in,
                                                    std::span<const double> zones,
                                                    double bin_width) {
    if (!(bin_width > 0.0)) throw input_error("bin width must be positive");
    std::vector<BinnedZoneCount> bins;
    for (const auto& [row, fields] : csv::read_table(in, kHifiHeader)) {
        if (fields.size() != 4)
            throw input_error("row " + std::to_string(row) + ": expected 4 fields, got " +
                              std::to_string(fields.size()));
        BinnedZoneCount b;
        b.zone_mph = csv::parse_double(fields[0], row, "zone_mph");
        if (!zone_in_set(b.zone_mph, zones))
            throw input_error("row " + std::to_string(row) + ": unknown zone " + fields[0]);
        b.hour_index = csv::parse_long(fields[1], row, "hour_index");
        if (b.hour_index < 0)
            throw input_error("row " + std::to_string(row) + ": hour_index must be nonnegative");
        b.bin_lower_mph = csv::parse_double(fields[2], row, "bin_lower_mph");
        const double ratio = b.bin_lower_mph / bin_width;
        if (std::abs(ratio - std::round(ratio)) > 1e-9)
            throw input_error("row " + std::to_string(row) + ": bin_lower_mph " + fields[2] +
                              " is not a multiple of the bin width");
        b.count = csv::parse_long(fields[3], row, "count");
        if (b.count < 0)
            throw input_error("row " + std::to_string(row) + ": count must be nonnegative");
        bins.push_back(b);
    }
    return bins;
}

inline void write_hifi_bins(std::ostream& out, std::span<const BinnedZoneCount> bins) {
    out << kHifiHeader << "\n";
    for (const auto& b : bins) {
        out << csv::format_double(b.zone_mph) << ',' << b.hour_index << ','
            << csv::format_double(b.bin_lower_mph) << ',' << b.count << "\n";
    }
}

/// Count-weighted mean of bin centers for one (zone, hour) group.
inline double hourly_weighted_average(std::span<const BinnedZoneCount> bins, double bin_width) {
    if (bins.empty()) throw input_error("hourly_weighted_average: no bins");
    if (!(bin_width > 0.0)) throw input_error("hourly_weighted_average: bin width must be positive");
    double weighted = 0.0;
    double total = 0.0;
    for (const auto& b : bins) {
        if (std::abs(b.zone_mph - bins.front().zone_mph) > 1e-9 ||
            b.hour_index != bins.front().hour_index)
            throw input_error("hourly_weighted_average: bins span multiple zones or hours");
        weighted += (b.bin_lower_mph + bin_width / 2.0) * static_cast<double>(b.count);
        total += static_cast<double>(b.count);
    }
    if (!(total > 0.0)) throw input_error("hourly_weighted_average: zero total count");
    return weighted / total;
}

/// Observed speed as a percentage of the posted speed.
inline double percent_posted_speed(const SpeedRecord& r) {
    if (!(r.zone_mph > 0.0)) throw input_error("percent_posted_speed: zone must be positive");
    return 100.0 * r.speed_mph / r.zone_mph;
}

/// Hourly weighted-average speeds per zone, ordered by hour index.
inline std::map<double, std::vector<double>> hourly_average_speeds(
    std::span<const BinnedZoneCount> bins, double bin_width) {
    std::map<double, std::map<long, std::vector<BinnedZoneCount>>> grouped;
    for (const auto& b : bins) grouped[b.zone_mph][b.hour_index].push_back(b);
    std::map<double, std::vector<double>> averages;
    for (const auto& [zone, hours] : grouped) {
        auto& out = averages[zone];
        out.reserve(hours.size());
        for (const auto& [hour, group] : hours) out.push_back(hourly_weighted_average(group, bin_width));
    }
    return averages;
}

/// Baseline-condition speeds per zone (IVS inactive), any fidelity.
inline std::map<double, std::vector<double>> baseline_speed_samples(
    std::span<const SpeedRecord> records) {
    std::map<double, std::vector<double>> samples;
    for (const auto& r : records)
        if (!r.ivs_present) samples[r.zone_mph].push_back(r.speed_mph);
    return samples;
}

}  // namespace mfrisk

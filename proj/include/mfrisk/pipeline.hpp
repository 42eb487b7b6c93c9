#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfrisk/data.hpp"
#include "mfrisk/density.hpp"
#include "mfrisk/errors.hpp"
#include "mfrisk/fatality.hpp"
#include "mfrisk/infotheory.hpp"
#include "mfrisk/model.hpp"
#include "mfrisk/risk.hpp"
#include "mfrisk/synthetic.hpp"

namespace mfrisk {

/// Run-wide configuration; defaults reenact the reference pipeline.
struct RunConfig {
    std::vector<double> zones = {40.0, 50.0, 55.0, 60.0};
    std::vector<double> zone_weights;  // empty = uniform
    double kernel_width_fidelity_mph = 1.0;
    double kernel_width_prediction_mph = 2.0;
    double bin_width_mph = 5.0;
    double grid_step_mph = 0.5;
    int k_folds = 10;
    int n_pred = 10000;
    long n_trials = 100000;
    std::uint64_t master_seed = 7;
    int workers = 0;  // 0 = hardware concurrency
    std::string lowfi_csv;
    std::string hifi_csv;
    std::string fatality_csv;
    std::string out_dir = "out";
    SyntheticConfig synthetic;

    void validate() const {
        if (zones.empty()) throw input_error("config: empty zone list");
        for (const double z : zones)
            if (!(z > 0.0)) throw input_error("config: zones must be positive");
        if (!zone_weights.empty() && zone_weights.size() != zones.size())
            throw input_error("config: zone_weights must match the zone list");
        if (!(kernel_width_fidelity_mph > 0.0) || !(kernel_width_prediction_mph > 0.0))
            throw input_error("config: kernel widths must be positive");
        if (!(bin_width_mph > 0.0)) throw input_error("config: bin width must be positive");
        if (!(grid_step_mph > 0.0)) throw input_error("config: grid step must be positive");
        if (k_folds < 2) throw input_error("config: k_folds must be at least 2");
        if (n_pred < 1 || n_trials < 1) throw input_error("config: counts must be positive");
        if (workers < 0) throw input_error("config: workers must be nonnegative");
    }
};

namespace artifact {
inline constexpr const char* kLowfiCsv = "lowfi.csv";
inline constexpr const char* kHifiCsv = "hifi.csv";
inline constexpr const char* kFatalityPointsCsv = "fatality_points.csv";
inline constexpr const char* kCompareReport = "compare_report.json";
inline constexpr const char* kModelWeights = "model_weights.json";
inline constexpr const char* kCvMetrics = "cv_metrics.json";
inline constexpr const char* kCvPredictions = "cv_predictions.csv";
inline constexpr const char* kFatalityCurves = "fatality_curves.json";
inline constexpr const char* kConditionDists = "condition_dists.json";
inline constexpr const char* kRiskResults = "risk_results.json";
inline constexpr const char* kRiskResultsCsv = "risk_results.csv";
inline constexpr const char* kBaselineComparison = "baseline_comparison.json";
}  // namespace artifact

// ---------------------------------------------------------------------------
// Config loading

namespace detail {

inline void merge_synthetic(const nlohmann::json& j, SyntheticConfig& s) {
    if (j.contains("zones")) s.zones = j.at("zones").get<std::vector<double>>();
    if (j.contains("baseline_pct")) s.baseline_pct = j.at("baseline_pct").get<double>();
    if (j.contains("ivs_plus_es_pct"))
        s.ivs_plus_es_pct = j.at("ivs_plus_es_pct").get<std::vector<double>>();
    if (j.contains("ivs_minus_es_pct"))
        s.ivs_minus_es_pct = j.at("ivs_minus_es_pct").get<std::vector<double>>();
    if (j.contains("participants_per_group"))
        s.participants_per_group = j.at("participants_per_group").get<int>();
    if (j.contains("rows_per_cell")) s.rows_per_cell = j.at("rows_per_cell").get<int>();
    if (j.contains("lowfi_speed_sd_mph")) s.lowfi_speed_sd_mph = j.at("lowfi_speed_sd_mph").get<double>();
    if (j.contains("participant_sd_mph")) s.participant_sd_mph = j.at("participant_sd_mph").get<double>();
    if (j.contains("hifi_hours")) s.hifi_hours = j.at("hifi_hours").get<int>();
    if (j.contains("hifi_vehicles_per_hour"))
        s.hifi_vehicles_per_hour = j.at("hifi_vehicles_per_hour").get<int>();
    if (j.contains("hifi_speed_sd_mph")) s.hifi_speed_sd_mph = j.at("hifi_speed_sd_mph").get<double>();
    if (j.contains("hifi_hourly_drift_sd_mph"))
        s.hifi_hourly_drift_sd_mph = j.at("hifi_hourly_drift_sd_mph").get<double>();
    if (j.contains("hifi_pct")) s.hifi_pct = j.at("hifi_pct").get<double>();
    if (j.contains("bin_width_mph")) s.bin_width_mph = j.at("bin_width_mph").get<double>();
    const auto merge_curve = [&](const char* key, SyntheticConfig::CurveSpec& spec) {
        if (!j.contains(key)) return;
        spec.intercept_a = j.at(key).at("a").get<double>();
        spec.slope_b = j.at(key).at("b").get<double>();
    };
    merge_curve("pedestrian", s.pedestrian);
    merge_curve("side_impact", s.side_impact);
    merge_curve("front_impact", s.front_impact);
    if (j.contains("fatality_speed_min")) s.fatality_speed_min = j.at("fatality_speed_min").get<double>();
    if (j.contains("fatality_speed_max")) s.fatality_speed_max = j.at("fatality_speed_max").get<double>();
    if (j.contains("fatality_speed_step"))
        s.fatality_speed_step = j.at("fatality_speed_step").get<double>();
    if (j.contains("fatality_n_obs")) s.fatality_n_obs = j.at("fatality_n_obs").get<int>();
}

}  // namespace detail

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw input_error("config '" + path + "': " + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("zones")) cfg.zones = j.at("zones").get<std::vector<double>>();
        if (j.contains("zone_weights"))
            cfg.zone_weights = j.at("zone_weights").get<std::vector<double>>();
        if (j.contains("kernel_width_fidelity_mph"))
            cfg.kernel_width_fidelity_mph = j.at("kernel_width_fidelity_mph").get<double>();
        if (j.contains("kernel_width_prediction_mph"))
            cfg.kernel_width_prediction_mph = j.at("kernel_width_prediction_mph").get<double>();
        if (j.contains("bin_width_mph")) cfg.bin_width_mph = j.at("bin_width_mph").get<double>();
        if (j.contains("grid_step_mph")) cfg.grid_step_mph = j.at("grid_step_mph").get<double>();
        if (j.contains("k_folds")) cfg.k_folds = j.at("k_folds").get<int>();
        if (j.contains("n_pred")) cfg.n_pred = j.at("n_pred").get<int>();
        if (j.contains("n_trials")) cfg.n_trials = j.at("n_trials").get<long>();
        if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
        if (j.contains("inputs")) {
            const auto& in_j = j.at("inputs");
            if (in_j.contains("lowfi_csv")) cfg.lowfi_csv = in_j.at("lowfi_csv").get<std::string>();
            if (in_j.contains("hifi_csv")) cfg.hifi_csv = in_j.at("hifi_csv").get<std::string>();
            if (in_j.contains("fatality_csv"))
                cfg.fatality_csv = in_j.at("fatality_csv").get<std::string>();
        }
        if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("synthetic")) detail::merge_synthetic(j.at("synthetic"), cfg.synthetic);
    } catch (const nlohmann::json::exception& e) {
        throw input_error("config '" + path + "': " + e.what());
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Stage wrapping and file helpers

template <class F>
auto run_stage(const std::string& name, F&& body) {
    try {
        return body();
    } catch (const numeric_error& e) {
        throw numeric_error("stage '" + name + "': " + e.what());
    } catch (const input_error& e) {
        throw input_error("stage '" + name + "': " + e.what());
    } catch (const std::exception& e) {
        throw input_error("stage '" + name + "': " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw input_error("short write to '" + path.string() + "'");
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Input loading

/// Per-zone baseline speed samples from either documented CSV format,
/// detected by header: record files contribute their IVS-inactive rows;
/// binned files contribute bin centers repeated per count.
inline std::map<double, std::vector<double>> load_zone_speed_samples(const std::string& path,
                                                                     std::span<const double> zones,
                                                                     double bin_width) {
    std::ifstream probe(path);
    if (!probe) throw input_error("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(probe, header)) throw input_error("'" + path + "' is empty");
    const std::string_view head = csv::trim_cr(header);
    std::ifstream in(path);
    if (head == kLowfiHeader) {
        const auto records = parse_lowfi_records(in, zones);
        return baseline_speed_samples(records);
    }
    if (head == kHifiHeader) {
        const auto bins = parse_hifi_bins(in, zones, bin_width);
        std::map<double, std::vector<double>> samples;
        for (const auto& b : bins) {
            auto& zone_samples = samples[b.zone_mph];
            zone_samples.insert(zone_samples.end(), static_cast<std::size_t>(b.count),
                                b.bin_lower_mph + bin_width / 2.0);
        }
        return samples;
    }
    throw input_error("'" + path + "' has an unrecognized header");
}

inline std::vector<SpeedRecord> load_lowfi_file(const std::string& path,
                                                std::span<const double> zones) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open '" + path + "'");
    return parse_lowfi_records(in, zones);
}

inline std::vector<BinnedZoneCount> load_hifi_file(const std::string& path,
                                                   std::span<const double> zones, double bin_width) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open '" + path + "'");
    return parse_hifi_bins(in, zones, bin_width);
}

inline std::map<CrashType, std::vector<CurvePoint>> load_fatality_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open '" + path + "'");
    return parse_fatality_points(in);
}

// ---------------------------------------------------------------------------
// Stages

struct ZoneFidelityDensities {
    Density hifi;   // P, the distribution being approximated
    Density lowfi;  // Q, the approximation
};

struct CompareOutput {
    std::vector<FidelityReport> reports;
    double mean_efficiency_pct = 0.0;
    double kernel_width_mph = 1.0;
    double grid_step_mph = 0.5;
    std::map<double, ZoneFidelityDensities> densities;
};

/// Fidelity comparison over every zone present in both sample sets.
inline CompareOutput run_compare(const std::map<double, std::vector<double>>& lowfi,
                                 const std::map<double, std::vector<double>>& hifi,
                                 double kernel_width, double grid_step) {
    CompareOutput out;
    out.kernel_width_mph = kernel_width;
    out.grid_step_mph = grid_step;
    double total = 0.0;
    for (const auto& [zone, low_samples] : lowfi) {
        const auto hi = hifi.find(zone);
        if (hi == hifi.end() || hi->second.empty() || low_samples.empty()) continue;
        ZoneFidelityDensities zd{kde_fit(hi->second, kernel_width),
                                 kde_fit(low_samples, kernel_width)};
        const auto grid = fidelity_grid(zd.hifi, zd.lowfi, grid_step);
        const auto p = discretize(zd.hifi, grid);
        const auto q = discretize(zd.lowfi, grid);
        FidelityReport report = approximation_efficiency(p, q);
        report.zone_mph = zone;
        total += report.efficiency_pct;
        out.reports.push_back(report);
        out.densities.emplace(zone, std::move(zd));
    }
    if (out.reports.empty())
        throw input_error("no overlapping zones between the low- and high-fidelity inputs");
    out.mean_efficiency_pct = total / static_cast<double>(out.reports.size());
    return out;
}

struct ModelOutput {
    ModelWeights weights;
    std::vector<TrainingRow> rows;
    CvResult cv;
    double median_abs_error_mph = 0.0;
    int k = 10;
    std::uint64_t seed = 0;
};

/// Pooled fit plus seeded k-fold cross-validation on low-fidelity records.
inline ModelOutput run_fit_model(std::span<const SpeedRecord> records, int k,
                                 std::uint64_t master_seed) {
    ModelOutput out;
    out.k = k;
    out.seed = master_seed;
    out.rows = build_training_rows(records);
    out.weights.pooled = fit_least_squares(out.rows);
    CounterRng rng(substream_seed(master_seed, "kfold"), 0);
    out.cv = kfold_cv(out.rows, k, rng);
    out.weights.fold_weights = out.cv.fold_weights;
    out.median_abs_error_mph = median_abs_error(out.cv.predictions);
    return out;
}

inline std::map<CrashType, FatalityCurve> run_fit_probit(
    const std::map<CrashType, std::vector<CurvePoint>>& points) {
    if (points.empty()) throw input_error("no fatality points");
    std::map<CrashType, FatalityCurve> curves;
    for (const auto& [type, pts] : points) curves.emplace(type, probit_fit(pts, type));
    return curves;
}

inline ConditionDistributions run_build_dists(std::span<const BinnedZoneCount> bins,
                                              const ModelWeights& weights, const RunConfig& cfg) {
    const auto baseline =
        build_baseline_densities(bins, cfg.bin_width_mph, cfg.kernel_width_prediction_mph);
    return build_condition_distributions(baseline, weights, cfg.n_pred,
                                         cfg.kernel_width_prediction_mph,
                                         substream_seed(cfg.master_seed, "build-dists"));
}

inline ZoneMarginal zone_marginal_from(const RunConfig& cfg) {
    if (cfg.zone_weights.empty()) return ZoneMarginal::uniform(cfg.zones);
    return ZoneMarginal(cfg.zones, cfg.zone_weights);
}

inline std::vector<RiskEstimate> run_simulate(const RunConfig& cfg,
                                              const ConditionDistributions& dists,
                                              const std::map<CrashType, FatalityCurve>& curves) {
    return monte_carlo_risk(zone_marginal_from(cfg), dists, curves, cfg.n_trials, cfg.master_seed,
                            cfg.workers);
}

// ---------------------------------------------------------------------------
// Artifact serialization

inline nlohmann::json compare_to_json(const CompareOutput& out) {
    nlohmann::json zones = nlohmann::json::array();
    for (const auto& r : out.reports)
        zones.push_back({{"zone_mph", r.zone_mph},
                         {"entropy_bits", r.entropy_bits},
                         {"kl_bits", r.kl_bits},
                         {"info_overhead_pct", r.info_overhead_pct},
                         {"efficiency_pct", r.efficiency_pct}});
    return {{"zones", zones},
            {"mean_efficiency_pct", out.mean_efficiency_pct},
            {"kernel_width_mph", out.kernel_width_mph},
            {"grid_step_mph", out.grid_step_mph}};
}

inline nlohmann::json weights_to_json(const ModelOutput& out) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& fw : out.weights.fold_weights)
        folds.push_back({fw[0], fw[1], fw[2], fw[3]});
    return {{"pooled", {out.weights.pooled[0], out.weights.pooled[1], out.weights.pooled[2],
                        out.weights.pooled[3]}},
            {"folds", folds},
            {"k", out.k},
            {"seed", out.seed}};
}

inline ModelWeights weights_from_json(const nlohmann::json& j) {
    ModelWeights w;
    const auto pooled = j.at("pooled").get<std::vector<double>>();
    if (pooled.size() != 4) throw input_error("weights: pooled must have 4 entries");
    std::copy(pooled.begin(), pooled.end(), w.pooled.begin());
    for (const auto& fj : j.at("folds")) {
        const auto fold = fj.get<std::vector<double>>();
        if (fold.size() != 4) throw input_error("weights: each fold must have 4 entries");
        std::array<double, 4> fw{};
        std::copy(fold.begin(), fold.end(), fw.begin());
        w.fold_weights.push_back(fw);
    }
    return w;
}

inline nlohmann::json curves_to_json(const std::map<CrashType, FatalityCurve>& curves) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [type, c] : curves)
        arr.push_back({{"crash_type", to_string(type)}, {"a", c.intercept_a}, {"b", c.slope_b}});
    return {{"curves", arr}};
}

inline std::map<CrashType, FatalityCurve> curves_from_json(const nlohmann::json& j) {
    std::map<CrashType, FatalityCurve> curves;
    for (const auto& cj : j.at("curves")) {
        const CrashType type = crash_type_from(cj.at("crash_type").get<std::string>());
        curves[type] = FatalityCurve{type, cj.at("a").get<double>(), cj.at("b").get<double>()};
        if (!(curves[type].slope_b > 0.0))
            throw input_error("curves: slope must be positive for " + to_string(type));
    }
    return curves;
}

inline nlohmann::json dists_to_json(const ConditionDistributions& dists) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [cond, zones] : dists.entries)
        for (const auto& [zone, density] : zones)
            entries.push_back({{"condition", to_string(cond)},
                               {"zone_mph", zone},
                               {"samples", density.samples},
                               {"width", density.width}});
    return {{"kernel_width_mph", dists.kernel_width}, {"entries", entries}};
}

inline ConditionDistributions dists_from_json(const nlohmann::json& j) {
    ConditionDistributions dists;
    dists.kernel_width = j.at("kernel_width_mph").get<double>();
    for (const auto& ej : j.at("entries")) {
        const std::string cond_token = ej.at("condition").get<std::string>();
        Condition cond;
        if (cond_token == "baseline") cond = Condition::baseline;
        else if (cond_token == "ivs_plus_es") cond = Condition::ivs_plus_es;
        else if (cond_token == "ivs_minus_es") cond = Condition::ivs_minus_es;
        else throw input_error("distributions: unknown condition '" + cond_token + "'");
        dists.entries[cond].emplace(
            ej.at("zone_mph").get<double>(),
            kde_fit(ej.at("samples").get<std::vector<double>>(), ej.at("width").get<double>()));
    }
    return dists;
}

inline nlohmann::json results_to_json(std::span<const RiskEstimate> estimates) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : estimates)
        arr.push_back({{"condition", to_string(e.condition)},
                       {"crash_type", to_string(e.crash_type)},
                       {"ev_mean", e.ev_mean},
                       {"ev_se", e.ev_se},
                       {"n_trials", e.n_trials}});
    return arr;
}

inline std::vector<RiskEstimate> results_from_json(const nlohmann::json& j) {
    std::vector<RiskEstimate> estimates;
    for (const auto& ej : j) {
        RiskEstimate e;
        const std::string cond_token = ej.at("condition").get<std::string>();
        if (cond_token == "baseline") e.condition = Condition::baseline;
        else if (cond_token == "ivs_plus_es") e.condition = Condition::ivs_plus_es;
        else if (cond_token == "ivs_minus_es") e.condition = Condition::ivs_minus_es;
        else throw input_error("results: unknown condition '" + cond_token + "'");
        e.crash_type = crash_type_from(ej.at("crash_type").get<std::string>());
        e.ev_mean = ej.at("ev_mean").get<double>();
        e.ev_se = ej.at("ev_se").get<double>();
        e.n_trials = ej.at("n_trials").get<long>();
        estimates.push_back(e);
    }
    return estimates;
}

inline std::string results_to_csv(std::span<const RiskEstimate> estimates) {
    std::ostringstream out;
    out << "condition,crash_type,ev_mean,ev_se,n_trials\n";
    for (const auto& e : estimates)
        out << to_string(e.condition) << ',' << to_string(e.crash_type) << ','
            << csv::format_double(e.ev_mean) << ',' << csv::format_double(e.ev_se) << ','
            << e.n_trials << "\n";
    return out.str();
}

inline nlohmann::json comparisons_to_json(std::span<const BaselineComparison> comparisons) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : comparisons)
        arr.push_back({{"crash_type", to_string(c.crash_type)},
                       {"condition", to_string(c.condition)},
                       {"ev_diff", c.ev_diff},
                       {"two_se", c.two_se},
                       {"label", to_string(c.label)}});
    return {{"comparisons", arr}};
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw input_error("'" + path + "': " + e.what());
    }
    return j;
}

// ---------------------------------------------------------------------------
// Figure data

namespace detail {

inline std::vector<double> padded_grid(double lo, double hi, double step) {
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step)) + 1;
    std::vector<double> grid(std::max<std::size_t>(n, 2));
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = lo + static_cast<double>(i) * step;
    return grid;
}

}  // namespace detail

/// Writes plot-ready CSVs for the fidelity densities, model fit, probit
/// curves, condition marginals, and risk bars. Column order is stable and
/// reruns on identical inputs emit identical bytes.
inline void emit_figure_data(const CompareOutput& compare, const ModelOutput& model,
                             const std::map<CrashType, FatalityCurve>& curves,
                             const ConditionDistributions& dists, const ZoneMarginal& marginal,
                             std::span<const RiskEstimate> estimates,
                             const std::filesystem::path& out_dir) {
    const std::filesystem::path fig_dir = out_dir / "figures";

    for (const auto& [zone, zd] : compare.densities) {
        const auto grid = fidelity_grid(zd.hifi, zd.lowfi, compare.grid_step_mph);
        const std::string zone_tag = csv::format_double(zone);
        for (const auto& [name, density] :
             {std::pair<const char*, const Density*>{"high", &zd.hifi},
              std::pair<const char*, const Density*>{"low", &zd.lowfi}}) {
            std::ostringstream out;
            out << "speed_mph,density\n";
            for (const double x : grid)
                out << csv::format_double(x) << ',' << csv::format_double(density_evaluate(*density, x))
                    << "\n";
            write_text_file(fig_dir / ("density_" + std::string(name) + "_zone" + zone_tag + ".csv"),
                            out.str());
        }
    }

    {
        std::ostringstream out;
        out << "baseline_speed_mph,delta_es,actual_mph,predicted_mph\n";
        for (const auto& r : model.rows)
            out << csv::format_double(r.baseline_speed) << ',' << r.delta_es << ','
                << csv::format_double(r.target_speed) << ','
                << csv::format_double(predict(model.weights.pooled, r.baseline_speed, r.delta_es))
                << "\n";
        write_text_file(fig_dir / "model_scatter.csv", out.str());
    }

    {
        double lo = model.rows.front().baseline_speed, hi = lo;
        for (const auto& r : model.rows) {
            lo = std::min(lo, r.baseline_speed);
            hi = std::max(hi, r.baseline_speed);
        }
        std::ostringstream out;
        out << "condition,baseline_speed_mph,mean_mph,sem_mph\n";
        for (const Condition c : {Condition::ivs_plus_es, Condition::ivs_minus_es})
            for (const double s : detail::padded_grid(lo - 5.0, hi + 5.0, 0.5)) {
                const auto band = predict_folds(model.weights, s, delta_es(c));
                out << to_string(c) << ',' << csv::format_double(s) << ','
                    << csv::format_double(band.mean) << ',' << csv::format_double(band.sem) << "\n";
            }
        write_text_file(fig_dir / "model_curves.csv", out.str());
    }

    {
        std::ostringstream out;
        out << "crash_type,speed_mph,fatality_probability\n";
        for (const auto& [type, curve] : curves)
            for (const double s : detail::padded_grid(0.0, 100.0, 0.5))
                out << to_string(type) << ',' << csv::format_double(s) << ','
                    << csv::format_double(fatality_probability(curve, s)) << "\n";
        write_text_file(fig_dir / "probit_curves.csv", out.str());
    }

    {
        // Zone-marginalized sampling distributions per condition.
        std::ostringstream out;
        out << "condition,speed_mph,density\n";
        for (const auto& [cond, zones] : dists.entries) {
            double lo = 0.0, hi = 0.0;
            bool first = true;
            double max_width = 0.0;
            for (const auto& [zone, density] : zones) {
                const auto [dlo, dhi] = sample_range(density);
                lo = first ? dlo : std::min(lo, dlo);
                hi = first ? dhi : std::max(hi, dhi);
                max_width = std::max(max_width, density.width);
                first = false;
            }
            for (const double x :
                 detail::padded_grid(lo - 8.0 * max_width, hi + 8.0 * max_width, 0.5)) {
                double mix = 0.0;
                for (std::size_t zi = 0; zi < marginal.zones.size(); ++zi)
                    mix += marginal.probabilities[zi] *
                           density_evaluate(dists.at(cond, marginal.zones[zi]), x);
                out << to_string(cond) << ',' << csv::format_double(x) << ','
                    << csv::format_double(mix) << "\n";
            }
        }
        write_text_file(fig_dir / "condition_marginals.csv", out.str());
    }

    {
        std::ostringstream out;
        out << "condition,crash_type,ev_mean,ev_se,n_trials\n";
        for (const auto& e : estimates)
            out << to_string(e.condition) << ',' << to_string(e.crash_type) << ','
                << csv::format_double(e.ev_mean) << ',' << csv::format_double(e.ev_se) << ','
                << e.n_trials << "\n";
        write_text_file(fig_dir / "risk_bars.csv", out.str());
    }
}

// ---------------------------------------------------------------------------
// Full pipeline

struct PipelineResult {
    CompareOutput compare;
    ModelOutput model;
    std::map<CrashType, FatalityCurve> curves;
    ConditionDistributions dists;
    std::vector<RiskEstimate> estimates;
    std::vector<BaselineComparison> comparisons;
};

/// Runs compare, model fit, probit fit, distribution construction, the risk
/// simulation, and the baseline comparison; writes every artifact under the
/// configured output directory.
inline PipelineResult run_full_pipeline(const RunConfig& cfg) {
    cfg.validate();
    PipelineResult r;
    const std::filesystem::path out_dir = cfg.out_dir;

    r.compare = run_stage("compare", [&] {
        const auto lowfi = load_zone_speed_samples(cfg.lowfi_csv, cfg.zones, cfg.bin_width_mph);
        const auto hifi = load_zone_speed_samples(cfg.hifi_csv, cfg.zones, cfg.bin_width_mph);
        return run_compare(lowfi, hifi, cfg.kernel_width_fidelity_mph, cfg.grid_step_mph);
    });
    write_text_file(out_dir / artifact::kCompareReport, dump_json(compare_to_json(r.compare)));

    r.model = run_stage("model", [&] {
        const auto records = load_lowfi_file(cfg.lowfi_csv, cfg.zones);
        return run_fit_model(records, cfg.k_folds, cfg.master_seed);
    });
    write_text_file(out_dir / artifact::kModelWeights, dump_json(weights_to_json(r.model)));
    write_text_file(out_dir / artifact::kCvMetrics,
                    dump_json({{"median_abs_error_mph", r.model.median_abs_error_mph},
                               {"n_predictions", r.model.cv.predictions.size()}}));
    {
        std::ostringstream out;
        out << "predicted_mph,actual_mph\n";
        for (const auto& p : r.model.cv.predictions)
            out << csv::format_double(p.predicted) << ',' << csv::format_double(p.actual) << "\n";
        write_text_file(out_dir / artifact::kCvPredictions, out.str());
    }

    r.curves = run_stage("fatality", [&] {
        return run_fit_probit(load_fatality_file(cfg.fatality_csv));
    });
    write_text_file(out_dir / artifact::kFatalityCurves, dump_json(curves_to_json(r.curves)));

    r.dists = run_stage("distributions", [&] {
        const auto bins = load_hifi_file(cfg.hifi_csv, cfg.zones, cfg.bin_width_mph);
        return run_build_dists(bins, r.model.weights, cfg);
    });
    write_text_file(out_dir / artifact::kConditionDists, dump_json(dists_to_json(r.dists)));

    r.estimates = run_stage("simulate", [&] { return run_simulate(cfg, r.dists, r.curves); });
    write_text_file(out_dir / artifact::kRiskResults, dump_json(results_to_json(r.estimates)));

    r.comparisons = run_stage("report", [&] { return compare_to_baseline(r.estimates); });
    write_text_file(out_dir / artifact::kBaselineComparison,
                    dump_json(comparisons_to_json(r.comparisons)));

    run_stage("figures", [&] {
        emit_figure_data(r.compare, r.model, r.curves, r.dists, zone_marginal_from(cfg),
                         r.estimates, out_dir);
        return 0;
    });

    return r;
}

inline void print_summary(std::ostream& out, const PipelineResult& r) {
    for (const auto& report : r.compare.reports) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "[compare] zone %g: H(P)=%.3f bits, KL(P||Q)=%.3f bits, E(Q)=%.1f%%",
                      report.zone_mph, report.entropy_bits, report.kl_bits, report.efficiency_pct);
        out << line << "\n";
    }
    {
        char line[160];
        std::snprintf(line, sizeof(line), "[compare] mean E(Q) = %.1f%%", r.compare.mean_efficiency_pct);
        out << line << "\n";
    }
    {
        const auto& w = r.model.weights.pooled;
        char line[200];
        std::snprintf(line, sizeof(line),
                      "[model] pooled weights: w0=%.4f w1=%.4f w2=%.4f w3=%.6f (k=%d, median "
                      "|error|=%.2f mph)",
                      w[0], w[1], w[2], w[3], r.model.k, r.model.median_abs_error_mph);
        out << line << "\n";
    }
    for (const auto& [type, curve] : r.curves) {
        char line[160];
        std::snprintf(line, sizeof(line), "[fatality] %s: p(fatal|s) = Phi(%.4f + %.4f s)",
                      to_string(type).c_str(), curve.intercept_a, curve.slope_b);
        out << line << "\n";
    }
    for (const auto& e : r.estimates) {
        char line[160];
        std::snprintf(line, sizeof(line), "[risk] %s / %s: EV = %.3f +/- %.3f (n=%ld)",
                      to_string(e.condition).c_str(), to_string(e.crash_type).c_str(), e.ev_mean,
                      e.ev_se, e.n_trials);
        out << line << "\n";
    }
    for (const auto& c : r.comparisons) {
        char line[160];
        std::snprintf(line, sizeof(line), "[report] %s: %s is %s vs baseline (dEV=%+.3f, 2SE=%.3f)",
                      to_string(c.crash_type).c_str(), to_string(c.condition).c_str(),
                      to_string(c.label).c_str(), c.ev_diff, c.two_se);
        out << line << "\n";
    }
}

}  // namespace mfrisk

// Command-line front end for the multifidelity risk estimation pipeline.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mfrisk/pipeline.hpp"

namespace {

struct GlobalFlags {
    std::string config_path;
    std::string out_dir;
    std::string lowfi_csv;
    std::string hifi_csv;
    std::string fatality_csv;
    std::string format = "json";
    std::uint64_t seed = 0;
    long trials = 0;
    int workers = -1;
    bool seed_set = false;
    bool trials_set = false;
};

// Config file first, then explicit flags on top.
mfrisk::RunConfig effective_config(const GlobalFlags& flags) {
    mfrisk::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = mfrisk::load_run_config(flags.config_path);
    if (flags.seed_set) cfg.master_seed = flags.seed;
    if (flags.trials_set) cfg.n_trials = flags.trials;
    if (flags.workers >= 0) cfg.workers = flags.workers;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (!flags.lowfi_csv.empty()) cfg.lowfi_csv = flags.lowfi_csv;
    if (!flags.hifi_csv.empty()) cfg.hifi_csv = flags.hifi_csv;
    if (!flags.fatality_csv.empty()) cfg.fatality_csv = flags.fatality_csv;
    cfg.validate();
    return cfg;
}

void require_path(const std::string& path, const char* what) {
    if (path.empty())
        throw mfrisk::input_error(std::string("missing ") + what +
                                  " (pass the flag or set it in the config file)");
}

int run_gen_data(const mfrisk::RunConfig& cfg) {
    const auto dataset = mfrisk::generate_synthetic_dataset(cfg.synthetic, cfg.master_seed);
    const std::filesystem::path dir = cfg.out_dir;
    {
        std::ostringstream out;
        mfrisk::write_lowfi_records(out, dataset.lowfi);
        mfrisk::write_text_file(dir / mfrisk::artifact::kLowfiCsv, out.str());
    }
    {
        std::ostringstream out;
        mfrisk::write_hifi_bins(out, dataset.hifi);
        mfrisk::write_text_file(dir / mfrisk::artifact::kHifiCsv, out.str());
    }
    {
        std::ostringstream out;
        mfrisk::write_fatality_points(out, dataset.fatality_points);
        mfrisk::write_text_file(dir / mfrisk::artifact::kFatalityPointsCsv, out.str());
    }
    std::cout << "[gen-data] wrote " << dataset.lowfi.size() << " low-fidelity records, "
              << dataset.hifi.size() << " high-fidelity bins, and fatality points to " << cfg.out_dir
              << "\n";
    return 0;
}

int run_compare_cmd(const mfrisk::RunConfig& cfg) {
    require_path(cfg.lowfi_csv, "--lowfi input");
    require_path(cfg.hifi_csv, "--hifi input");
    const auto lowfi = mfrisk::load_zone_speed_samples(cfg.lowfi_csv, cfg.zones, cfg.bin_width_mph);
    const auto hifi = mfrisk::load_zone_speed_samples(cfg.hifi_csv, cfg.zones, cfg.bin_width_mph);
    const auto out =
        mfrisk::run_compare(lowfi, hifi, cfg.kernel_width_fidelity_mph, cfg.grid_step_mph);
    mfrisk::write_text_file(std::filesystem::path(cfg.out_dir) / mfrisk::artifact::kCompareReport,
                            mfrisk::dump_json(mfrisk::compare_to_json(out)));
    for (const auto& r : out.reports) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "[compare] zone %g: H(P)=%.3f bits, KL(P||Q)=%.3f bits, E(Q)=%.1f%%",
                      r.zone_mph, r.entropy_bits, r.kl_bits, r.efficiency_pct);
        std::cout << line << "\n";
    }
    std::printf("[compare] mean E(Q) = %.1f%%\n", out.mean_efficiency_pct);
    return 0;
}

int run_fit_model_cmd(const mfrisk::RunConfig& cfg) {
    require_path(cfg.lowfi_csv, "--lowfi input");
    const auto records = mfrisk::load_lowfi_file(cfg.lowfi_csv, cfg.zones);
    const auto out = mfrisk::run_fit_model(records, cfg.k_folds, cfg.master_seed);
    const std::filesystem::path dir = cfg.out_dir;
    mfrisk::write_text_file(dir / mfrisk::artifact::kModelWeights,
                            mfrisk::dump_json(mfrisk::weights_to_json(out)));
    mfrisk::write_text_file(dir / mfrisk::artifact::kCvMetrics,
                            mfrisk::dump_json({{"median_abs_error_mph", out.median_abs_error_mph},
                                               {"n_predictions", out.cv.predictions.size()}}));
    std::ostringstream preds;
    preds << "predicted_mph,actual_mph\n";
    for (const auto& p : out.cv.predictions)
        preds << mfrisk::csv::format_double(p.predicted) << ','
              << mfrisk::csv::format_double(p.actual) << "\n";
    mfrisk::write_text_file(dir / mfrisk::artifact::kCvPredictions, preds.str());
    const auto& w = out.weights.pooled;
    std::printf("[model] pooled weights: w0=%.4f w1=%.4f w2=%.4f w3=%.6f\n", w[0], w[1], w[2], w[3]);
    std::printf("[model] k=%d cross-validated median |error| = %.2f mph\n", out.k,
                out.median_abs_error_mph);
    return 0;
}

int run_fit_probit_cmd(const mfrisk::RunConfig& cfg) {
    require_path(cfg.fatality_csv, "--fatality input");
    const auto curves = mfrisk::run_fit_probit(mfrisk::load_fatality_file(cfg.fatality_csv));
    mfrisk::write_text_file(std::filesystem::path(cfg.out_dir) / mfrisk::artifact::kFatalityCurves,
                            mfrisk::dump_json(mfrisk::curves_to_json(curves)));
    for (const auto& [type, curve] : curves)
        std::printf("[fatality] %s: p(fatal|s) = Phi(%.4f + %.4f s)\n",
                    mfrisk::to_string(type).c_str(), curve.intercept_a, curve.slope_b);
    return 0;
}

int run_build_dists_cmd(const mfrisk::RunConfig& cfg, std::string weights_path) {
    require_path(cfg.hifi_csv, "--hifi input");
    if (weights_path.empty())
        weights_path =
            (std::filesystem::path(cfg.out_dir) / mfrisk::artifact::kModelWeights).string();
    const auto weights = mfrisk::weights_from_json(mfrisk::load_json_file(weights_path));
    const auto bins = mfrisk::load_hifi_file(cfg.hifi_csv, cfg.zones, cfg.bin_width_mph);
    const auto dists = mfrisk::run_build_dists(bins, weights, cfg);
    mfrisk::write_text_file(std::filesystem::path(cfg.out_dir) / mfrisk::artifact::kConditionDists,
                            mfrisk::dump_json(mfrisk::dists_to_json(dists)));
    std::printf("[build-dists] wrote %zu condition/zone densities (kernel width %g mph)\n",
                dists.entries.size() * dists.entries.begin()->second.size(), dists.kernel_width);
    return 0;
}

int run_simulate_cmd(const mfrisk::RunConfig& cfg, std::string dists_path, std::string curves_path,
                     const std::string& format) {
    const std::filesystem::path dir = cfg.out_dir;
    if (dists_path.empty()) dists_path = (dir / mfrisk::artifact::kConditionDists).string();
    if (curves_path.empty()) curves_path = (dir / mfrisk::artifact::kFatalityCurves).string();
    const auto dists = mfrisk::dists_from_json(mfrisk::load_json_file(dists_path));
    const auto curves = mfrisk::curves_from_json(mfrisk::load_json_file(curves_path));
    const auto estimates = mfrisk::run_simulate(cfg, dists, curves);
    mfrisk::write_text_file(dir / mfrisk::artifact::kRiskResults,
                            mfrisk::dump_json(mfrisk::results_to_json(estimates)));
    if (format == "csv")
        mfrisk::write_text_file(dir / mfrisk::artifact::kRiskResultsCsv,
                                mfrisk::results_to_csv(estimates));
    const auto comparisons = mfrisk::compare_to_baseline(estimates);
    mfrisk::write_text_file(dir / mfrisk::artifact::kBaselineComparison,
                            mfrisk::dump_json(mfrisk::comparisons_to_json(comparisons)));
    for (const auto& e : estimates)
        std::printf("[risk] %s / %s: EV = %.3f +/- %.3f (n=%ld)\n",
                    mfrisk::to_string(e.condition).c_str(), mfrisk::to_string(e.crash_type).c_str(),
                    e.ev_mean, e.ev_se, e.n_trials);
    for (const auto& c : comparisons)
        std::printf("[report] %s: %s is %s vs baseline (dEV=%+.3f, 2SE=%.3f)\n",
                    mfrisk::to_string(c.crash_type).c_str(), mfrisk::to_string(c.condition).c_str(),
                    mfrisk::to_string(c.label).c_str(), c.ev_diff, c.two_se);
    return 0;
}

int run_pipeline_cmd(const mfrisk::RunConfig& cfg, const std::string& format) {
    require_path(cfg.lowfi_csv, "--lowfi input");
    require_path(cfg.hifi_csv, "--hifi input");
    require_path(cfg.fatality_csv, "--fatality input");
    const auto result = mfrisk::run_full_pipeline(cfg);
    if (format == "csv")
        mfrisk::write_text_file(std::filesystem::path(cfg.out_dir) / mfrisk::artifact::kRiskResultsCsv,
                                mfrisk::results_to_csv(result.estimates));
    mfrisk::print_summary(std::cout, result);
    return 0;
}

int run_figures_cmd(const mfrisk::RunConfig& cfg) {
    require_path(cfg.lowfi_csv, "--lowfi input");
    require_path(cfg.hifi_csv, "--hifi input");
    require_path(cfg.fatality_csv, "--fatality input");
    const std::filesystem::path dir = cfg.out_dir;
    const auto lowfi = mfrisk::load_zone_speed_samples(cfg.lowfi_csv, cfg.zones, cfg.bin_width_mph);
    const auto hifi = mfrisk::load_zone_speed_samples(cfg.hifi_csv, cfg.zones, cfg.bin_width_mph);
    const auto compare =
        mfrisk::run_compare(lowfi, hifi, cfg.kernel_width_fidelity_mph, cfg.grid_step_mph);
    const auto records = mfrisk::load_lowfi_file(cfg.lowfi_csv, cfg.zones);
    const auto model = mfrisk::run_fit_model(records, cfg.k_folds, cfg.master_seed);
    const auto curves = mfrisk::run_fit_probit(mfrisk::load_fatality_file(cfg.fatality_csv));
    const auto bins = mfrisk::load_hifi_file(cfg.hifi_csv, cfg.zones, cfg.bin_width_mph);
    const auto dists = mfrisk::run_build_dists(bins, model.weights, cfg);
    const auto estimates = mfrisk::results_from_json(
        mfrisk::load_json_file((dir / mfrisk::artifact::kRiskResults).string()));
    mfrisk::emit_figure_data(compare, model, curves, dists, mfrisk::zone_marginal_from(cfg),
                             estimates, dir);
    std::cout << "[figures] wrote figure data under " << (dir / "figures").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multifidelity speed-based risk estimation for in-vehicle signage"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags flags;
    constexpr auto kTakeLast = CLI::MultiOptionPolicy::TakeLast;
    app.add_option("--config", flags.config_path, "JSON config file")->multi_option_policy(kTakeLast);
    app.add_option("--seed", flags.seed, "Master seed")
        ->multi_option_policy(kTakeLast)
        ->each([&](const std::string&) { flags.seed_set = true; });
    app.add_option("--out", flags.out_dir, "Output directory")->multi_option_policy(kTakeLast);
    app.add_option("--trials", flags.trials, "Monte-Carlo trial count")
        ->multi_option_policy(kTakeLast)
        ->each([&](const std::string&) { flags.trials_set = true; });
    app.add_option("--format", flags.format, "Results format: json or csv")
        ->multi_option_policy(kTakeLast)
        ->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--workers", flags.workers, "Worker threads for the simulation (0 = hardware)")
        ->multi_option_policy(kTakeLast);
    app.add_option("--lowfi", flags.lowfi_csv, "Low-fidelity records CSV")
        ->multi_option_policy(kTakeLast);
    app.add_option("--hifi", flags.hifi_csv, "High-fidelity binned CSV")
        ->multi_option_policy(kTakeLast);
    app.add_option("--fatality", flags.fatality_csv, "Fatality points CSV")
        ->multi_option_policy(kTakeLast);

    auto* gen = app.add_subcommand("gen-data", "Generate the calibrated synthetic dataset");
    auto* compare = app.add_subcommand("compare", "Fidelity comparison between speed datasets");
    auto* fit_model = app.add_subcommand("fit-model", "Fit the quadratic speed model with k-fold CV");
    auto* fit_probit = app.add_subcommand("fit-probit", "Fit probit fatality curves");
    auto* build_dists = app.add_subcommand("build-dists", "Build per-condition speed distributions");
    auto* simulate = app.add_subcommand("simulate", "Run the Monte-Carlo risk simulation");
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage end to end");
    auto* figures = app.add_subcommand("figures", "Emit plot-ready CSVs from pipeline outputs");

    std::string weights_path, dists_path, curves_path;
    build_dists->add_option("--weights", weights_path, "Model weights JSON");
    simulate->add_option("--dists", dists_path, "Condition distributions JSON");
    simulate->add_option("--curves", curves_path, "Fatality curves JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        const mfrisk::RunConfig cfg = effective_config(flags);
        if (gen->parsed()) return run_gen_data(cfg);
        if (compare->parsed()) return run_compare_cmd(cfg);
        if (fit_model->parsed()) return run_fit_model_cmd(cfg);
        if (fit_probit->parsed()) return run_fit_probit_cmd(cfg);
        if (build_dists->parsed()) return run_build_dists_cmd(cfg, weights_path);
        if (simulate->parsed()) return run_simulate_cmd(cfg, dists_path, curves_path, flags.format);
        if (pipeline->parsed()) return run_pipeline_cmd(cfg, flags.format);
        if (figures->parsed()) return run_figures_cmd(cfg);
    } catch (const mfrisk::numeric_error& e) {
        std::cerr << "error (numerical): " << e.what() << "\n";
        return 2;
    } catch (const mfrisk::input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

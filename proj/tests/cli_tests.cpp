// Integration tests that drive the command-line binary end to end.
// Usage: cli_tests <path-to-mfrisk-binary>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int failures = 0;

#define CHECK_TRUE(cond, msg)                                              \
    do {                                                                   \
        if (!(cond)) {                                                     \
            ++failures;                                                    \
            std::printf("FAIL %s:%d: %s\n", __FILE__, __LINE__, (msg));    \
        }                                                                  \
    } while (0)

int run(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::printf("usage: cli_tests <mfrisk binary>\n");
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path dir = fs::temp_directory_path() / "mfrisk_cli_tests";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const fs::path config = dir / "config.json";
    {
        std::ofstream out(config);
        out << R"({
  "n_pred": 2000,
  "n_trials": 4000,
  "master_seed": 7,
  "synthetic": {
    "rows_per_cell": 120,
    "hifi_hours": 48,
    "hifi_vehicles_per_hour": 60,
    "fatality_n_obs": 400
  }
})";
    }

    const fs::path data_a = dir / "data_a";
    const fs::path data_b = dir / "data_b";
    const std::string quiet = " > /dev/null 2>&1";

    // gen-data writes the three inputs and is byte-deterministic in the seed
    CHECK_TRUE(run(cli + " gen-data --config " + config.string() + " --out " + data_a.string() +
                   quiet) == 0,
               "gen-data exits 0");
    CHECK_TRUE(run(cli + " gen-data --config " + config.string() + " --out " + data_b.string() +
                   quiet) == 0,
               "gen-data rerun exits 0");
    for (const char* name : {"lowfi.csv", "hifi.csv", "fatality_points.csv"}) {
        CHECK_TRUE(fs::exists(data_a / name), "gen-data artifact exists");
        CHECK_TRUE(!slurp(data_a / name).empty(), "gen-data artifact nonempty");
        CHECK_TRUE(slurp(data_a / name) == slurp(data_b / name), "gen-data is deterministic");
    }

    const std::string lowfi = (data_a / "lowfi.csv").string();
    const std::string hifi = (data_a / "hifi.csv").string();
    const std::string fatality = (data_a / "fatality_points.csv").string();
    const fs::path out = dir / "out";

    // compare of a file against itself: 100% efficiency in every zone
    const fs::path self_out = dir / "self_out";
    CHECK_TRUE(run(cli + " compare --lowfi " + lowfi + " --hifi " + lowfi + " --out " +
                   self_out.string() + quiet) == 0,
               "self compare exits 0");
    {
        const std::string report = slurp(self_out / "compare_report.json");
        CHECK_TRUE(report.find("\"mean_efficiency_pct\": 100.0") != std::string::npos,
                   "self compare reports 100% mean efficiency");
    }

    // compare with no overlapping zones exits nonzero
    {
        std::ofstream empty_low(dir / "empty_low.csv");
        empty_low << "participant_id,fidelity,tech_group,ivs_present,zone_mph,speed_mph\n";
        empty_low.close();
        CHECK_TRUE(run(cli + " compare --lowfi " + (dir / "empty_low.csv").string() + " --hifi " +
                       hifi + " --out " + (dir / "x").string() + quiet) != 0,
                   "disjoint compare exits nonzero");
    }

    // stage subcommands compose into the same artifacts as the pipeline
    CHECK_TRUE(run(cli + " compare --config " + config.string() + " --lowfi " + lowfi + " --hifi " +
                   hifi + " --out " + out.string() + quiet) == 0,
               "compare exits 0");
    CHECK_TRUE(run(cli + " fit-model --config " + config.string() + " --lowfi " + lowfi + " --out " +
                   out.string() + quiet) == 0,
               "fit-model exits 0");
    CHECK_TRUE(run(cli + " fit-probit --config " + config.string() + " --fatality " + fatality +
                   " --out " + out.string() + quiet) == 0,
               "fit-probit exits 0");
    CHECK_TRUE(run(cli + " build-dists --config " + config.string() + " --hifi " + hifi + " --out " +
                   out.string() + quiet) == 0,
               "build-dists exits 0");
    CHECK_TRUE(run(cli + " simulate --config " + config.string() + " --out " + out.string() +
                   " --format csv" + quiet) == 0,
               "simulate exits 0");
    CHECK_TRUE(fs::exists(out / "risk_results.json"), "simulate writes results JSON");
    CHECK_TRUE(fs::exists(out / "risk_results.csv"), "simulate honors --format csv");
    CHECK_TRUE(fs::exists(out / "baseline_comparison.json"), "simulate writes the comparison");

    // fit-model is idempotent: identical weight bytes on a rerun
    {
        const fs::path out_b = dir / "out_b";
        CHECK_TRUE(run(cli + " fit-model --config " + config.string() + " --lowfi " + lowfi +
                       " --out " + out_b.string() + quiet) == 0,
                   "fit-model rerun exits 0");
        CHECK_TRUE(slurp(out / "model_weights.json") == slurp(out_b / "model_weights.json"),
                   "fit-model weights are byte-identical across reruns");
    }

    // figures requires simulation results to exist
    CHECK_TRUE(run(cli + " figures --config " + config.string() + " --lowfi " + lowfi + " --hifi " +
                   hifi + " --fatality " + fatality + " --out " + (dir / "no_results").string() +
                   quiet) == 1,
               "figures without results exits 1");

    // figures from existing stage outputs
    CHECK_TRUE(run(cli + " figures --config " + config.string() + " --lowfi " + lowfi + " --hifi " +
                   hifi + " --fatality " + fatality + " --out " + out.string() + quiet) == 0,
               "figures exits 0");
    CHECK_TRUE(fs::exists(out / "figures" / "risk_bars.csv"), "figures writes risk bars");
    {
        const std::string bars = slurp(out / "figures" / "risk_bars.csv");
        int lines = 0;
        for (const char c : bars) lines += c == '\n';
        CHECK_TRUE(lines == 10, "risk_bars.csv has a header plus nine rows");
    }

    // full pipeline: idempotent reruns, byte-identical results
    const fs::path pipe_a = dir / "pipe_a";
    const fs::path pipe_b = dir / "pipe_b";
    const std::string pipeline_flags = " pipeline --config " + config.string() + " --lowfi " +
                                       lowfi + " --hifi " + hifi + " --fatality " + fatality;
    CHECK_TRUE(run(cli + pipeline_flags + " --out " + pipe_a.string() + quiet) == 0,
               "pipeline exits 0");
    CHECK_TRUE(run(cli + pipeline_flags + " --out " + pipe_b.string() + quiet) == 0,
               "pipeline rerun exits 0");
    CHECK_TRUE(!slurp(pipe_a / "risk_results.json").empty(), "pipeline writes results");
    CHECK_TRUE(slurp(pipe_a / "risk_results.json") == slurp(pipe_b / "risk_results.json"),
               "pipeline results are byte-identical across runs");

    // missing fatality input: exit 1 and the message names the stage
    {
        const std::string err_file = (dir / "err.txt").string();
        const int code = run(cli + pipeline_flags + " --fatality " + (dir / "nope.csv").string() +
                             " --out " + (dir / "pipe_c").string() + " > /dev/null 2> " + err_file);
        CHECK_TRUE(code == 1, "pipeline with missing fatality CSV exits 1");
        const std::string err = slurp(err_file);
        CHECK_TRUE(err.find("fatality") != std::string::npos, "error names the fatality stage");
    }

    // numerical failure maps to exit 2: flat fatality fractions
    {
        std::ofstream flat(dir / "flat.csv");
        flat << "crash_type,speed_mph,fatality_fraction,n_obs\n";
        for (const char* t : {"pedestrian", "side_impact", "front_impact"})
            for (int s = 20; s <= 60; s += 20) flat << t << ',' << s << ",0.5,100\n";
        flat.close();
        const int code = run(cli + " fit-probit --fatality " + (dir / "flat.csv").string() +
                             " --out " + (dir / "flat_out").string() + quiet);
        CHECK_TRUE(code == 2, "probit slope failure exits 2");
    }

    // unknown zone in the input names the offending row
    {
        std::ofstream bad(dir / "bad_zone.csv");
        bad << "participant_id,fidelity,tech_group,ivs_present,zone_mph,speed_mph\n";
        bad << "p01,low,ivs_plus_es,0,35,40\n";
        bad.close();
        const int code = run(cli + " fit-model --lowfi " + (dir / "bad_zone.csv").string() +
                             " --out " + (dir / "bad_out").string() + quiet);
        CHECK_TRUE(code == 1, "unknown zone exits 1");
    }

    if (failures == 0) {
        std::printf("cli_tests: all checks passed\n");
        fs::remove_all(dir);
        return 0;
    }
    std::printf("cli_tests: %d check(s) failed (work dir kept at %s)\n", failures,
                dir.string().c_str());
    return 1;
}

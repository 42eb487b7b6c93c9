#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mfrisk/risk.hpp"

using namespace mfrisk;

namespace {

std::map<CrashType, FatalityCurve> default_curves() {
    return {{CrashType::pedestrian, {CrashType::pedestrian, -7.5, 0.30}},
            {CrashType::side_impact, {CrashType::side_impact, -2.75, 0.091}},
            {CrashType::front_impact, {CrashType::front_impact, -3.80, 0.08}}};
}

std::map<double, Density> toy_baseline() {
    std::map<double, Density> baseline;
    CounterRng rng(101, 0);
    for (const double zone : {40.0, 50.0, 55.0, 60.0}) {
        std::vector<double> samples(60);
        for (double& s : samples) s = zone * 1.068 + 1.2 * rng.normal();
        baseline.emplace(zone, kde_fit(std::move(samples), 2.0));
    }
    return baseline;
}

ConditionDistributions identity_dists(const std::map<double, Density>& baseline) {
    ModelWeights identity;
    identity.pooled = {0.0, 1.0, 0.0, 0.0};
    return build_condition_distributions(baseline, identity, 10000, 2.0, 303);
}

double closed_form_cell(const ConditionDistributions& dists, const ZoneMarginal& marginal,
                        Condition cond, const FatalityCurve& curve, double step = 0.1) {
    double ev = 0.0;
    for (std::size_t zi = 0; zi < marginal.zones.size(); ++zi) {
        const Density& d = dists.at(cond, marginal.zones[zi]);
        const auto [lo, hi] = sample_range(d);
        std::vector<double> grid;
        for (double x = lo - 8.0 * d.width; x <= hi + 8.0 * d.width + 1e-9; x += step)
            grid.push_back(x);
        ev += marginal.probabilities[zi] * expected_value_closed_form(discretize(d, grid), curve);
    }
    return ev;
}

}  // namespace

TEST_CASE("expected value closed form limit cases") {
    const DiscreteDistribution speeds({30.0, 70.0}, {0.5, 0.5});
    // Curve so steep and high that p_f = 1 on the whole support.
    const FatalityCurve always{CrashType::pedestrian, 100.0, 1.0};
    CHECK(expected_value_closed_form(speeds, always) == doctest::Approx(-1.0).epsilon(1e-12));
    // p_f = 0 on the whole support.
    const FatalityCurve never{CrashType::pedestrian, -1000.0, 0.001};
    CHECK(expected_value_closed_form(speeds, never) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("expected value closed form: two-atom hand case") {
    // Hand-derived curve with p_f(30) = 0.2 and p_f(70) = 0.8:
    //   b = (z(0.8) - z(0.2)) / 40, a = z(0.2) - 30 b, z(0.2) = -0.841621233572914
    const double b = 2.0 * 0.841621233572914 / 40.0;
    const double a = -0.841621233572914 - 30.0 * b;
    const FatalityCurve curve{CrashType::front_impact, a, b};
    const DiscreteDistribution speeds({30.0, 70.0}, {0.5, 0.5});
    // EV = 1 - 2 * (0.5*0.2 + 0.5*0.8) = 0
    CHECK(expected_value_closed_form(speeds, curve) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("closed-form EV identity: 1 - 2 E[p_f]") {
    CounterRng rng(107, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.uniform_below(20);
        std::vector<double> grid(n);
        for (std::size_t i = 0; i < n; ++i) grid[i] = 20.0 + 2.0 * static_cast<double>(i);
        const DiscreteDistribution speeds(grid, oracle::random_masses(n, rng));
        const FatalityCurve curve{CrashType::side_impact, -4.0 + rng.normal(),
                                  0.05 + 0.1 * rng.uniform()};
        double mean_pf = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean_pf += speeds.masses[i] * fatality_probability(curve, grid[i]);
        CHECK(expected_value_closed_form(speeds, curve) ==
              doctest::Approx(1.0 - 2.0 * mean_pf).epsilon(1e-12));
    }
}

TEST_CASE("identity weights reproduce the baseline distributions") {
    const auto baseline = toy_baseline();
    const auto dists = identity_dists(baseline);
    for (const auto& [zone, density] : baseline) {
        // With identity weights, the prediction samples are draws from the
        // baseline density itself.
        const auto& mapped = dists.at(Condition::ivs_plus_es, zone);
        const double ks = oracle::ks_statistic(mapped.samples,
                                               [&](double x) { return density_cdf(density, x); });
        CHECK(ks < 0.02);
    }
}

TEST_CASE("sign-offset weight shifts the plus-ES distribution") {
    const auto baseline = toy_baseline();
    ModelWeights w;
    w.pooled = {0.0, 1.0, 10.0, 0.0};
    const auto dists = build_condition_distributions(baseline, w, 10000, 2.0, 404);
    for (const auto& [zone, density] : baseline) {
        const auto& plus = dists.at(Condition::ivs_plus_es, zone);
        const auto& minus = dists.at(Condition::ivs_minus_es, zone);
        double mean_plus = 0.0, mean_minus = 0.0;
        for (const double s : plus.samples) mean_plus += s;
        for (const double s : minus.samples) mean_minus += s;
        mean_plus /= static_cast<double>(plus.samples.size());
        mean_minus /= static_cast<double>(minus.samples.size());
        // one draw set maps through both conditions, so the shift is exact
        CHECK(mean_plus - mean_minus == doctest::Approx(10.0).epsilon(1e-9));
    }
}

TEST_CASE("condition distributions are deterministic in the seed") {
    const auto baseline = toy_baseline();
    ModelWeights w;
    w.pooled = {1.0, 1.02, -8.0, -0.0005};
    const auto a = build_condition_distributions(baseline, w, 500, 2.0, 99);
    const auto b = build_condition_distributions(baseline, w, 500, 2.0, 99);
    for (const Condition c : {Condition::ivs_plus_es, Condition::ivs_minus_es})
        for (const auto& [zone, density] : a.entries.at(c)) {
            const auto& other = b.at(c, zone);
            REQUIRE(density.samples.size() == other.samples.size());
            for (std::size_t i = 0; i < density.samples.size(); ++i)
                CHECK(density.samples[i] == other.samples[i]);
        }
}

TEST_CASE("monte carlo matches the closed form within three standard errors") {
    const auto baseline = toy_baseline();
    const auto dists = identity_dists(baseline);
    const auto curves = default_curves();
    const auto marginal = ZoneMarginal::uniform({40.0, 50.0, 55.0, 60.0});
    const auto estimates = monte_carlo_risk(marginal, dists, curves, 20000, 55, 0);
    REQUIRE(estimates.size() == 9);
    for (const auto& e : estimates) {
        const double cf = closed_form_cell(dists, marginal, e.condition, curves.at(e.crash_type));
        CHECK(std::abs(e.ev_mean - cf) < std::max(3.0 * e.ev_se, 1e-4));
        CHECK(e.ev_mean >= -1.0);
        CHECK(e.ev_mean <= 1.0);
    }
}

TEST_CASE("degenerate distribution at an extreme speed gives EV -1 with zero SE") {
    ConditionDistributions dists;
    dists.kernel_width = 1e-12;
    std::map<double, Density> degenerate;
    degenerate.emplace(55.0, Density{{500.0}, 1e-12});
    for (const Condition c : kConditions) dists.entries[c] = degenerate;
    const auto estimates = monte_carlo_risk(ZoneMarginal::uniform({55.0}), dists, default_curves(),
                                            1000, 9, 0);
    for (const auto& e : estimates) {
        CHECK(e.ev_mean == -1.0);
        CHECK(e.ev_se == 0.0);
    }
}

TEST_CASE("quadrupling trials roughly halves the standard error") {
    // Speeds low enough that every fatality probability is interior, so the
    // per-trial EVs have healthy variance in all nine cells.
    std::map<double, Density> baseline;
    CounterRng gen(131, 0);
    for (const double zone : {20.0, 25.0, 30.0, 35.0}) {
        std::vector<double> samples(60);
        for (double& s : samples) s = zone + 1.5 * gen.normal();
        baseline.emplace(zone, kde_fit(std::move(samples), 2.0));
    }
    const auto dists = identity_dists(baseline);
    const auto curves = default_curves();
    const auto marginal = ZoneMarginal::uniform({20.0, 25.0, 30.0, 35.0});
    const auto small = monte_carlo_risk(marginal, dists, curves, 20000, 63, 0);
    const auto large = monte_carlo_risk(marginal, dists, curves, 80000, 63, 0);
    for (std::size_t i = 0; i < small.size(); ++i) {
        const double ratio = small[i].ev_se / large[i].ev_se;
        CHECK(ratio > 2.0 * 0.8);
        CHECK(ratio < 2.0 * 1.2);
    }
}

TEST_CASE("risk estimates are bit-identical across worker counts and runs") {
    const auto baseline = toy_baseline();
    const auto dists = identity_dists(baseline);
    const auto curves = default_curves();
    const auto marginal = ZoneMarginal::uniform({40.0, 50.0, 55.0, 60.0});
    const auto one = monte_carlo_risk(marginal, dists, curves, 30000, 77, 1);
    const auto eight = monte_carlo_risk(marginal, dists, curves, 30000, 77, 8);
    const auto again = monte_carlo_risk(marginal, dists, curves, 30000, 77, 3);
    REQUIRE(one.size() == eight.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].ev_mean == eight[i].ev_mean);
        CHECK(one[i].ev_se == eight[i].ev_se);
        CHECK(one[i].ev_mean == again[i].ev_mean);
        CHECK(one[i].ev_se == again[i].ev_se);
    }
}

TEST_CASE("shifting every distribution +5 mph never increases any EV cell") {
    const auto baseline = toy_baseline();
    const auto dists = identity_dists(baseline);
    ConditionDistributions shifted = dists;
    for (auto& [cond, zones] : shifted.entries)
        for (auto& [zone, density] : zones)
            for (double& s : density.samples) s += 5.0;
    const auto curves = default_curves();
    const auto marginal = ZoneMarginal::uniform({40.0, 50.0, 55.0, 60.0});
    const auto before = monte_carlo_risk(marginal, dists, curves, 20000, 88, 0);
    const auto after = monte_carlo_risk(marginal, shifted, curves, 20000, 88, 0);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i].ev_mean <= before[i].ev_mean);
}

TEST_CASE("monte carlo validates inputs") {
    const auto baseline = toy_baseline();
    const auto dists = identity_dists(baseline);
    auto curves = default_curves();
    const auto marginal = ZoneMarginal::uniform({40.0, 50.0, 55.0, 60.0});
    CHECK_THROWS_AS(monte_carlo_risk(marginal, dists, curves, 0, 1, 0), input_error);
    curves.erase(CrashType::side_impact);
    CHECK_THROWS_AS(monte_carlo_risk(marginal, dists, curves, 10, 1, 0), input_error);
}

TEST_CASE("compare_to_baseline labels by the two-SE rule") {
    std::vector<RiskEstimate> estimates;
    for (const CrashType t : kCrashTypes) {
        estimates.push_back({Condition::baseline, t, -0.5, 0.01, 1000});
        estimates.push_back({Condition::ivs_plus_es, t, -0.5, 0.01, 1000});
        estimates.push_back({Condition::ivs_minus_es, t, -0.5, 0.01, 1000});
    }
    const auto all_same = compare_to_baseline(estimates);
    REQUIRE(all_same.size() == 6);
    for (const auto& c : all_same) CHECK(c.label == SafetyLabel::comparable);

    estimates[1].ev_mean = -0.2;   // plus-ES clearly safer
    estimates[2].ev_mean = -0.9;   // minus-ES clearly riskier
    const auto labeled = compare_to_baseline(estimates);
    CHECK(labeled[0].label == SafetyLabel::safer);
    CHECK(labeled[1].label == SafetyLabel::riskier);
}

TEST_CASE("compare_to_baseline requires a baseline cell") {
    std::vector<RiskEstimate> estimates = {
        {Condition::ivs_plus_es, CrashType::pedestrian, -0.5, 0.01, 1000}};
    CHECK_THROWS_AS(compare_to_baseline(estimates), input_error);
}

TEST_CASE("zone marginal sampling respects the weights") {
    const ZoneMarginal marginal({40.0, 50.0}, {3.0, 1.0});
    CounterRng rng(119, 0);
    int forty = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i)
        if (marginal.sample(rng) == 40.0) ++forty;
    const double frac = static_cast<double>(forty) / n;
    CHECK(frac == doctest::Approx(0.75).epsilon(0.02));
}

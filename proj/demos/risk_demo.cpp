// Minimal example: expected unit-loss risk of a speed distribution against a
// probit fatality curve, closed form versus Monte-Carlo.

#include <cstdio>
#include <vector>

#include "mfrisk/risk.hpp"

int main() {
    using namespace mfrisk;

    CounterRng rng(2, 0);
    std::vector<double> speeds;
    for (int i = 0; i < 200; ++i) speeds.push_back(55.0 + 3.0 * rng.normal());
    const auto density = kde_fit(speeds, 2.0);

    const FatalityCurve curve{CrashType::front_impact, -3.8, 0.08};

    std::vector<double> grid;
    const auto [lo, hi] = sample_range(density);
    for (double x = lo - 16.0; x <= hi + 16.0; x += 0.1) grid.push_back(x);
    const double closed = expected_value_closed_form(discretize(density, grid), curve);

    ConditionDistributions dists;
    dists.kernel_width = density.width;
    for (const Condition c : kConditions) dists.entries[c].emplace(55.0, density);
    std::map<CrashType, FatalityCurve> curves = {
        {CrashType::pedestrian, {CrashType::pedestrian, -7.5, 0.30}},
        {CrashType::side_impact, {CrashType::side_impact, -2.75, 0.091}},
        {CrashType::front_impact, curve}};
    const auto estimates =
        monte_carlo_risk(ZoneMarginal::uniform({55.0}), dists, curves, 50000, 7, 0);

    std::printf("closed-form EV (front impact): %.4f\n", closed);
    for (const auto& e : estimates)
        if (e.crash_type == CrashType::front_impact && e.condition == Condition::baseline)
            std::printf("Monte-Carlo EV (front impact): %.4f +/- %.4f\n", e.ev_mean, e.ev_se);
    return 0;
}

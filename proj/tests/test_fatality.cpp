#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "mfrisk/fatality.hpp"

using namespace mfrisk;

TEST_CASE("standard normal cdf basics") {
    CHECK(standard_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    // quantile check against the independent series oracle
    CHECK(oracle::normal_cdf_series(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
    CHECK(standard_normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
    for (double x = -8.0; x <= 8.0; x += 0.37) {
        CHECK(standard_normal_cdf(x) == doctest::Approx(oracle::normal_cdf_series(x)).epsilon(1e-9));
        CHECK(standard_normal_cdf(x) + standard_normal_cdf(-x) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("inverse normal cdf round trips") {
    for (double p = 0.0005; p < 1.0; p += 0.0127) {
        const double x = standard_normal_inv(p);
        CHECK(standard_normal_cdf(x) == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK_THROWS_AS(standard_normal_inv(0.0), input_error);
    CHECK_THROWS_AS(standard_normal_inv(1.0), input_error);
}

TEST_CASE("probit fit recovers synthetic binomial data within 5%") {
    const double true_a = -10.0, true_b = 0.25;
    std::vector<CurvePoint> points;
    CounterRng rng(61, 0);
    const int n_obs = 10000;
    for (double s = 10.0; s <= 80.0 + 1e-9; s += 10.0) {
        const double p = standard_normal_cdf(true_a + true_b * s);
        long k = 0;
        for (int i = 0; i < n_obs; ++i)
            if (rng.uniform() < p) ++k;
        points.push_back({s, static_cast<double>(k) / n_obs, static_cast<double>(n_obs)});
    }
    const auto curve = probit_fit(points, CrashType::front_impact);
    CHECK(std::abs(curve.intercept_a - true_a) / std::abs(true_a) < 0.05);
    CHECK(std::abs(curve.slope_b - true_b) / true_b < 0.05);
}

TEST_CASE("two exact points invert to the hand solution") {
    // p(20) = Phi(-1) and p(40) = Phi(1) force a + 20b = -1, a + 40b = 1,
    // i.e. b = 0.1 and a = -3.
    const std::vector<CurvePoint> points = {{20.0, standard_normal_cdf(-1.0), 1000.0},
                                            {40.0, standard_normal_cdf(1.0), 1000.0}};
    const auto curve = probit_fit(points, CrashType::side_impact);
    CHECK(curve.intercept_a == doctest::Approx(-3.0).epsilon(1e-4));
    CHECK(curve.slope_b == doctest::Approx(0.1).epsilon(1e-4));
}

TEST_CASE("flat fractions give a non-positive slope and fail") {
    const std::vector<CurvePoint> points = {
        {20.0, 0.5, 100.0}, {40.0, 0.5, 100.0}, {60.0, 0.5, 100.0}};
    CHECK_THROWS_AS(probit_fit(points, CrashType::pedestrian), numeric_error);
}

TEST_CASE("degenerate probit inputs are rejected") {
    CHECK_THROWS_AS(probit_fit(std::vector<CurvePoint>{{20.0, 0.5, 10.0}}, CrashType::pedestrian),
                    input_error);
    const std::vector<CurvePoint> one_speed = {{20.0, 0.2, 10.0}, {20.0, 0.8, 10.0}};
    CHECK_THROWS_AS(probit_fit(one_speed, CrashType::pedestrian), input_error);
    const std::vector<CurvePoint> all_one = {{20.0, 1.0, 10.0}, {40.0, 1.0, 10.0}};
    CHECK_THROWS_AS(probit_fit(all_one, CrashType::pedestrian), input_error);
}

TEST_CASE("fatality probability midpoint and monotonicity") {
    const FatalityCurve curve{CrashType::front_impact, -3.8, 0.08};
    CHECK(fatality_probability(curve, 3.8 / 0.08) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fatality_probability(curve, 400.0) == doctest::Approx(1.0).epsilon(1e-12));
    CounterRng rng(67, 0);
    for (int i = 0; i < 1000; ++i) {
        const double s1 = 120.0 * rng.uniform();
        const double s2 = 120.0 * rng.uniform();
        const auto [lo, hi] = std::minmax(s1, s2);
        CHECK(fatality_probability(curve, lo) <= fatality_probability(curve, hi));
    }
}

TEST_CASE("survival complements fatality") {
    const FatalityCurve curve{CrashType::side_impact, -2.75, 0.091};
    for (double s = 0.0; s <= 100.0; s += 3.7) {
        CHECK(fatality_probability(curve, s) + survival_probability(curve, s) ==
              doctest::Approx(1.0).epsilon(1e-15));
    }
    const FatalityCurve extreme{CrashType::side_impact, 50.0, 0.1};
    CHECK(survival_probability(extreme, 30.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fit is invariant to duplicating every point") {
    std::vector<CurvePoint> points;
    CounterRng rng(71, 0);
    for (double s = 10.0; s <= 70.0 + 1e-9; s += 10.0) {
        const double p = standard_normal_cdf(-6.0 + 0.15 * s);
        long k = 0;
        for (int i = 0; i < 500; ++i)
            if (rng.uniform() < p) ++k;
        points.push_back({s, k / 500.0, 500.0});
    }
    const auto fit1 = probit_fit(points, CrashType::pedestrian);
    std::vector<CurvePoint> doubled = points;
    doubled.insert(doubled.end(), points.begin(), points.end());
    const auto fit2 = probit_fit(doubled, CrashType::pedestrian);
    CHECK(fit2.intercept_a == doctest::Approx(fit1.intercept_a).epsilon(1e-9));
    CHECK(fit2.slope_b == doctest::Approx(fit1.slope_b).epsilon(1e-9));
}

TEST_CASE("analytic gradient matches central finite differences") {
    std::vector<CurvePoint> points;
    for (double s = 15.0; s <= 75.0 + 1e-9; s += 15.0)
        points.push_back({s, std::clamp(0.02 * s - 0.2, 0.01, 0.99), 800.0});
    const double a = -4.1, b = 0.09;
    const auto grad = probit_loglik_gradient(points, a, b);
    const double h = 1e-6;
    const double fd_a = (probit_loglik(points, a + h, b) - probit_loglik(points, a - h, b)) / (2 * h);
    const double fd_b = (probit_loglik(points, a, b + h) - probit_loglik(points, a, b - h)) / (2 * h);
    CHECK(grad[0] == doctest::Approx(fd_a).epsilon(1e-5));
    CHECK(grad[1] == doctest::Approx(fd_b).epsilon(1e-5));
}

TEST_CASE("fitted optimum beats 64 random perturbations") {
    std::vector<CurvePoint> points;
    CounterRng rng(73, 0);
    for (double s = 10.0; s <= 80.0 + 1e-9; s += 10.0) {
        const double p = standard_normal_cdf(-5.0 + 0.12 * s);
        long k = 0;
        for (int i = 0; i < 400; ++i)
            if (rng.uniform() < p) ++k;
        points.push_back({s, k / 400.0, 400.0});
    }
    const auto curve = probit_fit(points, CrashType::front_impact);
    const double best = probit_loglik(points, curve.intercept_a, curve.slope_b);
    for (int i = 0; i < 64; ++i) {
        const double da = 0.2 * rng.normal();
        const double db = 0.01 * rng.normal();
        CHECK(best >= probit_loglik(points, curve.intercept_a + da, curve.slope_b + db) - 1e-9);
    }
}

TEST_CASE("fatality points csv round trip") {
    std::istringstream in(
        "crash_type,speed_mph,fatality_fraction,n_obs\n"
        "pedestrian,20,0.35,500\n"
        "side_impact,40,0.6,400\n"
        "front_impact,60,0.8,300\n");
    const auto points = parse_fatality_points(in);
    REQUIRE(points.size() == 3);
    CHECK(points.at(CrashType::pedestrian)[0].fatality_fraction == doctest::Approx(0.35));
    std::ostringstream out;
    write_fatality_points(out, points);
    std::istringstream again(out.str());
    const auto reparsed = parse_fatality_points(again);
    CHECK(reparsed.at(CrashType::front_impact)[0].n_obs == doctest::Approx(300.0));

    std::istringstream bad(
        "crash_type,speed_mph,fatality_fraction,n_obs\n"
        "rollover,20,0.35,500\n");
    CHECK_THROWS_AS(parse_fatality_points(bad), input_error);
}

TEST_CASE("fatality csv stays in plain decimal notation") {
    std::map<CrashType, std::vector<CurvePoint>> points;
    points[CrashType::pedestrian] = {{10.0, 0.0005, 2000.0}};  // 1 of 2000
    std::ostringstream out;
    write_fatality_points(out, points);
    CHECK(out.str().find("0.0005") != std::string::npos);
    CHECK(out.str().find("5e-04") == std::string::npos);
    std::istringstream again(out.str());
    CHECK(parse_fatality_points(again).at(CrashType::pedestrian)[0].fatality_fraction ==
          doctest::Approx(0.0005).epsilon(1e-15));
}

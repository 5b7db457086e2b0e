#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "aircast/rng.hpp"
#include "aircast/transform.hpp"

using namespace aircast;

TEST_CASE("scaled log anchor points") {
    REQUIRE(scaled_log(1e-4) == 0.0);
    REQUIRE(scaled_log(1.0) == Catch::Approx(-1.0).epsilon(1e-15));
    // inputs below the floor clamp to the floor
    REQUIRE(scaled_log(1e-8) == 0.0);
    REQUIRE(scaled_log(0.0) == 0.0);
    REQUIRE(scaled_log(-3.0) == 0.0);
}

TEST_CASE("scaled log output is non-positive above the floor") {
    for (double x : {1e-4, 1e-3, 1e-2, 0.5, 1.0, 10.0, 1e4}) REQUIRE(scaled_log(x) <= 0.0);
}

TEST_CASE("scaled log is monotone non-increasing") {
    // log(x) grows with x and the denominator log(1e-4) is negative, so the
    // transform decreases as concentrations grow.
    Rng rng(7);
    std::vector<double> xs;
    for (int i = 0; i < 200; ++i) xs.push_back(std::exp(rng.uniform(-12.0, 4.0)));
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i)
        REQUIRE(scaled_log(xs[i]) <= scaled_log(xs[i - 1]));
}

TEST_CASE("scaled log rejects NaN") {
    REQUIRE_THROWS_AS(scaled_log(std::nan("")), NumericError);
    REQUIRE_THROWS_AS(inverse_scaled_log(std::nan("")), NumericError);
}

TEST_CASE("inverse anchor points") {
    REQUIRE(inverse_scaled_log(0.0) == Catch::Approx(1e-4).epsilon(1e-15));
    REQUIRE(inverse_scaled_log(-1.0) == Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("forward-inverse round trip on random values") {
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        const double x = std::exp(rng.uniform(std::log(1e-4), std::log(1e-2)));
        const double back = inverse_scaled_log(scaled_log(x));
        REQUIRE(std::abs(back - x) / x <= 1e-12);
    }
}

TEST_CASE("zscore channel: training mean maps to zero") {
    Rng rng(3);
    std::vector<double> values;
    for (int i = 0; i < 5000; ++i) values.push_back(280.0 + rng.normal() * 12.0);
    const auto cs = fit_channel_stats("t2m", values, TransformKind::zscore);

    NormStats ns;
    ns.set("t2m", cs);
    double mean = 0.0, ss = 0.0;
    for (double v : values) mean += ns.apply_value("t2m", v);
    mean /= static_cast<double>(values.size());
    for (double v : values) {
        const double z = ns.apply_value("t2m", v);
        ss += (z - mean) * (z - mean);
    }
    REQUIRE(std::abs(mean) < 1e-9);
    REQUIRE(std::sqrt(ss / static_cast<double>(values.size())) == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("aq channel: log then zscore, invert reverses both") {
    Rng rng(11);
    std::vector<double> values;
    for (int i = 0; i < 2000; ++i) values.push_back(std::exp(rng.normal(-9.0, 1.2)));
    const auto cs = fit_channel_stats("pm2p5", values, TransformKind::log_then_zscore);
    NormStats ns;
    ns.set("pm2p5", cs);

    Tensor t({2000});
    for (std::size_t i = 0; i < values.size(); ++i) t[i] = values[i];
    Tensor raw = t;
    ns.apply("pm2p5", t);
    ns.invert("pm2p5", t);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (raw[i] >= kLogFloor) {
            REQUIRE(std::abs(t[i] - raw[i]) / raw[i] <= 1e-10);
        } else {
            // sub-floor values come back as the floor
            REQUIRE(t[i] == Catch::Approx(kLogFloor).epsilon(1e-10));
        }
    }
}

TEST_CASE("weather channel untouched by the log path") {
    NormStats ns;
    ns.set("t2m", {TransformKind::zscore, 280.0, 10.0});
    // negative values are fine for weather: no clamp, plain affine
    REQUIRE(ns.apply_value("t2m", 250.0) == Catch::Approx(-3.0));
    REQUIRE(ns.invert_value("t2m", -3.0) == Catch::Approx(250.0));
}

TEST_CASE("zero-variance channel rejected by name") {
    std::vector<double> flat(10, 5.0);
    try {
        fit_channel_stats("q_500", flat, TransformKind::zscore);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find("q_500") != std::string::npos);
    }
}

TEST_CASE("norm stats JSON round trip") {
    NormStats ns;
    ns.set("t2m", {TransformKind::zscore, 281.5, 12.25});
    ns.set("pm2p5", {TransformKind::log_then_zscore, -0.375, 0.0625});
    const auto j = ns.to_json();
    const auto back = NormStats::from_json(j);
    REQUIRE(back.get("t2m").mean == 281.5);
    REQUIRE(back.get("t2m").std == 12.25);
    REQUIRE(back.get("pm2p5").kind == TransformKind::log_then_zscore);
    REQUIRE(back.get("pm2p5").mean == -0.375);
}

TEST_CASE("missing channel stats named in error") {
    NormStats ns;
    REQUIRE_THROWS_AS(ns.get("pm1"), DataError);
}

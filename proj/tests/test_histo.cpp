#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "aircast/histo.hpp"
#include "aircast/rng.hpp"

using namespace aircast;

namespace {

// Independent quantile oracle: sort and interpolate by hand.
double oracle_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = static_cast<std::size_t>(std::ceil(h));
    return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
}

}  // namespace

TEST_CASE("fd width on 1..8 is exactly 3.5") {
    // IQR = 6.25 - 2.75 = 3.5 under linear-interpolation quantiles,
    // width = 2 * 3.5 * 8^(-1/3) = 7 / 2 = 3.5
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
    REQUIRE(oracle_quantile(v, 0.25) == Catch::Approx(2.75));
    REQUIRE(oracle_quantile(v, 0.75) == Catch::Approx(6.25));
    REQUIRE(fd_bin_width(v) == Catch::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("fd width matches quantile oracle on random data") {
    Rng rng(5);
    std::vector<double> v;
    for (int i = 0; i < 1234; ++i) v.push_back(rng.normal(3.0, 2.5));
    const double iqr = oracle_quantile(v, 0.75) - oracle_quantile(v, 0.25);
    const double expect = 2.0 * iqr * std::pow(1234.0, -1.0 / 3.0);
    REQUIRE(fd_bin_width(v) == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("fd width scales homogeneously") {
    Rng rng(9);
    std::vector<double> v, scaled;
    for (int i = 0; i < 500; ++i) v.push_back(rng.uniform(0.0, 7.0));
    for (double x : v) scaled.push_back(17.5 * x);
    REQUIRE(fd_bin_width(scaled) == Catch::Approx(17.5 * fd_bin_width(v)).epsilon(1e-12));
}

TEST_CASE("constant values give degenerate width and single-bin fallback") {
    std::vector<double> v(50, 4.25);
    REQUIRE(fd_bin_width(v) == 0.0);
    const auto t = build_frequency_table("x", v, 0.8);
    REQUIRE(t.bins() == 1);
    REQUIRE(t.counts[0] == 50);
    REQUIRE(t.edges[1] > t.edges[0]);
}

TEST_CASE("all-NaN input errors") {
    std::vector<double> v(4, std::nan(""));
    REQUIRE_THROWS_AS(fd_bin_width(v), NumericError);
    REQUIRE_THROWS_AS(build_frequency_table("x", v, 0.5), DataError);
}

TEST_CASE("counts partition the finite sample") {
    Rng rng(21);
    std::vector<double> v;
    for (int i = 0; i < 4000; ++i) v.push_back(std::exp(rng.normal(0.0, 1.0)));
    v.push_back(std::nan(""));  // skipped, not counted
    const auto t = build_frequency_table("pm", v, 0.8);
    std::int64_t total = 0;
    for (auto c : t.counts) total += c;
    REQUIRE(total == 4000);
    for (std::size_t i = 1; i < t.edges.size(); ++i) REQUIRE(t.edges[i] > t.edges[i - 1]);
}

TEST_CASE("tight clusters each land in a single bin") {
    // three separated spikes; FD width (~89) is far larger than each spike
    std::vector<double> v;
    for (int i = 0; i < 30; ++i) v.push_back(0.1);
    for (int i = 0; i < 30; ++i) v.push_back(100.0);
    for (int i = 0; i < 30; ++i) v.push_back(200.0);
    const auto t = build_frequency_table("x", v, 0.8);
    REQUIRE(t.counts[t.bin_of(0.1)] == 30);
    REQUIRE(t.counts[t.bin_of(100.0)] == 30);
    REQUIRE(t.counts[t.bin_of(200.0)] == 30);
}

TEST_CASE("frozen Eq-style weight values") {
    REQUIRE(effective_number_weight(0, 0.8) == 0.0);
    REQUIRE(effective_number_weight(1, 0.8) == Catch::Approx(1.0).epsilon(1e-15));
    // beta = 0.8, count = 2: 0.2 / 0.36
    REQUIRE(effective_number_weight(2, 0.8) == Catch::Approx(0.2 / 0.36).epsilon(1e-15));
    // count 1 is exactly 1 for any beta
    for (double b : {0.0, 0.3, 0.9, 0.999999}) REQUIRE(effective_number_weight(1, b) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("beta limits: equal weighting and inverse frequency") {
    for (std::int64_t c : {1, 2, 5, 100, 1000}) {
        REQUIRE(effective_number_weight(c, 0.0) == 1.0);
        const double w = effective_number_weight(c, 1.0 - 1e-6);
        REQUIRE(std::abs(w - 1.0 / static_cast<double>(c)) / (1.0 / static_cast<double>(c)) <=
                1e-3);
    }
}

TEST_CASE("weight is non-increasing in count") {
    for (double beta : {0.2, 0.8, 0.99}) {
        double prev = effective_number_weight(1, beta);
        for (std::int64_t c = 2; c < 200; ++c) {
            const double w = effective_number_weight(c, beta);
            REQUIRE(w <= prev + 1e-15);
            prev = w;
        }
    }
}

TEST_CASE("beta outside [0,1) rejected") {
    std::vector<double> v{1, 2, 3};
    REQUIRE_THROWS_AS(build_frequency_table("x", v, 1.0), UsageError);
    REQUIRE_THROWS_AS(build_frequency_table("x", v, -0.1), UsageError);
}

TEST_CASE("rare tail bins outweigh the modal bin on lognormal data") {
    Rng rng(33);
    std::vector<double> v;
    for (int i = 0; i < 20000; ++i) v.push_back(std::exp(rng.normal(0.0, 1.0)));
    const auto t = build_frequency_table("pm", v, 0.8);

    const auto modal = static_cast<std::size_t>(
        std::max_element(t.counts.begin(), t.counts.end()) - t.counts.begin());
    // every occupied bin in the far tail is rarer than the mode
    bool found_tail = false;
    for (std::size_t i = t.bins() - 1; i > modal; --i) {
        if (t.counts[i] == 0) continue;
        if (t.counts[i] < t.counts[modal]) {
            REQUIRE(t.weights[i] > t.weights[modal]);
            found_tail = true;
            break;
        }
    }
    REQUIRE(found_tail);
}

TEST_CASE("lookup semantics: clamping, empty bins, piecewise constancy") {
    // dense cluster keeps the FD width small and a lone outlier leaves a gap
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) v.push_back(0.01 * i);
    v.push_back(50.0);
    const auto t = build_frequency_table("x", v, 0.8);

    // out-of-range clamps to the edge bins
    REQUIRE(frequency_weight(-100.0, t) == t.weights.front());
    REQUIRE(frequency_weight(1e9, t) == t.weights.back());
    // two values in one bin share a weight
    const auto b = t.bin_of(0.5);
    REQUIRE(frequency_weight(0.5, t) == frequency_weight(t.edges[b] + 1e-9, t));
    // NaN rejected
    REQUIRE_THROWS_AS(frequency_weight(std::nan(""), t), NumericError);

    // empty bins carry zero weight
    bool has_empty = false;
    for (std::size_t i = 0; i < t.bins(); ++i) {
        if (t.counts[i] == 0) {
            REQUIRE(t.weights[i] == 0.0);
            has_empty = true;
        }
    }
    REQUIRE(has_empty);  // the gap between the cluster and the outlier
}

TEST_CASE("JSON round trip and CSV export") {
    std::vector<double> v{1, 1, 2, 3, 5, 8, 13};
    const auto t = build_frequency_table("pm10", v, 0.8);
    const auto back = FrequencyTable::from_json(t.to_json());
    REQUIRE(back.channel == t.channel);
    REQUIRE(back.edges == t.edges);
    REQUIRE(back.counts == t.counts);
    REQUIRE(back.weights == t.weights);

    const auto csv = frequency_table_csv(t, 2);
    REQUIRE(csv.rfind("bin_lo,bin_hi,count,count_clipped,weight\n", 0) == 0);
    // clipped column is capped at 2
    REQUIRE(csv.find(",2,") != std::string::npos);
}

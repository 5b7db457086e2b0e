#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "aircast/grid.hpp"

using namespace aircast;

namespace {

VariableField make_field(const LatLonGrid& g, double (*fn)(double, double)) {
    VariableField f;
    f.name = "x";
    f.units = "1";
    f.grid = g;
    f.values = Tensor({g.rows(), g.cols()});
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) f.values.at(i, j) = fn(g.lats[i], g.lons[j]);
    return f;
}

// Independent oracle: area-weighted global mean by direct band summation.
double oracle_area_mean(const VariableField& f) {
    const auto& g = f.grid;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        double lo = (g.lats[i] - g.resolution_deg / 2.0) * kDegToRad;
        double hi = (g.lats[i] + g.resolution_deg / 2.0) * kDegToRad;
        lo = std::max(lo, -M_PI / 2.0);
        hi = std::min(hi, M_PI / 2.0);
        const double band = std::sin(hi) - std::sin(lo);
        for (std::size_t j = 0; j < g.cols(); ++j) {
            num += band * f.values.at(i, j);
            den += band;
        }
    }
    return num / den;
}

LatLonGrid grid_from_lats(std::vector<double> lats, double res) {
    LatLonGrid g;
    g.lats = std::move(lats);
    g.lons = {0.0};
    g.resolution_deg = res;
    return g;
}

}  // namespace

TEST_CASE("global grid factory shapes") {
    const auto g = LatLonGrid::global(5.625);
    REQUIRE(g.rows() == 32);
    REQUIRE(g.cols() == 64);
    REQUIRE(g.lats.front() == Catch::Approx(-87.1875));
    REQUIRE(g.lats.back() == Catch::Approx(87.1875));
    REQUIRE(g.lons.front() == 0.0);
    REQUIRE(g.is_global());
    g.validate();

    const auto fine = LatLonGrid::global(0.75);
    REQUIRE(fine.rows() == 240);
    REQUIRE(fine.cols() == 480);
}

TEST_CASE("latitude weights: symmetric pair is unit") {
    const auto g = grid_from_lats({-45.0, 45.0}, 90.0);
    const auto w = latitude_weights(g);
    REQUIRE(w[0] == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(w[1] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("latitude weights: frozen 3-row arithmetic case") {
    // cos{0, 60, -60} = {1, 0.5, 0.5}, mean 2/3 -> weights {1.5, 0.75, 0.75}
    const auto g = grid_from_lats({0.0, 60.0, -60.0}, 60.0);
    const auto w = latitude_weights(g);
    REQUIRE(w[0] == Catch::Approx(1.5).epsilon(1e-12));
    REQUIRE(w[1] == Catch::Approx(0.75).epsilon(1e-12));
    REQUIRE(w[2] == Catch::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("latitude weights: mean is one on any grid") {
    for (double res : {5.625, 0.75, 11.25}) {
        const auto w = latitude_weights(LatLonGrid::global(res));
        double mean = 0.0;
        for (double v : w) mean += v;
        mean /= static_cast<double>(w.size());
        REQUIRE(std::abs(mean - 1.0) < 1e-12);
    }
}

TEST_CASE("latitude weights: pole row rejected") {
    const auto g = grid_from_lats({0.0, 90.0}, 90.0);
    REQUIRE_THROWS_AS(latitude_weights(g), DataError);
}

TEST_CASE("latitude weights: invariant under row reversal") {
    const auto g = LatLonGrid::global(11.25);
    auto rev = g;
    std::reverse(rev.lats.begin(), rev.lats.end());
    const auto w = latitude_weights(g);
    const auto wr = latitude_weights(rev);
    for (std::size_t i = 0; i < w.size(); ++i)
        REQUIRE(w[i] == Catch::Approx(wr[w.size() - 1 - i]).epsilon(1e-15));
}

TEST_CASE("conservative regrid: constant stays constant") {
    const auto src = LatLonGrid::global(0.75);
    const auto dst = LatLonGrid::global(5.625);
    auto f = make_field(src, [](double, double) { return 3.25; });
    const auto out = regrid_conservative(f, dst);
    REQUIRE(out.grid.rows() == 32);
    REQUIRE(out.grid.cols() == 64);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        REQUIRE(out.values[i] == Catch::Approx(3.25).epsilon(1e-14));
}

TEST_CASE("conservative regrid: preserves area-weighted mean") {
    const auto src = LatLonGrid::global(0.75);
    const auto dst = LatLonGrid::global(5.625);
    auto f = make_field(src, [](double lat, double lon) {
        return std::sin(lat * kDegToRad * 3.0) * std::cos(lon * kDegToRad * 2.0) +
               0.3 * std::cos(lat * kDegToRad);
    });
    const auto out = regrid_conservative(f, dst);
    double lo = f.values[0], hi = f.values[0];
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        lo = std::min(lo, f.values[i]);
        hi = std::max(hi, f.values[i]);
    }
    REQUIRE(std::abs(oracle_area_mean(f) - oracle_area_mean(out)) <= 1e-6 * (hi - lo));
}

TEST_CASE("conservative regrid: identical grids are bitwise identity") {
    const auto g = LatLonGrid::global(11.25);
    auto f = make_field(g, [](double lat, double lon) { return lat * 1000.0 + lon; });
    const auto out = regrid_conservative(f, g);
    for (std::size_t i = 0; i < f.values.size(); ++i) REQUIRE(out.values[i] == f.values[i]);
}

TEST_CASE("conservative regrid: linear in the field") {
    const auto src = LatLonGrid::global(2.8125);
    const auto dst = LatLonGrid::global(5.625);
    auto f = make_field(src, [](double lat, double lon) { return std::sin(lat / 17.0) + lon / 360.0; });
    auto g2 = make_field(src, [](double lat, double lon) { return std::cos(lon / 23.0) - lat / 90.0; });
    const double a = 2.5, b = -1.25;
    auto combo = f;
    for (std::size_t i = 0; i < combo.values.size(); ++i)
        combo.values[i] = a * f.values[i] + b * g2.values[i];
    const auto rf = regrid_conservative(f, dst);
    const auto rg = regrid_conservative(g2, dst);
    const auto rc = regrid_conservative(combo, dst);
    for (std::size_t i = 0; i < rc.values.size(); ++i) {
        const double expect = a * rf.values[i] + b * rg.values[i];
        REQUIRE(rc.values[i] == Catch::Approx(expect).epsilon(1e-12).margin(1e-12));
    }
}

TEST_CASE("conservative regrid: rejects non-global grids") {
    const auto src = LatLonGrid::global(5.625);
    auto f = make_field(src, [](double, double) { return 1.0; });
    const auto crop = crop_index(src, bbox_mena()).grid;
    REQUIRE_THROWS_AS(regrid_conservative(f, crop), DataError);
}

TEST_CASE("bilinear regrid: constant and affine exactness") {
    const auto src = LatLonGrid::global(2.8125);
    const auto dst = LatLonGrid::global(5.625);

    auto c = make_field(src, [](double, double) { return -7.5; });
    const auto rc = regrid_bilinear(c, dst);
    for (std::size_t i = 0; i < rc.values.size(); ++i)
        REQUIRE(rc.values[i] == Catch::Approx(-7.5).epsilon(1e-14));

    auto aff = make_field(src, [](double lat, double lon) { return 3.0 * lat + 0.5 * lon; });
    const auto ra = regrid_bilinear(aff, dst);
    for (std::size_t I = 0; I < dst.rows(); ++I) {
        for (std::size_t J = 0; J < dst.cols(); ++J) {
            const double lon = dst.lons[J];
            // stay away from the wrap seam and the clamped outer rows
            if (lon < 10.0 || lon > 350.0) continue;
            if (dst.lats[I] < src.lats.front() || dst.lats[I] > src.lats.back()) continue;
            const double expect = 3.0 * dst.lats[I] + 0.5 * lon;
            REQUIRE(ra.values.at(I, J) == Catch::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("bilinear regrid: matches separable 1-D oracle") {
    const auto src = LatLonGrid::global(5.625);
    const auto dst = LatLonGrid::global(2.8125);
    auto f = make_field(src, [](double lat, double lon) {
        return std::sin(lat / 29.0) * std::cos(lon / 41.0) + lon / 720.0;
    });
    const auto out = regrid_bilinear(f, dst);

    // Oracle: 1-D linear interpolation in lon at the two bracketing source
    // rows, then 1-D linear in lat.
    auto interp_lon = [&](std::size_t row, double lon) {
        const double r = src.resolution_deg;
        double dl = std::fmod(lon - src.lons.front(), 360.0);
        if (dl < 0) dl += 360.0;
        const std::size_t j0 = static_cast<std::size_t>(dl / r) % src.cols();
        const std::size_t j1 = (j0 + 1) % src.cols();
        const double fx = dl / r - std::floor(dl / r);
        return (1 - fx) * f.values.at(row, j0) + fx * f.values.at(row, j1);
    };
    for (std::size_t I = 0; I < dst.rows(); I += 7) {
        for (std::size_t J = 0; J < dst.cols(); J += 11) {
            const double lat = dst.lats[I];
            double expect;
            if (lat <= src.lats.front())
                expect = interp_lon(0, dst.lons[J]);
            else if (lat >= src.lats.back())
                expect = interp_lon(src.rows() - 1, dst.lons[J]);
            else {
                const double pos = (lat - src.lats.front()) / src.resolution_deg;
                const auto i0 = static_cast<std::size_t>(pos);
                const double fy = pos - std::floor(pos);
                expect = (1 - fy) * interp_lon(i0, dst.lons[J]) + fy * interp_lon(i0 + 1, dst.lons[J]);
            }
            REQUIRE(out.values.at(I, J) == Catch::Approx(expect).epsilon(1e-12).margin(1e-12));
        }
    }
}

TEST_CASE("crop: MENA preset is 8 x 14 on the 5.625 grid") {
    const auto g = LatLonGrid::global(5.625);
    const auto ci = crop_index(g, bbox_mena());
    REQUIRE(ci.row_idx.size() == 8);
    REQUIRE(ci.col_idx.size() == 14);
    // wraps the prime meridian: starts west of 0, ends east of it
    REQUIRE(ci.grid.lons.front() > 300.0);
    REQUIRE(ci.grid.lons.back() < 60.0);
    ci.grid.validate();
}

TEST_CASE("crop: all presets share the 8 x 14 shape") {
    const auto g = LatLonGrid::global(5.625);
    for (const auto& name : {"mena", "east-asia", "north-america"}) {
        const auto ci = crop_index(g, bbox_preset(name));
        REQUIRE(ci.row_idx.size() == 8);
        REQUIRE(ci.col_idx.size() == 14);
    }
}

TEST_CASE("crop: east-asia extent matches center-count arithmetic") {
    const auto g = LatLonGrid::global(5.625);
    const auto box = bbox_east_asia();
    // oracle: count centers falling in the box directly
    std::size_t nlat = 0, nlon = 0;
    for (double lat : g.lats)
        if (lat >= box.lat_min && lat <= box.lat_max) ++nlat;
    for (double lon : g.lons)
        if (box.contains_lon(lon)) ++nlon;
    const auto ci = crop_index(g, box);
    REQUIRE(ci.row_idx.size() == nlat);
    REQUIRE(ci.col_idx.size() == nlon);
    for (double lat : ci.grid.lats) REQUIRE(box.contains(lat, ci.grid.lons.front()));
}

TEST_CASE("crop: whole-globe box is identity") {
    const auto g = LatLonGrid::global(11.25);
    auto f = make_field(g, [](double lat, double lon) { return lat + lon; });
    BoundingBox all{-90.0, 90.0, 0.0, 359.9999, "all"};
    const auto out = crop_region(f, all);
    REQUIRE(out.grid.rows() == g.rows());
    REQUIRE(out.grid.cols() == g.cols());
    for (std::size_t i = 0; i < f.values.size(); ++i) REQUIRE(out.values[i] == f.values[i]);
}

TEST_CASE("crop: nested crops collapse to the inner box") {
    const auto g = LatLonGrid::global(5.625);
    auto f = make_field(g, [](double lat, double lon) { return lat * 360.0 + lon; });
    BoundingBox outer{-50.0, 60.0, 280.0, 100.0, "outer"};  // wraps
    BoundingBox inner{7.03125, 48.515625, 335.390625, 51.328125, "inner"};
    const auto once = crop_region(f, inner);
    const auto twice = crop_region(crop_region(f, outer), inner);
    REQUIRE(once.grid.lats == twice.grid.lats);
    REQUIRE(once.grid.lons == twice.grid.lons);
    for (std::size_t i = 0; i < once.values.size(); ++i)
        REQUIRE(once.values[i] == twice.values[i]);
}

TEST_CASE("crop: empty selection errors") {
    const auto g = LatLonGrid::global(5.625);
    auto f = make_field(g, [](double, double) { return 0.0; });
    BoundingBox empty{0.2, 0.3, 10.0, 10.1, "empty"};
    REQUIRE_THROWS_AS(crop_region(f, empty), DataError);
}

TEST_CASE("longitude normalization") {
    REQUIRE(normalize_lon(-180.0) == Catch::Approx(180.0));
    REQUIRE(normalize_lon(-5.625) == Catch::Approx(354.375));
    REQUIRE(normalize_lon(365.0) == Catch::Approx(5.0));
    REQUIRE(normalize_lon(0.0) == 0.0);
}

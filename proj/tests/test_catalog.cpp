#include <catch2/catch_amalgamated.hpp>

#include "aircast/catalog.hpp"

using namespace aircast;

TEST_CASE("catalog rows and channel expansion counts") {
    const auto cat = default_catalog();
    std::size_t weather_rows = 0, aq_rows = 0;
    for (const auto& s : cat.specs())
        (s.family == VariableFamily::weather ? weather_rows : aq_rows) += 1;
    REQUIRE(weather_rows == 9);
    REQUIRE(aq_rows == 12);
    REQUIRE(cat.expand(VariableFamily::weather).size() == 45);   // 6*7 + 3
    REQUIRE(cat.expand(VariableFamily::air_quality).size() == 42);  // 5*7 + 7
    REQUIRE(cat.expand_all().size() == 87);
}

TEST_CASE("multi-level variables carry exactly the seven standard levels") {
    const auto cat = default_catalog();
    for (const auto& s : cat.specs()) {
        if (!s.single_level()) {
            REQUIRE(s.levels == standard_levels());
        }
    }
    REQUIRE(standard_levels() == std::vector<int>{50, 250, 500, 600, 700, 850, 925});
}

TEST_CASE("total-column variables are single level") {
    const auto cat = default_catalog();
    for (const auto& name : {"tcco", "tc_no", "tcno2", "gtco3"})
        REQUIRE(cat.find(name).single_level());
}

TEST_CASE("preset: 3pm") {
    const auto chans = select_preset("3pm");
    REQUIRE(chans.size() == 3);
    REQUIRE(chans[0].name == "pm2p5");
    REQUIRE(chans[1].name == "pm10");
    REQUIRE(chans[2].name == "pm1");
    for (const auto& c : chans) REQUIRE(c.family == VariableFamily::air_quality);
}

TEST_CASE("preset channel counts match the catalog arithmetic") {
    REQUIRE(select_preset("3pm").size() == 3);
    REQUIRE(select_preset("weather+3pm").size() == 48);
    REQUIRE(select_preset("aq").size() == 42);
    REQUIRE(select_preset("weather+aq").size() == 87);
    REQUIRE(select_preset("surface-weather+surface-aq").size() == 21);
    REQUIRE(select_preset("notsurface-weather+notsurface-aq").size() == 21);
    REQUIRE(select_preset("surface-weather+aq").size() == 51);
    REQUIRE(select_preset("weather+surface-aq").size() == 57);
}

TEST_CASE("surface preset uses the 925 hPa slice, notsurface the 50 hPa slice") {
    const auto surf = select_preset("surface-weather+surface-aq");
    REQUIRE(count_family(surf, VariableFamily::weather) == 9);
    REQUIRE(count_family(surf, VariableFamily::air_quality) == 12);
    for (const auto& c : surf) REQUIRE((c.level_hpa == 0 || c.level_hpa == 925));

    const auto nosurf = select_preset("notsurface-weather+notsurface-aq");
    for (const auto& c : nosurf) REQUIRE((c.level_hpa == 0 || c.level_hpa == 50));
    // total-column variables stay single-level in every preset
    for (const auto& c : surf)
        if (c.short_name == "tcco" || c.short_name == "gtco3") REQUIRE(c.level_hpa == 0);
}

TEST_CASE("weather channels precede air-quality channels in mixed presets") {
    const auto chans = select_preset("weather+aq");
    bool seen_aq = false;
    for (const auto& c : chans) {
        if (c.family == VariableFamily::air_quality) seen_aq = true;
        if (seen_aq) REQUIRE(c.family == VariableFamily::air_quality);
    }
}

TEST_CASE("unknown preset lists valid names") {
    try {
        select_preset("bogus");
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("bogus") != std::string::npos);
        REQUIRE(msg.find("weather+aq") != std::string::npos);
    }
}

TEST_CASE("duplicate short names rejected") {
    std::vector<VariableSpec> specs{
        {"a", "x", VariableFamily::weather, {}, "1"},
        {"b", "x", VariableFamily::weather, {}, "1"},
    };
    REQUIRE_THROWS_AS(VariableCatalog(std::move(specs)), DataError);
}

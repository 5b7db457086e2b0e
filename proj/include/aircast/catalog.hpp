#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "aircast/error.hpp"

namespace aircast {

enum class VariableFamily { weather, air_quality };

inline const char* family_name(VariableFamily f) {
    return f == VariableFamily::weather ? "weather" : "air_quality";
}

inline VariableFamily family_from_name(const std::string& s) {
    if (s == "weather") return VariableFamily::weather;
    if (s == "air_quality") return VariableFamily::air_quality;
    throw DataError("unknown variable family '" + s + "'");
}

// The seven pressure levels carried by every multi-level variable, in hPa.
inline const std::vector<int>& standard_levels() {
    static const std::vector<int> levels{50, 250, 500, 600, 700, 850, 925};
    return levels;
}

struct VariableSpec {
    std::string long_name;
    std::string short_name;
    VariableFamily family = VariableFamily::weather;
    std::vector<int> levels;  // empty = single level
    std::string units;

    bool single_level() const { return levels.empty(); }
    std::size_t channel_count() const { return single_level() ? 1 : levels.size(); }
};

// One expanded channel: a variable at one level ("z_500") or a single-level
// variable ("t2m").
struct Channel {
    std::string name;
    std::string short_name;
    VariableFamily family = VariableFamily::weather;
    int level_hpa = 0;  // 0 = single level
    std::string units;
};

inline std::string channel_name(const std::string& short_name, int level_hpa) {
    if (level_hpa == 0) return short_name;
    return short_name + "_" + std::to_string(level_hpa);
}

class VariableCatalog {
public:
    explicit VariableCatalog(std::vector<VariableSpec> specs) : specs_(std::move(specs)) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            for (std::size_t j = i + 1; j < specs_.size(); ++j)
                if (specs_[i].short_name == specs_[j].short_name)
                    throw DataError("duplicate variable short name '" + specs_[i].short_name + "'");
            if (!specs_[i].single_level() && specs_[i].levels.size() != 7)
                throw DataError("multi-level variable '" + specs_[i].short_name +
                                "' must carry exactly 7 levels");
        }
    }

    const std::vector<VariableSpec>& specs() const { return specs_; }

    const VariableSpec& find(const std::string& short_name) const {
        for (const auto& s : specs_)
            if (s.short_name == short_name) return s;
        throw DataError("variable '" + short_name + "' not in catalog");
    }

    bool has(const std::string& short_name) const {
        return std::any_of(specs_.begin(), specs_.end(),
                           [&](const VariableSpec& s) { return s.short_name == short_name; });
    }

    // Full channel expansion: every level of every variable, weather family
    // first, catalog order within family, levels in standard order.
    std::vector<Channel> expand(VariableFamily family) const {
        std::vector<Channel> out;
        for (const auto& s : specs_) {
            if (s.family != family) continue;
            if (s.single_level()) {
                out.push_back({s.short_name, s.short_name, s.family, 0, s.units});
            } else {
                for (int lvl : s.levels)
                    out.push_back({channel_name(s.short_name, lvl), s.short_name, s.family, lvl,
                                   s.units});
            }
        }
        return out;
    }

    std::vector<Channel> expand_all() const {
        auto out = expand(VariableFamily::weather);
        const auto aq = expand(VariableFamily::air_quality);
        out.insert(out.end(), aq.begin(), aq.end());
        return out;
    }

private:
    std::vector<VariableSpec> specs_;
};

// Built-in catalog: 9 weather rows and 12 air-quality rows. Channel expansion
// yields 6*7+3 = 45 weather and 5*7+7 = 42 air-quality channels.
inline VariableCatalog default_catalog() {
    const auto& L = standard_levels();
    std::vector<VariableSpec> s;
    const auto W = VariableFamily::weather;
    const auto A = VariableFamily::air_quality;
    s.push_back({"geopotential", "z", W, L, "m**2 s**-2"});
    s.push_back({"temperature", "t", W, L, "K"});
    s.push_back({"specific humidity", "q", W, L, "kg kg**-1"});
    s.push_back({"relative humidity", "r", W, L, "%"});
    s.push_back({"u component of wind", "u", W, L, "m s**-1"});
    s.push_back({"v component of wind", "v", W, L, "m s**-1"});
    s.push_back({"2m temperature", "t2m", W, {}, "K"});
    s.push_back({"10m u component of wind", "u10", W, {}, "m s**-1"});
    s.push_back({"10m v component of wind", "v10", W, {}, "m s**-1"});
    s.push_back({"carbon monoxide", "co", A, L, "kg m**-3"});
    s.push_back({"ozone", "go3", A, L, "kg m**-3"});
    s.push_back({"nitrogen monoxide", "no", A, L, "kg m**-3"});
    s.push_back({"nitrogen dioxide", "no2", A, L, "kg m**-3"});
    s.push_back({"sulphur dioxide", "so2", A, L, "kg m**-3"});
    s.push_back({"particulate matter d < 1 um", "pm1", A, {}, "kg m**-3"});
    s.push_back({"particulate matter d < 10 um", "pm10", A, {}, "kg m**-3"});
    s.push_back({"particulate matter d < 2.5 um", "pm2p5", A, {}, "kg m**-3"});
    s.push_back({"total column carbon monoxide", "tcco", A, {}, "kg m**-2"});
    s.push_back({"total column nitrogen monoxide", "tc_no", A, {}, "kg m**-2"});
    s.push_back({"total column nitrogen dioxide", "tcno2", A, {}, "kg m**-2"});
    s.push_back({"total column ozone", "gtco3", A, {}, "kg m**-2"});
    return VariableCatalog(std::move(s));
}

// ---------------------------------------------------------------------------
// Ablation presets. "Surface" keeps single-level variables and the 925 hPa
// slice of multi-level variables (near-surface = high pressure); "notsurface"
// takes the 50 hPa slice instead.
// ---------------------------------------------------------------------------
inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{
        "3pm",
        "weather+3pm",
        "aq",
        "weather+aq",
        "surface-weather+surface-aq",
        "notsurface-weather+notsurface-aq",
        "surface-weather+aq",
        "weather+surface-aq",
    };
    return names;
}

namespace detail {

inline std::vector<Channel> family_slice(const VariableCatalog& cat, VariableFamily family,
                                         int level) {
    std::vector<Channel> out;
    for (const auto& s : cat.specs()) {
        if (s.family != family) continue;
        if (s.single_level())
            out.push_back({s.short_name, s.short_name, s.family, 0, s.units});
        else
            out.push_back({channel_name(s.short_name, level), s.short_name, s.family, level,
                           s.units});
    }
    return out;
}

inline std::vector<Channel> three_pm(const VariableCatalog& cat) {
    std::vector<Channel> out;
    for (const auto& name : {"pm2p5", "pm10", "pm1"}) {
        const auto& s = cat.find(name);
        out.push_back({s.short_name, s.short_name, s.family, 0, s.units});
    }
    return out;
}

}  // namespace detail

inline std::vector<Channel> select_preset(const std::string& name,
                                          const VariableCatalog& cat = default_catalog()) {
    const int surface = 925;
    const int notsurface = 50;
    const auto W = VariableFamily::weather;
    const auto A = VariableFamily::air_quality;
    auto concat = [](std::vector<Channel> a, std::vector<Channel> b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };

    if (name == "3pm") return detail::three_pm(cat);
    if (name == "weather+3pm") return concat(cat.expand(W), detail::three_pm(cat));
    if (name == "aq") return cat.expand(A);
    if (name == "weather+aq") return concat(cat.expand(W), cat.expand(A));
    if (name == "surface-weather+surface-aq")
        return concat(detail::family_slice(cat, W, surface), detail::family_slice(cat, A, surface));
    if (name == "notsurface-weather+notsurface-aq")
        return concat(detail::family_slice(cat, W, notsurface),
                      detail::family_slice(cat, A, notsurface));
    if (name == "surface-weather+aq")
        return concat(detail::family_slice(cat, W, surface), cat.expand(A));
    if (name == "weather+surface-aq")
        return concat(cat.expand(W), detail::family_slice(cat, A, surface));

    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError("unknown preset '" + name + "' (valid: " + valid + ")");
}

// Count of channels per family in a channel list; the model needs the split.
inline std::size_t count_family(const std::vector<Channel>& chans, VariableFamily f) {
    return static_cast<std::size_t>(std::count_if(
        chans.begin(), chans.end(), [&](const Channel& c) { return c.family == f; }));
}

}  // namespace aircast

#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include "aircast/error.hpp"

namespace aircast {

// Timestamps are whole hours since the Unix epoch, UTC. All calendar math is
// proleptic Gregorian and self-contained so results never depend on the host
// locale or time zone database.
using UtcHour = std::int64_t;

namespace detail {

// Days from civil date, epoch 1970-01-01 (Howard Hinnant's algorithm).
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), m, d};
}

}  // namespace detail

constexpr bool is_leap_year(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

constexpr int days_in_month(int y, unsigned m) {
    constexpr int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap_year(y)) return 29;
    return lengths[m - 1];
}

constexpr UtcHour utc_hour(int year, unsigned month, unsigned day, unsigned hour = 0) {
    return detail::days_from_civil(year, month, day) * 24 + static_cast<std::int64_t>(hour);
}

constexpr UtcHour year_start(int year) { return utc_hour(year, 1, 1); }

inline int year_of(UtcHour t) {
    const std::int64_t days = (t >= 0 ? t : t - 23) / 24;
    return detail::civil_from_days(days).year;
}

inline int hour_of_day(UtcHour t) {
    std::int64_t h = t % 24;
    if (h < 0) h += 24;
    return static_cast<int>(h);
}

inline std::string format_iso8601(UtcHour t) {
    std::int64_t days = t / 24;
    std::int64_t h = t % 24;
    if (h < 0) {
        h += 24;
        days -= 1;
    }
    const auto cd = detail::civil_from_days(days);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:00:00Z", cd.year, cd.month, cd.day,
                  static_cast<long long>(h));
    return buf;
}

// Accepts "YYYY-MM-DDTHH:MM:SSZ", "YYYY-MM-DDTHH:MM", "YYYY-MM-DD HH:MM" and
// bare "YYYY-MM-DD". Minutes/seconds must be zero (whole-hour data model).
inline UtcHour parse_iso8601(const std::string& s) {
    int year = 0;
    unsigned month = 0, day = 0, hour = 0, minute = 0, second = 0;
    int n = std::sscanf(s.c_str(), "%d-%u-%u%*1[T ]%u:%u:%u", &year, &month, &day, &hour, &minute,
                        &second);
    if (n < 3) throw DataError("unparseable timestamp: '" + s + "'");
    if (month < 1 || month > 12 || day < 1 ||
        day > static_cast<unsigned>(days_in_month(year, month)))
        throw DataError("invalid calendar date: '" + s + "'");
    if (hour > 23 || minute != 0 || second != 0)
        throw DataError("timestamps must fall on whole hours: '" + s + "'");
    return utc_hour(year, month, day, hour);
}

}  // namespace aircast

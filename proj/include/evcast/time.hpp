#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace evcast {

// Timestamps are seconds since 1970-01-01 00:00:00, calendar-local with no
// time zone. Days are counted in whole days since the same epoch.

struct CivilDate {
    int year;
    unsigned month; // 1..12
    unsigned day;   // 1..31
};

inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), m, d};
}

namespace detail {

inline bool parse_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    int v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

inline bool days_in_month(int y, int m, int& out) {
    static constexpr int lens[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m < 1 || m > 12) return false;
    out = lens[m - 1];
    if (m == 2 && (y % 4 == 0 && (y % 100 != 0 || y % 400 == 0))) out = 29;
    return true;
}

} // namespace detail

/// Day number for a strict "YYYY-MM-DD" string.
inline std::optional<std::int64_t> parse_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y, m, d, md;
    if (!detail::parse_digits(s, 0, 4, y) || !detail::parse_digits(s, 5, 2, m) ||
        !detail::parse_digits(s, 8, 2, d))
        return std::nullopt;
    if (!detail::days_in_month(y, m, md) || d < 1 || d > md) return std::nullopt;
    return days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

/// Seconds-since-epoch for a strict "YYYY-MM-DD HH:MM:SS" string.
inline std::optional<std::int64_t> parse_datetime(std::string_view s) {
    if (s.size() != 19 || s[10] != ' ' || s[13] != ':' || s[16] != ':') return std::nullopt;
    auto day = parse_date(s.substr(0, 10));
    if (!day) return std::nullopt;
    int hh, mm, ss;
    if (!detail::parse_digits(s, 11, 2, hh) || !detail::parse_digits(s, 14, 2, mm) ||
        !detail::parse_digits(s, 17, 2, ss))
        return std::nullopt;
    if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
    return *day * 86400 + hh * 3600 + mm * 60 + ss;
}

inline std::int64_t day_of(std::int64_t ts) {
    return ts >= 0 ? ts / 86400 : (ts - 86399) / 86400;
}

inline int second_of_day(std::int64_t ts) {
    return static_cast<int>(ts - day_of(ts) * 86400);
}

/// Hour bucket 1..24 for clock hours 00..23.
inline int hour_index(std::int64_t ts) {
    return second_of_day(ts) / 3600 + 1;
}

inline std::string format_date(std::int64_t day) {
    CivilDate c = civil_from_days(day);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

inline std::string format_datetime(std::int64_t ts) {
    int s = second_of_day(ts);
    char buf[40];
    std::snprintf(buf, sizeof(buf), " %02d:%02d:%02d", s / 3600, (s / 60) % 60, s % 60);
    return format_date(day_of(ts)) + buf;
}

} // namespace evcast

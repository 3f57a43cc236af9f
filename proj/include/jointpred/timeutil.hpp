#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "jointpred/errors.hpp"

namespace jointpred {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Days since the Unix epoch of the local calendar day containing `t`.
inline std::int64_t local_day(Timestamp t, int tz_offset_minutes = 0) {
    std::int64_t local = t + std::int64_t{tz_offset_minutes} * 60;
    return local >= 0 ? local / kSecondsPerDay : -((-local + kSecondsPerDay - 1) / kSecondsPerDay);
}

/// Seconds after local midnight.
inline std::int64_t local_seconds_of_day(Timestamp t, int tz_offset_minutes = 0) {
    std::int64_t local = t + std::int64_t{tz_offset_minutes} * 60;
    return local - local_day(t, tz_offset_minutes) * kSecondsPerDay;
}

inline Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0,
                                int minute = 0, int second = 0) {
    using namespace std::chrono;
    auto d = sys_days{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}};
    return std::int64_t{d.time_since_epoch().count()} * kSecondsPerDay + hour * 3600 +
           minute * 60 + second;
}

/// Parses ISO-8601 UTC instants: `YYYY-MM-DDTHH:MM[:SS]` with an optional `Z`
/// or `+00:00` suffix; a space may replace `T`; a bare date is midnight.
inline Timestamp parse_timestamp(std::string_view s) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    std::string buf(s);
    char sep = 0;
    int n = std::sscanf(buf.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &h, &mi, &sec);
    if (n < 3) throw Error("ParseError", "invalid timestamp '" + buf + "'");
    if (n > 3 && sep != 'T' && sep != ' ') throw Error("ParseError", "invalid timestamp '" + buf + "'");
    if (n == 4 || n == 5) throw Error("ParseError", "invalid timestamp '" + buf + "'");
    auto zone = buf.find_first_of("Z+", 10);
    if (zone != std::string::npos) {
        auto tail = buf.substr(zone);
        if (tail != "Z" && tail != "+00:00" && tail != "+0000")
            throw Error("ParseError", "only UTC timestamps are accepted: '" + buf + "'");
    }
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec > 60)
        throw Error("ParseError", "invalid timestamp '" + buf + "'");
    return make_timestamp(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, sec);
}

inline std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    std::int64_t day = local_day(t);
    std::int64_t rem = t - day * kSecondsPerDay;
    year_month_day ymd{sys_days{days{day}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), int(rem / 3600),
                  int(rem / 60 % 60), int(rem % 60));
    return buf;
}

inline std::string format_date(std::int64_t day) {
    using namespace std::chrono;
    year_month_day ymd{sys_days{days{day}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

}  // namespace jointpred

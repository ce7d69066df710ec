#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace epf {

// NEM market time: Australian Eastern Standard Time (UTC+10) with no
// daylight saving. Instants are wall-clock readings of that zone placed on the
// sys_seconds axis, so calendar arithmetic is plain chrono arithmetic and every
// day has exactly 288 five-minute intervals.
using MarketTime = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;

inline constexpr std::chrono::minutes kFiveMinutes{5};
inline constexpr std::chrono::minutes kHalfHour{30};
inline constexpr int kIntervalsPerDay5 = 288;
inline constexpr int kIntervalsPerDay30 = 48;

[[nodiscard]] Date parse_date(std::string_view iso);  // "YYYY-MM-DD"
[[nodiscard]] std::string format_date(const Date& d);

// "YYYY-MM-DD", "YYYY-MM-DD HH:MM" or "YYYY-MM-DDTHH:MM[:SS]".
[[nodiscard]] MarketTime parse_market_time(std::string_view text);
[[nodiscard]] std::string format_market_time(MarketTime t);

[[nodiscard]] inline MarketTime start_of(const Date& d) {
    return MarketTime{std::chrono::sys_days{d}};
}

[[nodiscard]] inline std::int64_t epoch_seconds(MarketTime t) { return t.time_since_epoch().count(); }
[[nodiscard]] inline MarketTime from_epoch_seconds(std::int64_t s) {
    return MarketTime{std::chrono::seconds{s}};
}

// Inclusive day count of [first, last].
[[nodiscard]] long days_inclusive(const Date& first, const Date& last);

struct CalendarFields {
    int hour_of_day;   // 0..23
    int day_of_week;   // 0 = Monday .. 6 = Sunday
    int day_of_month;  // 1..31
    int month_of_year; // 1..12
};

[[nodiscard]] CalendarFields calendar_fields(MarketTime t);

// Half-hour slot of the day, 0..47.
[[nodiscard]] int half_hour_of_day(MarketTime t);

}  // namespace epf

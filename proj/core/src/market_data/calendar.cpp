#include "epf/market_data/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "epf/error.hpp"

namespace epf {

namespace {

int parse_int(std::string_view text, std::string_view whole) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw FormatError("malformed date/time '" + std::string(whole) + "'");
    }
    return value;
}

}  // namespace

Date parse_date(std::string_view iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
        throw FormatError("expected YYYY-MM-DD, got '" + std::string(iso) + "'");
    }
    Date d{std::chrono::year{parse_int(iso.substr(0, 4), iso)},
           std::chrono::month{static_cast<unsigned>(parse_int(iso.substr(5, 2), iso))},
           std::chrono::day{static_cast<unsigned>(parse_int(iso.substr(8, 2), iso))}};
    if (!d.ok()) throw FormatError("invalid calendar date '" + std::string(iso) + "'");
    return d;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

MarketTime parse_market_time(std::string_view text) {
    const Date d = parse_date(text.substr(0, std::min<std::size_t>(10, text.size())));
    MarketTime t = start_of(d);
    if (text.size() == 10) return t;
    if (text.size() < 16 || (text[10] != ' ' && text[10] != 'T') || text[13] != ':') {
        throw FormatError("expected 'YYYY-MM-DD HH:MM', got '" + std::string(text) + "'");
    }
    const int hh = parse_int(text.substr(11, 2), text);
    const int mm = parse_int(text.substr(14, 2), text);
    int ss = 0;
    if (text.size() == 19 && text[16] == ':') {
        ss = parse_int(text.substr(17, 2), text);
    } else if (text.size() != 16) {
        throw FormatError("trailing characters in '" + std::string(text) + "'");
    }
    if (hh > 24 || mm > 59 || ss > 59) throw FormatError("invalid time '" + std::string(text) + "'");
    return t + std::chrono::hours{hh} + std::chrono::minutes{mm} + std::chrono::seconds{ss};
}

std::string format_market_time(MarketTime t) {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    const std::chrono::hh_mm_ss hms{t - day};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s %02ld:%02ld", format_date(Date{day}).c_str(),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()));
    return buf;
}

long days_inclusive(const Date& first, const Date& last) {
    return (std::chrono::sys_days{last} - std::chrono::sys_days{first}).count() + 1;
}

CalendarFields calendar_fields(MarketTime t) {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    const Date ymd{day};
    const std::chrono::weekday wd{day};
    const auto hours = std::chrono::floor<std::chrono::hours>(t - day).count();
    return CalendarFields{
        .hour_of_day = static_cast<int>(hours),
        .day_of_week = static_cast<int>((wd.c_encoding() + 6) % 7),
        .day_of_month = static_cast<int>(static_cast<unsigned>(ymd.day())),
        .month_of_year = static_cast<int>(static_cast<unsigned>(ymd.month())),
    };
}

int half_hour_of_day(MarketTime t) {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    return static_cast<int>(std::chrono::floor<std::chrono::minutes>(t - day).count() / 30);
}

}  // namespace epf

#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "mfagl/error.hpp"

namespace mfagl {

namespace detail {

// Days between 1970-01-01 and y-m-d in the proleptic Gregorian calendar
// (Howard Hinnant's civil-days algorithm).
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097LL + static_cast<std::int64_t>(doe) - 719468;
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
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), m, d};
}

constexpr bool is_leap_year(int y) {
    return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
}

constexpr int days_in_month(int year, int month) {
    constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap_year(year)) return 29;
    return lengths[month - 1];
}

inline int parse_int_field(std::string_view text, std::string_view what) {
    int value = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty())
        throw InvalidArgument("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
    return value;
}

} // namespace detail

using detail::days_in_month;
using detail::is_leap_year;

/// A civil calendar day, stored as days since 1970-01-01.
class Date {
public:
    Date() = default;

    Date(int year, int month, int day) {
        if (month < 1 || month > 12)
            throw InvalidArgument("month out of range: " + std::to_string(month));
        if (day < 1 || day > detail::days_in_month(year, month))
            throw InvalidArgument("day out of range: " + std::to_string(year) + "-" +
                                  std::to_string(month) + "-" + std::to_string(day));
        serial_ = static_cast<std::int32_t>(detail::days_from_civil(year, static_cast<unsigned>(month),
                                                                    static_cast<unsigned>(day)));
    }

    static Date from_serial(std::int32_t days_since_epoch) {
        Date d;
        d.serial_ = days_since_epoch;
        return d;
    }

    /// Parses "YYYY-MM-DD".
    static Date parse(std::string_view text) {
        if (text.size() != 10 || text[4] != '-' || text[7] != '-')
            throw InvalidArgument("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
        const int y = detail::parse_int_field(text.substr(0, 4), "year");
        const int m = detail::parse_int_field(text.substr(5, 2), "month");
        const int d = detail::parse_int_field(text.substr(8, 2), "day");
        return Date(y, m, d);
    }

    std::int32_t serial() const { return serial_; }
    int year() const { return civil().year; }
    int month() const { return static_cast<int>(civil().month); }
    int day() const { return static_cast<int>(civil().day); }

    Date plus_days(int n) const { return from_serial(serial_ + n); }

    /// Same day one year earlier; Feb 29 clamps to Feb 28.
    Date minus_one_year() const {
        const auto c = civil();
        int y = c.year - 1;
        int d = static_cast<int>(c.day);
        const int limit = detail::days_in_month(y, static_cast<int>(c.month));
        if (d > limit) d = limit;
        return Date(y, static_cast<int>(c.month), d);
    }

    std::string to_string() const {
        const auto c = civil();
        char buf[12];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, static_cast<int>(c.month),
                      static_cast<int>(c.day));
        return buf;
    }

    auto operator<=>(const Date&) const = default;

private:
    detail::CivilDate civil() const { return detail::civil_from_days(serial_); }

    std::int32_t serial_ = 0;
};

/// A calendar month, the coarse reporting period.
class Period {
public:
    Period() = default;

    Period(int year, int month) : year_(year), month_(month) {
        if (month < 1 || month > 12)
            throw InvalidArgument("month out of range: " + std::to_string(month));
    }

    /// Parses "YYYY-MM".
    static Period parse(std::string_view text) {
        if (text.size() != 7 || text[4] != '-')
            throw InvalidArgument("bad period '" + std::string(text) + "', expected YYYY-MM");
        const int y = detail::parse_int_field(text.substr(0, 4), "year");
        const int m = detail::parse_int_field(text.substr(5, 2), "month");
        return Period(y, m);
    }

    static Period of(const Date& d) { return Period(d.year(), d.month()); }

    int year() const { return year_; }
    int month() const { return month_; }

    /// Months since year 0, for distance arithmetic.
    int index() const { return year_ * 12 + (month_ - 1); }

    Period plus_months(int n) const {
        const int idx = index() + n;
        const int y = (idx >= 0 ? idx : idx - 11) / 12;
        return Period(y, idx - y * 12 + 1);
    }

    int days_in() const { return detail::days_in_month(year_, month_); }
    Date first_day() const { return Date(year_, month_, 1); }
    Date last_day() const { return Date(year_, month_, days_in()); }

    std::string to_string() const {
        char buf[9];
        std::snprintf(buf, sizeof(buf), "%04d-%02d", year_, month_);
        return buf;
    }

    auto operator<=>(const Period&) const = default;

private:
    std::int32_t year_ = 1970;
    std::int32_t month_ = 1;
};

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// Parses "YYYY-MM-DDTHH:MM:SS" with optional trailing 'Z'.
inline Timestamp parse_timestamp(std::string_view text) {
    std::string_view body = text;
    if (!body.empty() && (body.back() == 'Z' || body.back() == 'z')) body.remove_suffix(1);
    if (body.size() != 19 || body[10] != 'T' || body[13] != ':' || body[16] != ':')
        throw InvalidArgument("bad timestamp '" + std::string(text) +
                              "', expected YYYY-MM-DDTHH:MM:SSZ");
    const Date day = Date::parse(body.substr(0, 10));
    const int h = detail::parse_int_field(body.substr(11, 2), "hour");
    const int mi = detail::parse_int_field(body.substr(14, 2), "minute");
    const int s = detail::parse_int_field(body.substr(17, 2), "second");
    if (h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60)
        throw InvalidArgument("time of day out of range in '" + std::string(text) + "'");
    return static_cast<Timestamp>(day.serial()) * 86400 + h * 3600 + mi * 60 + s;
}

inline std::string format_timestamp(Timestamp t) {
    std::int64_t days = t / 86400;
    std::int64_t sec = t % 86400;
    if (sec < 0) {
        sec += 86400;
        days -= 1;
    }
    const Date day = Date::from_serial(static_cast<std::int32_t>(days));
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%sT%02d:%02d:%02dZ", day.to_string().c_str(),
                  static_cast<int>(sec / 3600), static_cast<int>(sec / 60 % 60),
                  static_cast<int>(sec % 60));
    return buf;
}

/// UTC day containing the instant.
inline Date date_of_timestamp(Timestamp t) {
    std::int64_t days = t / 86400;
    if (t % 86400 < 0) days -= 1;
    return Date::from_serial(static_cast<std::int32_t>(days));
}

} // namespace mfagl

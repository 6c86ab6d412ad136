#pragma once

// Calendar dates (no time of day). Conversions between civil dates and a
// day count use the algorithms from Howard Hinnant's chrono notes.

#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>

#include "ch/error.hpp"

namespace ch {

class Date {
public:
    Date() = default;

    Date(int year, int month, int day) : y_(year), m_(month), d_(day) {
        if (!valid_ymd(year, month, day)) {
            throw_error(ErrorKind::data, "invalid calendar date: " + format_raw(year, month, day));
        }
    }

    int year() const { return y_; }
    int month() const { return m_; }
    int day() const { return d_; }

    static bool is_leap_year(int y) {
        return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
    }

    static int days_in_month(int y, int m) {
        static constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        if (m == 2 && is_leap_year(y)) return 29;
        return lengths[m - 1];
    }

    static bool valid_ymd(int y, int m, int d) {
        return y >= 1 && y <= 9999 && m >= 1 && m <= 12 && d >= 1 && d <= days_in_month(y, m);
    }

    // Days since 1970-01-01 (negative before).
    std::int64_t serial() const {
        std::int64_t y = y_;
        unsigned m = static_cast<unsigned>(m_);
        unsigned d = static_cast<unsigned>(d_);
        y -= m <= 2;
        const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
    }

    static Date from_serial(std::int64_t z) {
        z += 719468;
        const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        return Date(static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d));
    }

    Date plus_days(std::int64_t n) const { return from_serial(serial() + n); }

    // Strict ISO-8601 "YYYY-MM-DD".
    static Date parse(const std::string& text) {
        if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
            throw_error(ErrorKind::data, "unparseable date '" + text + "' (expected YYYY-MM-DD)");
        }
        auto digits = [&](int from, int to) {
            int v = 0;
            for (int i = from; i < to; ++i) {
                char c = text[static_cast<size_t>(i)];
                if (c < '0' || c > '9') {
                    throw_error(ErrorKind::data, "unparseable date '" + text + "' (expected YYYY-MM-DD)");
                }
                v = v * 10 + (c - '0');
            }
            return v;
        };
        int y = digits(0, 4), m = digits(5, 7), d = digits(8, 10);
        if (!valid_ymd(y, m, d)) {
            throw_error(ErrorKind::data, "invalid calendar date: " + text);
        }
        return Date(y, m, d);
    }

    std::string to_string() const { return format_raw(y_, m_, d_); }

    auto operator<=>(const Date&) const = default;

private:
    static std::string format_raw(int y, int m, int d) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
        return buf;
    }

    std::int16_t y_ = 1970;
    std::int8_t m_ = 1;
    std::int8_t d_ = 1;
};

inline std::int64_t days_between(const Date& from, const Date& to) {
    return to.serial() - from.serial();
}

// Same month/day with the year decremented; Feb 29 clamps to Feb 28 when the
// target year is not a leap year.
inline Date subtract_years(const Date& date, int years) {
    int y = date.year() - years;
    int m = date.month();
    int d = date.day();
    if (m == 2 && d == 29 && !Date::is_leap_year(y)) d = 28;
    if (!Date::valid_ymd(y, m, d)) {
        throw_error(ErrorKind::domain, "year subtraction leaves the supported calendar range");
    }
    return Date(y, m, d);
}

// Completed calendar years between birth and the given date. A Feb 29
// birthday counts as Mar 1 in non-leap years.
inline int age_in_years(const Date& birth, const Date& at) {
    if (birth > at) {
        throw_error(ErrorKind::domain, "birth date " + birth.to_string() +
                                           " is after " + at.to_string());
    }
    int bm = birth.month(), bd = birth.day();
    if (bm == 2 && bd == 29 && !Date::is_leap_year(at.year())) {
        bm = 3;
        bd = 1;
    }
    int age = at.year() - birth.year();
    if (at.month() < bm || (at.month() == bm && at.day() < bd)) --age;
    return age;
}

} // namespace ch

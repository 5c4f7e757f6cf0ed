// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

#include "ddose/result.hpp"

namespace ddose {

/// ISO-8601 calendar date (local, zone-free).
struct Date {
    int year = 0;
    unsigned month = 0;  // 1..12
    unsigned day = 0;    // 1..31

    auto operator<=>(const Date&) const = default;

    bool valid() const;
    std::string to_string() const;  // "2025-08-04"
    std::chrono::sys_days to_sys_days() const;

    static Result<Date> parse(std::string_view iso);
};

/// Signed whole days from `a` to `b`.
long days_between(const Date& a, const Date& b);

Date add_days(const Date& d, long days);

/// Local wall-clock timestamp with an explicit UTC offset,
/// e.g. "2025-08-04T08:30:00-05:00". Ordering is by local wall clock
/// (schedules order a clinic day, not an absolute instant).
struct LocalTimestamp {
    Date date;
    int seconds_of_day = 0;   // 0..86399, local wall clock
    int offset_minutes = 0;   // minutes east of UTC

    auto operator<=>(const LocalTimestamp& other) const {
        if (auto c = date <=> other.date; c != 0) return c;
        return seconds_of_day <=> other.seconds_of_day;
    }
    bool operator==(const LocalTimestamp& other) const {
        return date == other.date && seconds_of_day == other.seconds_of_day &&
               offset_minutes == other.offset_minutes;
    }

    std::string to_string() const;
    std::string hhmm() const;  // "08:30"

    static Result<LocalTimestamp> parse(std::string_view iso);
};

}  // namespace ddose

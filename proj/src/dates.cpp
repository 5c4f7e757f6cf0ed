// SPDX-License-Identifier: Apache-2.0
#include "ddose/dates.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cstdio>

namespace ddose {

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

}  // namespace

bool Date::valid() const {
    if (month < 1 || month > 12 || day < 1) return false;
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}};
    return ymd.ok();
}

std::string Date::to_string() const {
    return fmt::format("{:04d}-{:02d}-{:02d}", year, month, day);
}

std::chrono::sys_days Date::to_sys_days() const {
    return std::chrono::sys_days{std::chrono::year_month_day{
        std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}}};
}

Result<Date> Date::parse(std::string_view iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-' || !all_digits(iso.substr(0, 4)) ||
        !all_digits(iso.substr(5, 2)) || !all_digits(iso.substr(8, 2))) {
        return Result<Date>::failure("bad_date", fmt::format("not an ISO date: '{}'", iso));
    }
    Date d;
    d.year = std::stoi(std::string(iso.substr(0, 4)));
    d.month = static_cast<unsigned>(std::stoi(std::string(iso.substr(5, 2))));
    d.day = static_cast<unsigned>(std::stoi(std::string(iso.substr(8, 2))));
    if (!d.valid())
        return Result<Date>::failure("bad_date", fmt::format("invalid calendar date: '{}'", iso));
    return d;
}

long days_between(const Date& a, const Date& b) {
    return (b.to_sys_days() - a.to_sys_days()).count();
}

Date add_days(const Date& d, long days) {
    const auto ymd = std::chrono::year_month_day{d.to_sys_days() + std::chrono::days{days}};
    return Date{int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
}

std::string LocalTimestamp::to_string() const {
    const int h = seconds_of_day / 3600;
    const int m = (seconds_of_day % 3600) / 60;
    const int s = seconds_of_day % 60;
    const char sign = offset_minutes < 0 ? '-' : '+';
    const int off = offset_minutes < 0 ? -offset_minutes : offset_minutes;
    return fmt::format("{}T{:02d}:{:02d}:{:02d}{}{:02d}:{:02d}", date.to_string(), h, m, s, sign,
                       off / 60, off % 60);
}

std::string LocalTimestamp::hhmm() const {
    return fmt::format("{:02d}:{:02d}", seconds_of_day / 3600, (seconds_of_day % 3600) / 60);
}

Result<LocalTimestamp> LocalTimestamp::parse(std::string_view iso) {
    // YYYY-MM-DDTHH:MM:SS(+|-)HH:MM  (seconds required, offset required)
    if (iso.size() != 25 || iso[10] != 'T')
        return Result<LocalTimestamp>::failure("bad_timestamp",
                                               fmt::format("not an ISO timestamp: '{}'", iso));
    auto date = Date::parse(iso.substr(0, 10));
    if (!date)
        return Result<LocalTimestamp>::failure("bad_timestamp", date.error().message);
    int h = 0, m = 0, s = 0, oh = 0, om = 0;
    char tsep = 0, c1 = 0, c2 = 0, sign = 0, c3 = 0;
    const std::string rest(iso.substr(10));
    if (std::sscanf(rest.c_str(), "%c%2d%c%2d%c%2d%c%2d%c%2d", &tsep, &h, &c1, &m, &c2, &s, &sign,
                    &oh, &c3, &om) != 10 ||
        c1 != ':' || c2 != ':' || c3 != ':' || (sign != '+' && sign != '-') || h > 23 || m > 59 ||
        s > 59) {
        return Result<LocalTimestamp>::failure("bad_timestamp",
                                               fmt::format("not an ISO timestamp: '{}'", iso));
    }
    LocalTimestamp ts;
    ts.date = date.value();
    ts.seconds_of_day = h * 3600 + m * 60 + s;
    ts.offset_minutes = (sign == '-' ? -1 : 1) * (oh * 60 + om);
    return ts;
}

}  // namespace ddose

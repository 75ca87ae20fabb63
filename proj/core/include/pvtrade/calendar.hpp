#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pvtrade {

/// Whole hours since 1970-01-01T00:00Z on a flat UTC grid (no DST).
using HourIndex = std::int64_t;

HourIndex hour_index_from_ymd(int year, unsigned month, unsigned day, unsigned hour = 0);

/// "YYYY-MM-DDTHH:00:00Z".
std::string format_iso_hour(HourIndex h);

/// Accepts "YYYY-MM-DDTHH:MM[:SS][Z]" with zero minutes/seconds; throws
/// InputError otherwise.
HourIndex parse_iso_hour(std::string_view text);

int hour_of_day(HourIndex h);
/// 1-based day of the calendar year.
int day_of_year(HourIndex h);
int days_in_year_of(HourIndex h);

}  // namespace pvtrade

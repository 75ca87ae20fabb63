#include "pvtrade/calendar.hpp"

#include <chrono>
#include <cstdio>

#include <fmt/format.h>

#include "pvtrade/errors.hpp"

namespace pvtrade {

namespace chr = std::chrono;

namespace {

chr::sys_days to_days(HourIndex h) {
  // floor division so negative indices land on the right day
  HourIndex d = h >= 0 ? h / 24 : -((-h + 23) / 24);
  return chr::sys_days{chr::days{d}};
}

}  // namespace

HourIndex hour_index_from_ymd(int year, unsigned month, unsigned day, unsigned hour) {
  chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok() || hour > 23) {
    throw InputError(fmt::format("invalid date {}-{}-{} {}h", year, month, day, hour));
  }
  return static_cast<HourIndex>(chr::sys_days{ymd}.time_since_epoch().count()) * 24 + hour;
}

std::string format_iso_hour(HourIndex h) {
  chr::year_month_day ymd{to_days(h)};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:00:00Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     hour_of_day(h));
}

HourIndex parse_iso_hour(std::string_view text) {
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
  std::string s(text);
  int n = std::sscanf(s.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u", &y, &mo, &d, &hh, &mi, &ss);
  if (n < 5 || mi != 0 || ss != 0) {
    throw InputError("not an ISO-8601 hour timestamp: '" + s + "'");
  }
  return hour_index_from_ymd(y, mo, d, hh);
}

int hour_of_day(HourIndex h) {
  auto r = h % 24;
  return static_cast<int>(r < 0 ? r + 24 : r);
}

int day_of_year(HourIndex h) {
  auto days = to_days(h);
  chr::year_month_day ymd{days};
  chr::sys_days jan1{ymd.year() / chr::January / 1};
  return static_cast<int>((days - jan1).count()) + 1;
}

int days_in_year_of(HourIndex h) {
  chr::year_month_day ymd{to_days(h)};
  return ymd.year().is_leap() ? 366 : 365;
}

}  // namespace pvtrade

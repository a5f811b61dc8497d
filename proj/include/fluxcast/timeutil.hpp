#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fluxcast {

/// Hours since 1970-01-01T00:00 UTC.
using HourStamp = std::int64_t;
/// Minutes since 1970-01-01T00:00 UTC.
using MinuteStamp = std::int64_t;

struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  auto operator<=>(const CivilDate&) const = default;
};

/// Half-open hour interval [begin, end).
struct HourRange {
  HourStamp begin = 0;
  HourStamp end = 0;
  std::int64_t hours() const { return end - begin; }
  bool contains(HourStamp h) const { return h >= begin && h < end; }
};

std::int64_t days_from_civil(const CivilDate& d);
CivilDate civil_from_days(std::int64_t days);

bool is_valid_date(const CivilDate& d);

HourStamp hour_stamp(const CivilDate& d, int hour_of_day = 0);
CivilDate date_of_hour(HourStamp h);

int hour_of_day(HourStamp h);          // 0..23
int weekday(HourStamp h);              // 0 = Monday .. 6 = Sunday
int weekday(const CivilDate& d);
int week_hour(HourStamp h);            // 0..167, Monday 00:00 = 0

std::string iso_date(const CivilDate& d);                  // YYYY-MM-DD
std::string iso_hour(HourStamp h);                         // YYYY-MM-DDTHH:00:00Z
std::string iso_minute(MinuteStamp m);                     // YYYY-MM-DDTHH:MM:00Z

std::optional<CivilDate> parse_date(std::string_view s);   // strict YYYY-MM-DD
/// Strict YYYY-MM-DDTHH:MM:SSZ with SS == 00.
std::optional<MinuteStamp> parse_iso_minute(std::string_view s);

}  // namespace fluxcast

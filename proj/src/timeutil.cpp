#include "fluxcast/timeutil.hpp"

#include <cstdio>

namespace fluxcast {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

}  // namespace

// Civil <-> day-count conversions (Gregorian, proleptic).
std::int64_t days_from_civil(const CivilDate& d) {
  std::int64_t y = d.year;
  const unsigned m = static_cast<unsigned>(d.month);
  const unsigned dd = static_cast<unsigned>(d.day);
  y -= m <= 2;
  const std::int64_t era = floor_div(y, 400);
  const unsigned yoe = static_cast<unsigned>(y - era * 400);                  // [0, 399]
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + dd - 1;       // [0, 365]
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;                 // [0, 146096]
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t days) {
  days += 719468;
  const std::int64_t era = floor_div(days, 146097);
  const unsigned doe = static_cast<unsigned>(days - era * 146097);            // [0, 146096]
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365; // [0, 399]
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);               // [0, 365]
  const unsigned mp = (5 * doy + 2) / 153;                                    // [0, 11]
  const unsigned dd = doy - (153 * mp + 2) / 5 + 1;                           // [1, 31]
  const unsigned m = mp + (mp < 10 ? 3 : -9);                                 // [1, 12]
  return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(dd)};
}

bool is_valid_date(const CivilDate& d) {
  if (d.month < 1 || d.month > 12 || d.day < 1) return false;
  static const int mdays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int limit = mdays[d.month - 1];
  const bool leap = (d.year % 4 == 0 && d.year % 100 != 0) || d.year % 400 == 0;
  if (d.month == 2 && leap) limit = 29;
  return d.day <= limit;
}

HourStamp hour_stamp(const CivilDate& d, int hour_of_day) {
  return days_from_civil(d) * 24 + hour_of_day;
}

CivilDate date_of_hour(HourStamp h) { return civil_from_days(floor_div(h, 24)); }

int hour_of_day(HourStamp h) { return static_cast<int>(floor_mod(h, 24)); }

int weekday(HourStamp h) {
  // 1970-01-01 was a Thursday.
  return static_cast<int>(floor_mod(floor_div(h, 24) + 3, 7));
}

int weekday(const CivilDate& d) {
  return static_cast<int>(floor_mod(days_from_civil(d) + 3, 7));
}

int week_hour(HourStamp h) { return weekday(h) * 24 + hour_of_day(h); }

std::string iso_date(const CivilDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

std::string iso_hour(HourStamp h) {
  const CivilDate d = date_of_hour(h);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00:00Z", d.year, d.month, d.day,
                hour_of_day(h));
  return buf;
}

std::string iso_minute(MinuteStamp m) {
  const std::int64_t hour = floor_div(m, 60);
  const CivilDate d = civil_from_days(floor_div(hour, 24));
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:00Z", d.year, d.month, d.day,
                static_cast<int>(floor_mod(hour, 24)), static_cast<int>(floor_mod(m, 60)));
  return buf;
}

namespace {

bool all_digits(std::string_view s) {
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return !s.empty();
}

int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

}  // namespace

std::optional<CivilDate> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (!all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) || !all_digits(s.substr(8, 2)))
    return std::nullopt;
  CivilDate d{to_int(s.substr(0, 4)), to_int(s.substr(5, 2)), to_int(s.substr(8, 2))};
  if (!is_valid_date(d)) return std::nullopt;
  return d;
}

std::optional<MinuteStamp> parse_iso_minute(std::string_view s) {
  if (s.size() != 20 || s[10] != 'T' || s[13] != ':' || s[16] != ':' || s[19] != 'Z')
    return std::nullopt;
  auto date = parse_date(s.substr(0, 10));
  if (!date) return std::nullopt;
  if (!all_digits(s.substr(11, 2)) || !all_digits(s.substr(14, 2)) || !all_digits(s.substr(17, 2)))
    return std::nullopt;
  const int hh = to_int(s.substr(11, 2));
  const int mm = to_int(s.substr(14, 2));
  const int ss = to_int(s.substr(17, 2));
  if (hh > 23 || mm > 59 || ss != 0) return std::nullopt;
  return (days_from_civil(*date) * 24 + hh) * 60 + mm;
}

}  // namespace fluxcast

#include "fluxcast/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace fluxcast::analytics {

namespace {

HourRange common_range(const ingest::SeriesMap& series) {
  if (series.empty()) throw InputError("analytics: empty series map");
  return series.begin()->second.range();
}

void check_covered(const ingest::SeriesMap& series, HourStamp begin, HourStamp end) {
  for (const auto& [id, s] : series) {
    if (begin < s.t0 || end > s.t0 + s.size())
      throw RangeError("requested hours [" + iso_hour(begin) + ", " + iso_hour(end) +
                       ") outside series coverage of segment " + std::to_string(id));
  }
}

}  // namespace

WeeklyDeviation weekly_deviation(const ingest::SeriesMap& series, const CivilDate& week_start) {
  if (!is_valid_date(week_start)) throw ConfigError("weekly_deviation: invalid date");
  if (weekday(week_start) != 0)
    throw ConfigError("weekly_deviation: week_start must be a Monday, got " +
                      iso_date(week_start));
  const HourStamp h0 = hour_stamp(week_start);
  check_covered(series, h0, h0 + 168);

  ArrayX totals = ArrayX::Zero(168);
  for (const auto& [id, s] : series) {
    for (int h = 0; h < 168; ++h) {
      if (s.quality_at(h0 + h) == ingest::Quality::Missing) continue;
      totals[h] += s.at(h0 + h);
    }
  }
  const double nbar = totals.mean();
  WeeklyDeviation out;
  out.week_start = week_start;
  out.sigma_h = nbar > 0.0 ? ArrayX(totals / nbar) : ArrayX(ArrayX::Zero(168));
  return out;
}

DayProfile daily_profile(const ingest::SeriesMap& series, SegmentId segment,
                         const CivilDate& day) {
  auto it = series.find(segment);
  if (it == series.end())
    throw LookupError("daily_profile: no series for segment " + std::to_string(segment));
  const HourStamp h0 = hour_stamp(day);
  const auto& s = it->second;
  if (h0 < s.t0 || h0 + 24 > s.t0 + s.size())
    throw RangeError("daily_profile: " + iso_date(day) + " outside series coverage");
  DayProfile p;
  for (int h = 0; h < 24; ++h) {
    p.flux[static_cast<std::size_t>(h)] = s.at(h0 + h);
    p.quality[static_cast<std::size_t>(h)] = s.quality_at(h0 + h);
  }
  return p;
}

InOutSplit in_out_split(const ingest::SeriesMap& series, const net::Network& net,
                        const CivilDate& day) {
  bool any_tagged = false;
  for (const auto& seg : net.segments()) {
    if (seg.direction != net::Direction::Internal) {
      any_tagged = true;
      break;
    }
  }
  if (!any_tagged) throw ConfigError("in_out_split: network has no tagged access roads");

  const HourStamp h0 = hour_stamp(day);
  check_covered(series, h0, h0 + 24);

  InOutSplit out;
  for (const auto& seg : net.segments()) {
    if (seg.direction == net::Direction::Internal) continue;
    auto it = series.find(seg.id);
    if (it == series.end()) continue;
    for (int h = 0; h < 24; ++h) {
      if (it->second.quality_at(h0 + h) == ingest::Quality::Missing) continue;
      const double v = it->second.at(h0 + h);
      if (seg.direction == net::Direction::Incoming)
        out.incoming[static_cast<std::size_t>(h)] += v;
      else
        out.outgoing[static_cast<std::size_t>(h)] += v;
    }
  }
  for (int h = 0; h < 24; ++h)
    out.net[static_cast<std::size_t>(h)] =
        out.incoming[static_cast<std::size_t>(h)] - out.outgoing[static_cast<std::size_t>(h)];
  return out;
}

double RushHourSnapshot::clipped(SegmentId id) const {
  return std::min(flux_by_segment.at(id), clip_value);
}

RushHourSnapshot rush_hour_snapshot(const ingest::SeriesMap& series, const net::Network& net,
                                    HourStamp timestamp) {
  const HourRange r = common_range(series);
  if (!r.contains(timestamp))
    throw RangeError("rush_hour_snapshot: " + iso_hour(timestamp) + " outside series coverage");
  RushHourSnapshot snap;
  snap.timestamp = timestamp;
  for (const auto& seg : net.segments()) {
    if (!seg.sensorized) continue;
    auto it = series.find(seg.id);
    if (it == series.end() || !it->second.covers(timestamp))
      throw RangeError("rush_hour_snapshot: segment " + std::to_string(seg.id) +
                       " has no series at " + iso_hour(timestamp));
    snap.flux_by_segment[seg.id] = it->second.at(timestamp);
  }
  return snap;
}

std::vector<int> local_maxima_hours(const double* slice24) {
  std::vector<int> out;
  for (int h = 1; h <= 22; ++h) {
    if (slice24[h] > slice24[h - 1] && slice24[h] > slice24[h + 1]) out.push_back(h);
  }
  return out;
}

void write_weekly_deviation_csv(std::ostream& out, const WeeklyDeviation& w) {
  out << "key,hour,value\n";
  char buf[48];
  for (int h = 0; h < 168; ++h) {
    std::snprintf(buf, sizeof(buf), "sigma_h,%d,%.17g\n", h, w.sigma_h[h]);
    out << buf;
  }
}

nlohmann::json weekly_deviation_summary(const WeeklyDeviation& w) {
  static const char* kDayNames[7] = {"monday",   "tuesday", "wednesday", "thursday",
                                     "friday",   "saturday", "sunday"};
  nlohmann::json peaks = nlohmann::json::object();
  for (int day = 0; day < 7; ++day) {
    peaks[kDayNames[day]] = local_maxima_hours(w.sigma_h.data() + day * 24);
  }
  return {{"week_start", iso_date(w.week_start)},
          {"mean_sigma_h", w.sigma_h.mean()},
          {"min_sigma_h", w.sigma_h.minCoeff()},
          {"max_sigma_h", w.sigma_h.maxCoeff()},
          {"daily_peak_hours", peaks}};
}

void write_daily_profile_csv(std::ostream& out, SegmentId segment, const DayProfile& p) {
  out << "key,hour,value\n";
  char buf[64];
  for (int h = 0; h < 24; ++h) {
    std::snprintf(buf, sizeof(buf), "segment_%u,%d,%.17g\n", segment, h,
                  p.flux[static_cast<std::size_t>(h)]);
    out << buf;
  }
}

void write_in_out_csv(std::ostream& out, const InOutSplit& s) {
  out << "key,hour,value\n";
  char buf[64];
  for (int h = 0; h < 24; ++h) {
    const auto i = static_cast<std::size_t>(h);
    std::snprintf(buf, sizeof(buf), "incoming,%d,%.17g\n", h, s.incoming[i]);
    out << buf;
    std::snprintf(buf, sizeof(buf), "outgoing,%d,%.17g\n", h, s.outgoing[i]);
    out << buf;
    std::snprintf(buf, sizeof(buf), "net,%d,%.17g\n", h, s.net[i]);
    out << buf;
  }
}

nlohmann::json in_out_summary(const InOutSplit& s) {
  double in_total = 0.0, out_total = 0.0, net_total = 0.0;
  for (int h = 0; h < 24; ++h) {
    const auto i = static_cast<std::size_t>(h);
    in_total += s.incoming[i];
    out_total += s.outgoing[i];
    net_total += s.net[i];
  }
  const double volume = in_total + out_total;
  return {{"incoming_total", in_total},
          {"outgoing_total", out_total},
          {"net_total", net_total},
          {"net_over_volume", volume > 0.0 ? net_total / volume : 0.0}};
}

void write_rush_hour_csv(std::ostream& out, const RushHourSnapshot& s) {
  out << "key,hour,value\n";
  const int hod = hour_of_day(s.timestamp);
  char buf[64];
  for (const auto& [id, flux] : s.flux_by_segment) {
    std::snprintf(buf, sizeof(buf), "segment_%u,%d,%.17g\n", id, hod, std::min(flux, s.clip_value));
    out << buf;
  }
}

}  // namespace fluxcast::analytics

#pragma once

#include <array>
#include <iosfwd>
#include <map>

#include <json.hpp>

#include "fluxcast/common.hpp"
#include "fluxcast/ingest.hpp"
#include "fluxcast/network.hpp"
#include "fluxcast/timeutil.hpp"

namespace fluxcast::analytics {

/// sigma_h = N_h / mean(N_h) over one Monday-started week, where N_h sums
/// hourly flux over all sensorized segments.
struct WeeklyDeviation {
  CivilDate week_start;
  ArrayX sigma_h;  // size 168
};

WeeklyDeviation weekly_deviation(const ingest::SeriesMap& series, const CivilDate& week_start);

struct DayProfile {
  std::array<double, 24> flux{};
  std::array<ingest::Quality, 24> quality{};
};

DayProfile daily_profile(const ingest::SeriesMap& series, SegmentId segment,
                         const CivilDate& day);

struct InOutSplit {
  std::array<double, 24> incoming{};
  std::array<double, 24> outgoing{};
  std::array<double, 24> net{};
};

/// Per-hour sums over segments tagged Incoming/Outgoing; net = in - out.
InOutSplit in_out_split(const ingest::SeriesMap& series, const net::Network& net,
                        const CivilDate& day);

struct RushHourSnapshot {
  HourStamp timestamp = 0;
  std::map<SegmentId, double> flux_by_segment;
  double clip_value = 2000.0;  // applied on export only

  double clipped(SegmentId id) const;
};

RushHourSnapshot rush_hour_snapshot(const ingest::SeriesMap& series, const net::Network& net,
                                    HourStamp timestamp);

/// Hours h in 1..22 of a 24-value slice that strictly dominate both
/// neighbours.
std::vector<int> local_maxima_hours(const double* slice24);

// Plot-ready long-format CSV (`key,hour,value`) and JSON summaries.
void write_weekly_deviation_csv(std::ostream& out, const WeeklyDeviation& w);
nlohmann::json weekly_deviation_summary(const WeeklyDeviation& w);
void write_daily_profile_csv(std::ostream& out, SegmentId segment, const DayProfile& p);
void write_in_out_csv(std::ostream& out, const InOutSplit& s);
nlohmann::json in_out_summary(const InOutSplit& s);
void write_rush_hour_csv(std::ostream& out, const RushHourSnapshot& s);

}  // namespace fluxcast::analytics

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "fluxcast/common.hpp"
#include "fluxcast/network.hpp"
#include "fluxcast/timeutil.hpp"

namespace fluxcast::synth {

/// One 5-minute sensor reading.
struct FluxRecord {
  MinuteStamp t_min = 0;
  SegmentId segment = 0;
  double count = 0.0;     // vehicles per 5-minute bin
  double velocity = 0.0;  // km/h, carried but unused downstream
};

/// 168 non-negative multipliers (Monday 00:00 first), mean 1.0. Weekday
/// slices peak at 8, 14 and 19 h, Friday with a stronger lunch peak and a
/// weaker evening one, weekends at 13 and 19 h, with the weekly minimum in
/// the 2-4 h night hours.
struct WeeklyProfile {
  ArrayX hourly_shape;  // size 168

  static WeeklyProfile standard();

  double at_week_hour(int wh) const { return hourly_shape[wh]; }
};

struct SynthConfig {
  CivilDate start_date{2016, 1, 4};  // a Monday; 52 train weeks + 1 test week
  CivilDate end_date{2017, 1, 9};    // exclusive
  double noise_rel_std = 0.2;
  double outlier_rate = 0.005;      // probability per 5-minute record
  double outlier_magnitude = 5.0;   // multiplicative spike
  double latent_factor_std = 0.12;  // shared city-activity factor
  int propagation_lag_h = 1;        // internal segments lag access roads
  std::uint64_t seed = 0;
};

/// Aggregate incoming/outgoing hourly shapes over the access avenues
/// (unit mean_scale). Each day balances to zero exactly before noise.
struct InOutShapes {
  ArrayX incoming;  // size 168
  ArrayX outgoing;  // size 168
};

/// Per-avenue directional tilt, one 168-vector per avenue. incoming shape =
/// profile * (1 + delta), outgoing = profile * (1 - delta); the deltas are
/// projected so that every calendar day's incoming and outgoing totals match.
std::vector<ArrayX> access_tilt_deltas(const WeeklyProfile& profile, std::size_t n_avenues);

InOutShapes incoming_outgoing_balance_target(const WeeklyProfile& profile,
                                             const SynthConfig& cfg);

using RecordSink = std::function<void(const FluxRecord&, bool is_outlier)>;

/// Emits 12 records/hour for every sensorized segment over
/// [start_date, end_date), ordered by timestamp then segment id.
/// Deterministic given cfg.seed; per-segment streams are derived from
/// (seed, segment id) so segments could be generated independently.
void generate(const net::Network& net, const WeeklyProfile& profile, const SynthConfig& cfg,
              const RecordSink& sink);

struct GeneratedData {
  std::vector<FluxRecord> records;
  std::vector<std::size_t> outlier_indices;  // indices into records
};

GeneratedData generate_all(const net::Network& net, const WeeklyProfile& profile,
                           const SynthConfig& cfg);

/// Raw-data CSV: `timestamp,segment_id,count,velocity`, ISO-8601 timestamps.
void write_raw_csv_header(std::ostream& out);
void write_raw_csv_row(std::ostream& out, const FluxRecord& r);

}  // namespace fluxcast::synth

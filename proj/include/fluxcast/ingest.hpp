#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxcast/common.hpp"
#include "fluxcast/network.hpp"
#include "fluxcast/synth.hpp"
#include "fluxcast/timeutil.hpp"

namespace fluxcast::ingest {

/// One hour of raw 5-minute counts for one segment. m and sigma are the
/// mean and population standard deviation over the full raw window.
struct CleaningWindow {
  HourStamp hour_start = 0;
  SegmentId segment = 0;
  std::vector<double> raw_values;

  double m() const;
  double sigma() const;
};

/// Values v of the window with m - 3*sigma <= v <= m + 3*sigma, where m and
/// sigma come from the full raw window (single pass). Order preserved.
/// Throws InputError on an empty window.
std::vector<double> clean_window(const CleaningWindow& w);
std::vector<double> clean_values(const std::vector<double>& raw);

enum class Quality : std::uint8_t { Ok, Imputed, Missing };

std::string to_string(Quality q);
Quality quality_from_string(const std::string& s);

struct HourAggregate {
  double flux = 0.0;  // vehicles/hour; NaN when quality == Missing
  Quality quality = Quality::Missing;
};

/// flux = mean(retained) * n_expected. Quality: Ok when at least half of the
/// expected bins survived, Imputed when some did, Missing when none did.
HourAggregate aggregate_hour(const std::vector<double>& retained, int n_expected);

struct IngestConfig {
  int expected_per_hour = 12;
  double ok_threshold = 0.5;  // fraction of expected bins required for Ok
};

/// Cleaned hourly flux for one segment on a fixed calendar grid.
struct HourlySeries {
  SegmentId segment = 0;
  HourStamp t0 = 0;
  std::vector<double> values;
  std::vector<Quality> quality;

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
  HourRange range() const { return {t0, t0 + size()}; }
  bool covers(HourStamp h) const { return h >= t0 && h < t0 + size(); }
  double at(HourStamp h) const { return values[static_cast<std::size_t>(h - t0)]; }
  Quality quality_at(HourStamp h) const { return quality[static_cast<std::size_t>(h - t0)]; }
};

using SeriesMap = std::map<SegmentId, HourlySeries>;

struct IngestReport {
  std::uint64_t rows_read = 0;
  std::uint64_t rows_rejected = 0;
  std::uint64_t outliers_removed = 0;
  std::uint64_t hours_imputed = 0;
  std::vector<std::string> reject_samples;  // first few reasons, with line numbers

  nlohmann::json to_json() const;
};

/// Streaming accumulator: feed records ordered by timestamp (the raw CSV
/// order); out-of-order rows are rejected and counted. finish() interpolates
/// hours left Missing (linear between Ok neighbours, week-hour mean at the
/// boundaries) and flags them Imputed.
class SeriesBuilder {
 public:
  SeriesBuilder(const net::Network& net, HourRange range, IngestConfig cfg);

  void add(const synth::FluxRecord& rec);
  void reject(std::int64_t line_no, const std::string& reason);

  SeriesMap finish();
  const IngestReport& report() const { return report_; }

 private:
  void flush(std::size_t idx);

  const net::Network& net_;
  HourRange range_;
  IngestConfig cfg_;
  IngestReport report_;
  SeriesMap series_;
  std::map<SegmentId, std::size_t> index_;
  std::vector<HourStamp> open_hour_;
  std::vector<std::vector<double>> open_values_;
  std::vector<SegmentId> ids_;
  bool finished_ = false;
};

/// In-memory convenience over SeriesBuilder; accepts records in any order.
SeriesMap build_series(const std::vector<synth::FluxRecord>& records, const net::Network& net,
                       HourRange range, const IngestConfig& cfg = {},
                       IngestReport* report = nullptr);

/// Parses the raw CSV (`timestamp,segment_id,count,velocity`), rejecting
/// malformed rows with their line number in the report.
SeriesMap read_raw_csv(std::istream& in, const net::Network& net, HourRange range,
                       const IngestConfig& cfg, IngestReport& report);

/// Hourly matrix CSV: `timestamp,segment_id,flux,quality`.
void write_hourly_csv(std::ostream& out, const SeriesMap& series);
SeriesMap read_hourly_csv(std::istream& in);

}  // namespace fluxcast::ingest

#include "fluxcast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace fluxcast::ingest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMaxRejectSamples = 20;

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sigma_of(const std::vector<double>& v, double m) {
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

double CleaningWindow::m() const {
  if (raw_values.empty()) throw InputError("clean_window: empty window");
  return mean_of(raw_values);
}

double CleaningWindow::sigma() const {
  if (raw_values.empty()) throw InputError("clean_window: empty window");
  return sigma_of(raw_values, mean_of(raw_values));
}

std::vector<double> clean_values(const std::vector<double>& raw) {
  if (raw.empty()) throw InputError("clean_window: empty window");
  const double m = mean_of(raw);
  const double s = sigma_of(raw, m);
  const double lo = m - 3.0 * s;
  const double hi = m + 3.0 * s;
  std::vector<double> kept;
  kept.reserve(raw.size());
  for (double v : raw) {
    if (v >= lo && v <= hi) kept.push_back(v);
  }
  return kept;
}

std::vector<double> clean_window(const CleaningWindow& w) { return clean_values(w.raw_values); }

std::string to_string(Quality q) {
  switch (q) {
    case Quality::Ok: return "ok";
    case Quality::Imputed: return "imputed";
    case Quality::Missing: return "missing";
  }
  return "missing";
}

Quality quality_from_string(const std::string& s) {
  if (s == "ok") return Quality::Ok;
  if (s == "imputed") return Quality::Imputed;
  if (s == "missing") return Quality::Missing;
  throw ConfigError("unknown quality flag: " + s);
}

HourAggregate aggregate_hour(const std::vector<double>& retained, int n_expected) {
  HourAggregate out;
  if (retained.empty()) {
    out.flux = kNaN;
    out.quality = Quality::Missing;
    return out;
  }
  out.flux = mean_of(retained) * static_cast<double>(n_expected);
  const auto ok_min = static_cast<std::size_t>(std::ceil(0.5 * n_expected));
  out.quality = retained.size() >= ok_min ? Quality::Ok : Quality::Imputed;
  return out;
}

SeriesBuilder::SeriesBuilder(const net::Network& net, HourRange range, IngestConfig cfg)
    : net_(net), range_(range), cfg_(cfg) {
  if (range_.end < range_.begin) throw ConfigError("ingest: empty hour range");
  if (cfg_.expected_per_hour < 1) throw ConfigError("ingest.expected_per_hour must be >= 1");
  if (cfg_.ok_threshold <= 0.0 || cfg_.ok_threshold > 1.0)
    throw ConfigError("ingest.ok_threshold must be in (0, 1]");
  ids_ = net_.sensorized_ids();
  const auto n_hours = static_cast<std::size_t>(range_.hours());
  std::size_t idx = 0;
  for (SegmentId id : ids_) {
    HourlySeries s;
    s.segment = id;
    s.t0 = range_.begin;
    s.values.assign(n_hours, kNaN);
    s.quality.assign(n_hours, Quality::Missing);
    series_.emplace(id, std::move(s));
    index_[id] = idx++;
  }
  open_hour_.assign(ids_.size(), range_.begin - 1);
  open_values_.resize(ids_.size());
}

void SeriesBuilder::reject(std::int64_t line_no, const std::string& reason) {
  ++report_.rows_read;
  ++report_.rows_rejected;
  if (report_.reject_samples.size() < kMaxRejectSamples)
    report_.reject_samples.push_back("line " + std::to_string(line_no) + ": " + reason);
}

void SeriesBuilder::add(const synth::FluxRecord& rec) {
  ++report_.rows_read;
  auto fail = [&](const char* reason) {
    ++report_.rows_rejected;
    if (report_.reject_samples.size() < kMaxRejectSamples)
      report_.reject_samples.push_back(std::string("record at ") + iso_minute(rec.t_min) + ": " +
                                       reason);
  };
  auto it = index_.find(rec.segment);
  if (it == index_.end()) {
    fail("unknown or unsensorized segment");
    return;
  }
  if (rec.t_min % 5 != 0) {
    fail("timestamp off the 5-minute grid");
    return;
  }
  if (!(rec.count >= 0.0)) {  // also catches NaN
    fail("negative or non-finite count");
    return;
  }
  const HourStamp hour = rec.t_min >= 0 ? rec.t_min / 60 : (rec.t_min - 59) / 60;
  if (!range_.contains(hour)) {
    fail("timestamp outside ingest range");
    return;
  }
  const std::size_t idx = it->second;
  if (hour < open_hour_[idx]) {
    fail("out-of-order record");
    return;
  }
  if (hour > open_hour_[idx]) {
    flush(idx);
    open_hour_[idx] = hour;
  }
  open_values_[idx].push_back(rec.count);
}

void SeriesBuilder::flush(std::size_t idx) {
  auto& raw = open_values_[idx];
  if (raw.empty()) return;
  const auto kept = clean_values(raw);
  report_.outliers_removed += raw.size() - kept.size();
  const HourAggregate agg = aggregate_hour(kept, cfg_.expected_per_hour);
  auto& s = series_[ids_[idx]];
  const auto pos = static_cast<std::size_t>(open_hour_[idx] - range_.begin);
  s.values[pos] = agg.flux;
  s.quality[pos] = agg.quality;
  raw.clear();
}

SeriesMap SeriesBuilder::finish() {
  if (finished_) throw InputError("SeriesBuilder::finish called twice");
  finished_ = true;
  for (std::size_t i = 0; i < ids_.size(); ++i) flush(i);

  for (auto& [id, s] : series_) {
    const std::size_t n = s.values.size();
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < n; ++i) {
      if (s.quality[i] == Quality::Ok) ok.push_back(i);
    }
    // Week-hour means over Ok hours, for leading/trailing gaps.
    std::array<double, 168> wh_sum{};
    std::array<std::int64_t, 168> wh_cnt{};
    wh_sum.fill(0.0);
    wh_cnt.fill(0);
    double total = 0.0;
    for (std::size_t i : ok) {
      const int wh = week_hour(s.t0 + static_cast<std::int64_t>(i));
      wh_sum[static_cast<std::size_t>(wh)] += s.values[i];
      ++wh_cnt[static_cast<std::size_t>(wh)];
      total += s.values[i];
    }
    const double overall = ok.empty() ? 0.0 : total / static_cast<double>(ok.size());

    for (std::size_t i = 0; i < n; ++i) {
      if (s.quality[i] != Quality::Missing) continue;
      auto next = std::lower_bound(ok.begin(), ok.end(), i);
      const bool has_next = next != ok.end();
      const bool has_prev = next != ok.begin();
      if (has_prev && has_next) {
        const std::size_t a = *(next - 1);
        const std::size_t b = *next;
        const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
        s.values[i] = (1.0 - w) * s.values[a] + w * s.values[b];
        s.quality[i] = Quality::Imputed;
      } else if (!ok.empty()) {
        const int wh = week_hour(s.t0 + static_cast<std::int64_t>(i));
        const auto cnt = wh_cnt[static_cast<std::size_t>(wh)];
        s.values[i] = cnt > 0 ? wh_sum[static_cast<std::size_t>(wh)] / static_cast<double>(cnt)
                              : overall;
        s.quality[i] = Quality::Imputed;
      } else {
        s.values[i] = 0.0;  // segment produced no usable data at all
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (s.quality[i] == Quality::Imputed) ++report_.hours_imputed;
    }
  }
  return std::move(series_);
}

SeriesMap build_series(const std::vector<synth::FluxRecord>& records, const net::Network& net,
                       HourRange range, const IngestConfig& cfg, IngestReport* report) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].t_min != records[b].t_min) return records[a].t_min < records[b].t_min;
    return records[a].segment < records[b].segment;
  });
  SeriesBuilder builder(net, range, cfg);
  for (std::size_t i : order) builder.add(records[i]);
  SeriesMap out = builder.finish();
  if (report != nullptr) *report = builder.report();
  return out;
}

SeriesMap read_raw_csv(std::istream& in, const net::Network& net, HourRange range,
                       const IngestConfig& cfg, IngestReport& report) {
  SeriesBuilder builder(net, range, cfg);
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("timestamp", 0) == 0) continue;

    // timestamp,segment_id,count,velocity
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    const auto c3 = c2 == std::string::npos ? std::string::npos : line.find(',', c2 + 1);
    if (c3 == std::string::npos) {
      builder.reject(line_no, "expected 4 comma-separated fields");
      continue;
    }
    const auto ts = parse_iso_minute(std::string_view(line).substr(0, c1));
    if (!ts) {
      builder.reject(line_no, "bad timestamp");
      continue;
    }
    char* endp = nullptr;
    const std::string seg_s = line.substr(c1 + 1, c2 - c1 - 1);
    const unsigned long seg = std::strtoul(seg_s.c_str(), &endp, 10);
    if (seg_s.empty() || *endp != '\0') {
      builder.reject(line_no, "bad segment id");
      continue;
    }
    const std::string cnt_s = line.substr(c2 + 1, c3 - c2 - 1);
    const double count = std::strtod(cnt_s.c_str(), &endp);
    if (cnt_s.empty() || *endp != '\0') {
      builder.reject(line_no, "bad count");
      continue;
    }
    const std::string vel_s = line.substr(c3 + 1);
    const double velocity = std::strtod(vel_s.c_str(), &endp);
    if (vel_s.empty() || *endp != '\0') {
      builder.reject(line_no, "bad velocity");
      continue;
    }
    builder.add(synth::FluxRecord{*ts, static_cast<SegmentId>(seg), count, velocity});
  }
  SeriesMap out = builder.finish();
  report = builder.report();
  return out;
}

void write_hourly_csv(std::ostream& out, const SeriesMap& series) {
  out << "timestamp,segment_id,flux,quality\n";
  if (series.empty()) return;
  const HourRange r = series.begin()->second.range();
  char buf[64];
  for (HourStamp h = r.begin; h < r.end; ++h) {
    const std::string ts = iso_hour(h);
    for (const auto& [id, s] : series) {
      if (!s.covers(h)) continue;
      std::snprintf(buf, sizeof(buf), ",%u,%.17g,", id, s.at(h));
      out << ts << buf << to_string(s.quality_at(h)) << '\n';
    }
  }
}

SeriesMap read_hourly_csv(std::istream& in) {
  struct Row {
    HourStamp hour;
    double flux;
    Quality quality;
  };
  std::map<SegmentId, std::vector<Row>> rows;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("timestamp", 0) == 0) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    const auto c3 = c2 == std::string::npos ? std::string::npos : line.find(',', c2 + 1);
    if (c3 == std::string::npos)
      throw IoError("hourly csv line " + std::to_string(line_no) + ": expected 4 fields");
    const auto ts = parse_iso_minute(std::string_view(line).substr(0, c1));
    if (!ts || *ts % 60 != 0)
      throw IoError("hourly csv line " + std::to_string(line_no) + ": bad timestamp");
    char* endp = nullptr;
    const std::string seg_s = line.substr(c1 + 1, c2 - c1 - 1);
    const unsigned long seg = std::strtoul(seg_s.c_str(), &endp, 10);
    if (seg_s.empty() || *endp != '\0')
      throw IoError("hourly csv line " + std::to_string(line_no) + ": bad segment id");
    const std::string flux_s = line.substr(c2 + 1, c3 - c2 - 1);
    const double flux = std::strtod(flux_s.c_str(), &endp);
    if (flux_s.empty() || *endp != '\0')
      throw IoError("hourly csv line " + std::to_string(line_no) + ": bad flux");
    rows[static_cast<SegmentId>(seg)].push_back(
        Row{*ts / 60, flux, quality_from_string(line.substr(c3 + 1))});
  }
  SeriesMap out;
  for (auto& [id, rs] : rows) {
    std::sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.hour < b.hour; });
    HourlySeries s;
    s.segment = id;
    s.t0 = rs.front().hour;
    const auto n = static_cast<std::size_t>(rs.back().hour - rs.front().hour + 1);
    s.values.assign(n, kNaN);
    s.quality.assign(n, Quality::Missing);
    for (const Row& r : rs) {
      const auto i = static_cast<std::size_t>(r.hour - s.t0);
      s.values[i] = r.flux;
      s.quality[i] = r.quality;
    }
    out.emplace(id, std::move(s));
  }
  return out;
}

nlohmann::json IngestReport::to_json() const {
  return {{"rows_read", rows_read},
          {"rows_rejected", rows_rejected},
          {"outliers_removed", outliers_removed},
          {"hours_imputed", hours_imputed},
          {"reject_samples", reject_samples}};
}

}  // namespace fluxcast::ingest

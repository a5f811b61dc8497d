#include "fluxcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "fluxcast/rng.hpp"

namespace fluxcast::synth {

namespace {

constexpr double kLatentAr1 = 0.95;
constexpr double kAccessTiltAmp = 0.35;
// Tilt phase in hours per avenue, indexed by position in the sorted access
// road names. Two avenues peak incoming in the morning, one is reversed.
constexpr double kTiltPhase[3] = {1.0, 13.0, 0.0};

// Hand-shaped day slices (pre-normalization). Chosen so that local-maxima
// counting on hourly data is unambiguous: weekdays rise to 8 h, dip, peak at
// 14 h and 19 h; Friday trades evening for lunch; weekends peak at 13 h and
// 19 h; the global minimum sits at 3 h.
constexpr double kMonThu[24] = {0.30, 0.18, 0.11, 0.08, 0.10, 0.25, 0.55, 0.85,
                                1.00, 0.82, 0.70, 0.64, 0.72, 0.86, 0.95, 0.80,
                                0.70, 0.85, 1.05, 1.15, 0.80, 0.55, 0.45, 0.38};
constexpr double kFriday[24] = {0.30, 0.18, 0.11, 0.08, 0.10, 0.25, 0.55, 0.85,
                                1.00, 0.82, 0.70, 0.64, 0.78, 0.92, 1.10, 0.85,
                                0.72, 0.80, 0.88, 0.95, 0.68, 0.50, 0.42, 0.36};
constexpr double kWeekend[24] = {0.45, 0.30, 0.20, 0.13, 0.10, 0.12, 0.18, 0.28,
                                 0.40, 0.52, 0.62, 0.75, 0.88, 0.95, 0.88, 0.78,
                                 0.72, 0.78, 0.88, 0.98, 0.85, 0.68, 0.58, 0.50};

void validate(const net::Network& net, const SynthConfig& cfg) {
  if (net.segments().empty()) throw ConfigError("synth: network has no segments");
  if (!is_valid_date(cfg.start_date) || !is_valid_date(cfg.end_date))
    throw ConfigError("synth: invalid calendar date");
  if (days_from_civil(cfg.end_date) < days_from_civil(cfg.start_date))
    throw ConfigError("synth: end_date must be >= start_date");
  if (cfg.noise_rel_std < 0.0) throw ConfigError("synth.noise_rel_std must be >= 0");
  if (cfg.outlier_rate < 0.0 || cfg.outlier_rate > 1.0)
    throw ConfigError("synth.outlier_rate must be in [0, 1]");
  if (cfg.outlier_magnitude < 0.0) throw ConfigError("synth.outlier_magnitude must be >= 0");
  if (cfg.latent_factor_std < 0.0) throw ConfigError("synth.latent_factor_std must be >= 0");
  if (cfg.propagation_lag_h < 0) throw ConfigError("synth.propagation_lag_h must be >= 0");
}

}  // namespace

WeeklyProfile WeeklyProfile::standard() {
  WeeklyProfile p;
  p.hourly_shape.resize(168);
  for (int day = 0; day < 7; ++day) {
    const double* slice = kMonThu;
    if (day == 4) slice = kFriday;
    if (day >= 5) slice = kWeekend;
    for (int h = 0; h < 24; ++h) p.hourly_shape[day * 24 + h] = slice[h];
  }
  p.hourly_shape /= p.hourly_shape.mean();
  return p;
}

std::vector<ArrayX> access_tilt_deltas(const WeeklyProfile& profile, std::size_t n_avenues) {
  std::vector<ArrayX> deltas;
  deltas.reserve(n_avenues);
  for (std::size_t i = 0; i < n_avenues; ++i) {
    const double phase = kTiltPhase[i % 3] + static_cast<double>(i / 3);
    ArrayX d(168);
    for (int h = 0; h < 168; ++h) {
      const double hod = static_cast<double>(h % 24);
      d[h] = kAccessTiltAmp *
             std::cos(2.0 * std::numbers::pi * (hod - 8.0 - phase) / 24.0);
    }
    // Per-day projection: subtract the flux-weighted mean so each day's
    // incoming and outgoing totals coincide.
    for (int day = 0; day < 7; ++day) {
      double num = 0.0, den = 0.0;
      for (int h = 0; h < 24; ++h) {
        const int wh = day * 24 + h;
        num += profile.hourly_shape[wh] * d[wh];
        den += profile.hourly_shape[wh];
      }
      const double c = num / den;
      for (int h = 0; h < 24; ++h) d[day * 24 + h] -= c;
    }
    deltas.push_back(std::move(d));
  }
  return deltas;
}

InOutShapes incoming_outgoing_balance_target(const WeeklyProfile& profile,
                                             const SynthConfig& cfg) {
  (void)cfg;
  const auto deltas = access_tilt_deltas(profile, 3);
  InOutShapes out;
  out.incoming = ArrayX::Zero(168);
  out.outgoing = ArrayX::Zero(168);
  for (const auto& d : deltas) {
    out.incoming += profile.hourly_shape * (1.0 + d);
    out.outgoing += profile.hourly_shape * (1.0 - d);
  }
  return out;
}

void generate(const net::Network& net, const WeeklyProfile& profile, const SynthConfig& cfg,
              const RecordSink& sink) {
  validate(net, cfg);

  const HourStamp start_hour = hour_stamp(cfg.start_date);
  const std::int64_t n_hours =
      (days_from_civil(cfg.end_date) - days_from_civil(cfg.start_date)) * 24;
  if (n_hours == 0) return;

  // Shared city-activity factor, AR(1) over hours. Internal segments read it
  // propagation_lag_h hours behind the access roads.
  const int lag = cfg.propagation_lag_h;
  std::vector<double> latent(static_cast<std::size_t>(n_hours + lag), 0.0);
  if (cfg.latent_factor_std > 0.0) {
    Rng lrng(derive_seed(cfg.seed, "synth", "latent", 0));
    double l = lrng.normal(0.0, cfg.latent_factor_std);
    const double innov = cfg.latent_factor_std * std::sqrt(1.0 - kLatentAr1 * kLatentAr1);
    for (auto& v : latent) {
      v = l;
      l = kLatentAr1 * l + innov * lrng.normal();
    }
  }

  const auto deltas = access_tilt_deltas(profile, net.access_roads().size());

  struct SegmentPlan {
    SegmentId id;
    double scale;
    const ArrayX* delta;  // nullptr for internal segments
    double delta_sign;    // +1 incoming, -1 outgoing
    int lag;
    Rng rng;
  };
  std::vector<SegmentPlan> plans;
  {
    std::size_t avenue = 0;
    std::map<SegmentId, std::pair<std::size_t, double>> avenue_of;
    for (const auto& [name, ids] : net.access_roads()) {
      for (SegmentId id : ids) {
        const auto& seg = net.segment(id);
        const double sign = seg.direction == net::Direction::Outgoing ? -1.0 : 1.0;
        avenue_of[id] = {avenue, sign};
      }
      ++avenue;
    }
    for (const auto& seg : net.segments()) {
      if (!seg.sensorized) continue;
      SegmentPlan p{seg.id, seg.mean_scale, nullptr, 1.0, lag,
                    Rng(derive_seed(cfg.seed, "synth", "segment", seg.id))};
      if (auto it = avenue_of.find(seg.id); it != avenue_of.end()) {
        p.delta = &deltas[it->second.first];
        p.delta_sign = it->second.second;
        p.lag = 0;  // access roads lead the latent factor
      }
      plans.push_back(std::move(p));
    }
  }

  const double shape_max = profile.hourly_shape.maxCoeff() * (1.0 + kAccessTiltAmp * 2.0);
  const double window_outlier_p = std::min(1.0, 12.0 * cfg.outlier_rate);

  std::vector<int> outlier_slot(plans.size(), -1);
  FluxRecord rec;
  for (std::int64_t t = 0; t < n_hours; ++t) {
    const int wh = week_hour(start_hour + t);
    for (int s5 = 0; s5 < 12; ++s5) {
      rec.t_min = (start_hour + t) * 60 + 5 * s5;
      for (std::size_t si = 0; si < plans.size(); ++si) {
        SegmentPlan& p = plans[si];
        if (s5 == 0) {
          // One spike at most per (segment, hour): a second 5-sigma value in
          // the same window would mask the first from the 3-sigma filter.
          outlier_slot[si] = -1;
          if (cfg.outlier_rate > 0.0 && p.rng.uniform01() < window_outlier_p)
            outlier_slot[si] = static_cast<int>(p.rng.below(12));
        }
        double shape = profile.hourly_shape[wh];
        if (p.delta != nullptr) shape *= 1.0 + p.delta_sign * (*p.delta)[wh];
        const double mult = std::max(0.0, 1.0 + latent[static_cast<std::size_t>(t + lag - p.lag)]);
        const double lambda_hour = p.scale * shape * mult;
        double count = lambda_hour / 12.0;
        if (cfg.noise_rel_std > 0.0)
          count = std::max(0.0, count * (1.0 + p.rng.normal() * cfg.noise_rel_std));
        const bool is_outlier = s5 == outlier_slot[si];
        if (is_outlier) count *= cfg.outlier_magnitude;
        rec.segment = p.id;
        rec.count = count;
        rec.velocity = std::clamp(55.0 - 42.0 * (shape * mult / shape_max), 8.0, 55.0);
        sink(rec, is_outlier);
      }
    }
  }
}

GeneratedData generate_all(const net::Network& net, const WeeklyProfile& profile,
                           const SynthConfig& cfg) {
  GeneratedData data;
  generate(net, profile, cfg, [&](const FluxRecord& r, bool outlier) {
    if (outlier) data.outlier_indices.push_back(data.records.size());
    data.records.push_back(r);
  });
  return data;
}

void write_raw_csv_header(std::ostream& out) { out << "timestamp,segment_id,count,velocity\n"; }

void write_raw_csv_row(std::ostream& out, const FluxRecord& r) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), ",%u,%.17g,%.17g\n", r.segment, r.count, r.velocity);
  out << iso_minute(r.t_min) << buf;
}

}  // namespace fluxcast::synth

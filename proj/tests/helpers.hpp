#pragma once

#include <vector>

#include "fluxcast/ingest.hpp"
#include "fluxcast/network.hpp"
#include "fluxcast/synth.hpp"

namespace testutil {

using namespace fluxcast;

inline net::NetworkConfig tiny_city(std::size_t n, double side = 3000.0) {
  net::NetworkConfig cfg;
  cfg.n_segments = n;
  cfg.sensorized_fraction = 1.0;
  cfg.side_m = side;
  return cfg;
}

inline synth::SynthConfig quiet_synth(const CivilDate& start, const CivilDate& end,
                                      std::uint64_t seed = 9) {
  synth::SynthConfig cfg;
  cfg.start_date = start;
  cfg.end_date = end;
  cfg.noise_rel_std = 0.0;
  cfg.outlier_rate = 0.0;
  cfg.latent_factor_std = 0.0;
  cfg.seed = seed;
  return cfg;
}

/// Hand-built single-segment network (sensorized, internal).
inline net::Network one_segment_net(double mean_scale = 240.0) {
  net::RoadSegment s;
  s.id = 0;
  s.a = {0.0, 0.0};
  s.b = {100.0, 0.0};
  s.sensorized = true;
  s.mean_scale = mean_scale;
  return net::Network({s}, {});
}

/// Series with every hour Ok at a constant value, for n segments.
inline ingest::SeriesMap constant_series(const std::vector<SegmentId>& ids, HourRange range,
                                         double value) {
  ingest::SeriesMap out;
  for (SegmentId id : ids) {
    ingest::HourlySeries s;
    s.segment = id;
    s.t0 = range.begin;
    s.values.assign(static_cast<std::size_t>(range.hours()), value);
    s.quality.assign(static_cast<std::size_t>(range.hours()), ingest::Quality::Ok);
    out.emplace(id, std::move(s));
  }
  return out;
}

}  // namespace testutil

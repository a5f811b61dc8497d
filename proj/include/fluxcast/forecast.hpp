#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxcast/common.hpp"
#include "fluxcast/ingest.hpp"
#include "fluxcast/lstm.hpp"
#include "fluxcast/network.hpp"

namespace fluxcast::forecast {

enum class Coverage { TargetOnly, Nearby, All };

std::string to_string(Coverage c);
Coverage coverage_from_string(const std::string& s);

struct WindowConfig {
  int lookback_h = 5;            // L
  int horizon_h = 1;             // H
  Coverage coverage = Coverage::All;
  double radius_m = 1000.0;      // Nearby only
  SegmentId target = 0;

  void validate() const {
    if (lookback_h < 1) throw ConfigError("window.lookback_h must be >= 1");
    if (horizon_h < 1) throw ConfigError("window.horizon_h must be >= 1");
    if (radius_m < 0.0) throw ConfigError("window.radius_m must be >= 0");
  }
};

/// [start, end) hours covered by the dataset; samples whose target hour is
/// >= test_start form the held-out test set.
struct DataSplit {
  HourStamp start = 0;
  HourStamp test_start = 0;
  HourStamp end = 0;
};

/// Per-feature z-score statistics, fit on the training hours only.
struct Normalization {
  Vector feature_mean, feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;

  double normalize_target(double v) const { return (v - target_mean) / target_std; }
  double denormalize_target(double v) const { return v * target_std + target_mean; }
};

/// One training/evaluation sample. The window covers hours
/// [window_end - L, window_end); the (normalized) target is the target
/// segment's flux at window_end - 1 + H.
struct Sample {
  HourStamp window_end = 0;
  HourStamp target_hour = 0;
  Matrix window;            // F x L, normalized
  double target_norm = 0.0;
  double target_raw = 0.0;
  bool is_test = false;
};

struct WindowedDataset {
  WindowConfig wc;
  std::vector<SegmentId> feature_segments;  // ordered, defines rows of window
  Normalization norm;
  std::vector<Sample> samples;              // chronological, stride 1 hour

  std::size_t train_count() const;
  std::size_t test_count() const;

  /// Train samples converted for the optimizer.
  lstm::Dataset<Scalar> train_data() const;
};

/// Feature set per coverage paradigm: {target}, segments_within(radius), or
/// all sensorized segments. Samples cover every hour t in [start+L, end-H];
/// windows never span a Missing-quality hour of the target.
WindowedDataset build_dataset(const ingest::SeriesMap& series, const net::Network& net,
                              const WindowConfig& wc, const DataSplit& split);

/// A trained forecaster plus everything needed to run it standalone.
struct TrainedModel {
  lstm::Params<Scalar> params;
  Normalization norm;
  WindowConfig wc;
  std::vector<SegmentId> feature_segments;
};

TrainedModel train_model(const WindowedDataset& dataset, const lstm::HyperParams& hp,
                         std::uint64_t seed, lstm::TrainCurve* curve = nullptr);

/// Denormalized, non-negative flux estimate for the target at hour
/// t - 1 + H, from the window [t - L, t). Throws RangeError when history is
/// short and ShapeError when the model does not match wc.
double predict(const TrainedModel& model, const ingest::SeriesMap& series,
               const WindowConfig& wc, HourStamp t);

struct HourForecast {
  HourStamp target_hour = 0;
  double truth = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> members;
};

struct ForecastRun {
  WindowConfig wc;
  lstm::HyperParams hp;
  std::vector<std::uint64_t> member_seeds;
  std::vector<HourForecast> hours;          // one per test hour
  std::vector<lstm::TrainCurve> curves;     // one per member

  std::vector<double> truth_series() const;
  std::vector<double> mean_series() const;
};

/// Trains ensemble_size models with seeds base_seed .. base_seed+n-1 on the
/// train samples and predicts every test hour; mean/std are across members.
ForecastRun run_ensemble(const WindowedDataset& dataset, const lstm::HyperParams& hp,
                         int ensemble_size, std::uint64_t base_seed, int jobs = 1);

ForecastRun run_ensemble_with_seeds(const WindowedDataset& dataset, const lstm::HyperParams& hp,
                                    const std::vector<std::uint64_t>& seeds, int jobs = 1);

/// Lag in [-3, 3] maximizing the cross-correlation between predictions and
/// truth; +1 means the predictions trail the truth by one hour. Requires at
/// least 24 aligned points.
int shift_diagnostic(const std::vector<double>& predictions, const std::vector<double>& truth);

nlohmann::json run_to_json(const ForecastRun& run);
ForecastRun run_from_json(const nlohmann::json& j);
void write_forecast_csv(std::ostream& out, const ForecastRun& run);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace fluxcast::forecast

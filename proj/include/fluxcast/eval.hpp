#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxcast/common.hpp"
#include "fluxcast/forecast.hpp"
#include "fluxcast/ingest.hpp"
#include "fluxcast/network.hpp"

namespace fluxcast::eval {

/// sqrt(mean((pred - truth)^2)); throws ShapeError on mismatch or empty.
double rmse(const std::vector<double>& pred, const std::vector<double>& truth);

struct EvaluationReport {
  double global_rmse = 0.0;
  double relative_error = 0.0;                    // global_rmse / mean truth
  std::map<std::int64_t, double> per_day_rmse;    // key: days since epoch
  std::map<std::int64_t, double> per_day_mean_flux;
  std::map<std::int64_t, std::int64_t> per_day_count;
  std::map<std::string, double> baseline_rmse;

  nlohmann::json to_json() const;
};

/// Naive baselines for each hour in [test.begin, test.end):
///   persistence     flux(t+H) = flux(t)      (last observed value)
///   seasonal-naive  flux(t+H) = flux(t+H-168)
std::map<std::string, std::vector<double>> baselines(const ingest::SeriesMap& series,
                                                     const forecast::WindowConfig& wc,
                                                     HourRange test);

/// Report for a finished run: global and per-day RMSE of the ensemble mean,
/// plus baseline RMSE over the same hours.
EvaluationReport evaluate_run(const forecast::ForecastRun& run, const ingest::SeriesMap& series);

struct GridSpec {
  std::vector<forecast::Coverage> coverages;
  std::vector<int> lookbacks;
  std::vector<int> horizons;
  std::vector<std::uint64_t> base_seeds;
  int ensemble_size = 1;
};

struct GridCell {
  forecast::Coverage coverage;
  int lookback_h = 0;
  int horizon_h = 0;
  std::uint64_t base_seed = 0;
  forecast::ForecastRun run;
  EvaluationReport report;
};

/// One run (and report) per (coverage, L, H) x base_seed combination.
std::vector<GridCell> comparison_grid(const ingest::SeriesMap& series, const net::Network& net,
                                      SegmentId target, const GridSpec& grid,
                                      const lstm::HyperParams& hp,
                                      const forecast::DataSplit& split, int jobs = 1);

double median(std::vector<double> v);

/// Median global RMSE over base seeds for one (coverage, L, H) combination.
double grid_median_rmse(const std::vector<GridCell>& cells, forecast::Coverage c, int L, int H);

/// Consolidated table: `coverage,lookback_h,horizon_h,day,rmse,mean_flux,rel_error`
/// with per-day values aggregated as the median over base seeds.
void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells);
nlohmann::json grid_to_json(const std::vector<GridCell>& cells);

}  // namespace fluxcast::eval

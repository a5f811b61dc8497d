#include "fluxcast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "fluxcast/timeutil.hpp"

namespace fluxcast::eval {

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw ShapeError("rmse: series must have equal nonzero length");
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

namespace {

std::vector<double> baseline_at_hours(const ingest::HourlySeries& s,
                                      const std::vector<HourStamp>& hours, std::int64_t back,
                                      const char* name) {
  std::vector<double> out;
  out.reserve(hours.size());
  for (HourStamp tau : hours) {
    if (!s.covers(tau - back))
      throw RangeError(std::string(name) + " baseline: no history at " + iso_hour(tau - back));
    out.push_back(s.at(tau - back));
  }
  return out;
}

std::map<std::string, std::vector<double>> baselines_at_hours(const ingest::SeriesMap& series,
                                                              const forecast::WindowConfig& wc,
                                                              const std::vector<HourStamp>& hours) {
  auto it = series.find(wc.target);
  if (it == series.end())
    throw RangeError("baselines: no series for target " + std::to_string(wc.target));
  std::map<std::string, std::vector<double>> out;
  out["persistence"] = baseline_at_hours(it->second, hours, wc.horizon_h, "persistence");
  out["seasonal-naive"] = baseline_at_hours(it->second, hours, 168, "seasonal-naive");
  return out;
}

}  // namespace

std::map<std::string, std::vector<double>> baselines(const ingest::SeriesMap& series,
                                                     const forecast::WindowConfig& wc,
                                                     HourRange test) {
  if (test.hours() < 1) throw RangeError("baselines: empty test range");
  std::vector<HourStamp> hours;
  for (HourStamp h = test.begin; h < test.end; ++h) hours.push_back(h);
  return baselines_at_hours(series, wc, hours);
}

EvaluationReport evaluate_run(const forecast::ForecastRun& run, const ingest::SeriesMap& series) {
  if (run.hours.empty()) throw InputError("evaluate_run: run has no forecast hours");
  EvaluationReport rep;

  const std::vector<double> truth = run.truth_series();
  const std::vector<double> mean = run.mean_series();
  rep.global_rmse = rmse(mean, truth);

  double truth_sum = 0.0;
  for (double v : truth) truth_sum += v;
  const double truth_mean = truth_sum / static_cast<double>(truth.size());
  rep.relative_error = truth_mean > 0.0 ? rep.global_rmse / truth_mean : 0.0;

  std::map<std::int64_t, double> day_ss, day_sum;
  for (const auto& h : run.hours) {
    const std::int64_t day = days_from_civil(date_of_hour(h.target_hour));
    const double d = h.mean - h.truth;
    day_ss[day] += d * d;
    day_sum[day] += h.truth;
    rep.per_day_count[day] += 1;
  }
  for (const auto& [day, ss] : day_ss) {
    const auto n = static_cast<double>(rep.per_day_count[day]);
    rep.per_day_rmse[day] = std::sqrt(ss / n);
    rep.per_day_mean_flux[day] = day_sum[day] / n;
  }

  std::vector<HourStamp> hours;
  for (const auto& h : run.hours) hours.push_back(h.target_hour);
  for (const auto& [name, preds] : baselines_at_hours(series, run.wc, hours))
    rep.baseline_rmse[name] = rmse(preds, truth);
  return rep;
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json days = nlohmann::json::array();
  for (const auto& [day, r] : per_day_rmse) {
    days.push_back({{"day", iso_date(civil_from_days(day))},
                    {"rmse", r},
                    {"mean_flux", per_day_mean_flux.at(day)},
                    {"hours", per_day_count.at(day)}});
  }
  return {{"global_rmse", global_rmse},
          {"relative_error", relative_error},
          {"per_day", days},
          {"baseline_rmse", baseline_rmse}};
}

std::vector<GridCell> comparison_grid(const ingest::SeriesMap& series, const net::Network& net,
                                      SegmentId target, const GridSpec& grid,
                                      const lstm::HyperParams& hp,
                                      const forecast::DataSplit& split, int jobs) {
  if (grid.coverages.empty() || grid.lookbacks.empty() || grid.horizons.empty() ||
      grid.base_seeds.empty())
    throw ConfigError("comparison_grid: grid must be nonempty");
  if (grid.ensemble_size < 1) throw ConfigError("comparison_grid: ensemble_size must be >= 1");

  struct CellSpec {
    forecast::Coverage c;
    int L, H;
    std::size_t dataset_idx;
  };
  std::vector<CellSpec> specs;
  std::vector<forecast::WindowedDataset> datasets;
  for (forecast::Coverage c : grid.coverages) {
    for (int L : grid.lookbacks) {
      for (int H : grid.horizons) {
        forecast::WindowConfig wc;
        wc.coverage = c;
        wc.lookback_h = L;
        wc.horizon_h = H;
        wc.target = target;
        datasets.push_back(forecast::build_dataset(series, net, wc, split));
        specs.push_back(CellSpec{c, L, H, datasets.size() - 1});
      }
    }
  }

  std::vector<GridCell> cells(specs.size() * grid.base_seeds.size());
  parallel_for(cells.size(), jobs, [&](std::size_t k) {
    const CellSpec& spec = specs[k / grid.base_seeds.size()];
    const std::uint64_t seed = grid.base_seeds[k % grid.base_seeds.size()];
    GridCell& cell = cells[k];
    cell.coverage = spec.c;
    cell.lookback_h = spec.L;
    cell.horizon_h = spec.H;
    cell.base_seed = seed;
    cell.run = forecast::run_ensemble(datasets[spec.dataset_idx], hp, grid.ensemble_size, seed, 1);
    cell.report = evaluate_run(cell.run, series);
  });
  return cells;
}

double median(std::vector<double> v) {
  if (v.empty()) throw InputError("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double grid_median_rmse(const std::vector<GridCell>& cells, forecast::Coverage c, int L, int H) {
  std::vector<double> r;
  for (const auto& cell : cells) {
    if (cell.coverage == c && cell.lookback_h == L && cell.horizon_h == H)
      r.push_back(cell.report.global_rmse);
  }
  return median(std::move(r));
}

void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells) {
  out << "coverage,lookback_h,horizon_h,day,rmse,mean_flux,rel_error\n";
  // group cells by (coverage, L, H); aggregate per-day values as the median
  // over base seeds
  std::set<std::tuple<int, int, int>> combos;
  for (const auto& c : cells)
    combos.insert({static_cast<int>(c.coverage), c.lookback_h, c.horizon_h});
  char buf[160];
  for (const auto& [cov, L, H] : combos) {
    std::set<std::int64_t> days;
    for (const auto& c : cells) {
      if (static_cast<int>(c.coverage) != cov || c.lookback_h != L || c.horizon_h != H) continue;
      for (const auto& [day, r] : c.report.per_day_rmse) days.insert(day);
    }
    for (std::int64_t day : days) {
      std::vector<double> rs, fs;
      for (const auto& c : cells) {
        if (static_cast<int>(c.coverage) != cov || c.lookback_h != L || c.horizon_h != H) continue;
        auto it = c.report.per_day_rmse.find(day);
        if (it == c.report.per_day_rmse.end()) continue;
        rs.push_back(it->second);
        fs.push_back(c.report.per_day_mean_flux.at(day));
      }
      const double r = median(rs);
      const double f = median(fs);
      std::snprintf(buf, sizeof(buf), "%s,%d,%d,%s,%.17g,%.17g,%.17g\n",
                    to_string(static_cast<forecast::Coverage>(cov)).c_str(), L, H,
                    iso_date(civil_from_days(day)).c_str(), r, f, f > 0.0 ? r / f : 0.0);
      out << buf;
    }
  }
}

nlohmann::json grid_to_json(const std::vector<GridCell>& cells) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cells) {
    arr.push_back({{"coverage", to_string(c.coverage)},
                   {"lookback_h", c.lookback_h},
                   {"horizon_h", c.horizon_h},
                   {"base_seed", c.base_seed},
                   {"report", c.report.to_json()}});
  }
  nlohmann::json medians = nlohmann::json::array();
  std::set<std::tuple<int, int, int>> combos;
  for (const auto& c : cells)
    combos.insert({static_cast<int>(c.coverage), c.lookback_h, c.horizon_h});
  for (const auto& [cov, L, H] : combos) {
    medians.push_back(
        {{"coverage", to_string(static_cast<forecast::Coverage>(cov))},
         {"lookback_h", L},
         {"horizon_h", H},
         {"median_rmse",
          grid_median_rmse(cells, static_cast<forecast::Coverage>(cov), L, H)}});
  }
  return {{"cells", arr}, {"medians", medians}};
}

}  // namespace fluxcast::eval

#include "fluxcast/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "fluxcast/rng.hpp"

namespace fluxcast::forecast {

std::string to_string(Coverage c) {
  switch (c) {
    case Coverage::TargetOnly: return "target_only";
    case Coverage::Nearby: return "nearby";
    case Coverage::All: return "all";
  }
  return "all";
}

Coverage coverage_from_string(const std::string& s) {
  if (s == "target_only") return Coverage::TargetOnly;
  if (s == "nearby") return Coverage::Nearby;
  if (s == "all") return Coverage::All;
  throw ConfigError("unknown coverage paradigm: " + s + " (expected target_only|nearby|all)");
}

std::size_t WindowedDataset::train_count() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.is_test ? 0 : 1;
  return n;
}

std::size_t WindowedDataset::test_count() const { return samples.size() - train_count(); }

lstm::Dataset<Scalar> WindowedDataset::train_data() const {
  lstm::Dataset<Scalar> out;
  std::size_t n = train_count();
  out.windows.reserve(n);
  out.targets.resize(1, static_cast<Eigen::Index>(n));
  Eigen::Index col = 0;
  for (const auto& s : samples) {
    if (s.is_test) continue;
    out.windows.push_back(s.window);
    out.targets(0, col++) = s.target_norm;
  }
  return out;
}

WindowedDataset build_dataset(const ingest::SeriesMap& series, const net::Network& net,
                              const WindowConfig& wc, const DataSplit& split) {
  wc.validate();
  if (!net.contains(wc.target) || !net.segment(wc.target).sensorized)
    throw ConfigError("window.target " + std::to_string(wc.target) +
                      " is not a sensorized segment");
  if (split.start > split.test_start || split.test_start > split.end)
    throw ConfigError("dataset split must satisfy start <= test_start <= end");

  WindowedDataset ds;
  ds.wc = wc;
  switch (wc.coverage) {
    case Coverage::TargetOnly:
      ds.feature_segments = {wc.target};
      break;
    case Coverage::Nearby:
      ds.feature_segments = net::segments_within(net, wc.target, wc.radius_m);
      break;
    case Coverage::All:
      ds.feature_segments = net.sensorized_ids();
      break;
  }
  if (ds.feature_segments.empty())
    throw ConfigError("dataset has no feature segments");

  std::vector<const ingest::HourlySeries*> feats;
  for (SegmentId id : ds.feature_segments) {
    auto it = series.find(id);
    if (it == series.end())
      throw RangeError("no hourly series for feature segment " + std::to_string(id));
    if (split.start < it->second.t0 || split.end > it->second.t0 + it->second.size())
      throw RangeError("dataset range outside series coverage of segment " + std::to_string(id));
    feats.push_back(&it->second);
  }
  const ingest::HourlySeries& target_series = *feats[static_cast<std::size_t>(
      std::find(ds.feature_segments.begin(), ds.feature_segments.end(), wc.target) -
      ds.feature_segments.begin())];

  // z-score statistics over the training hours only
  const auto F = static_cast<Eigen::Index>(ds.feature_segments.size());
  const std::int64_t train_hours = split.test_start - split.start;
  if (train_hours < 1) throw ConfigError("dataset has no training hours");
  ds.norm.feature_mean = Vector::Zero(F);
  ds.norm.feature_std = Vector::Ones(F);
  for (Eigen::Index fi = 0; fi < F; ++fi) {
    const auto* s = feats[static_cast<std::size_t>(fi)];
    double sum = 0.0;
    for (HourStamp h = split.start; h < split.test_start; ++h) sum += s->at(h);
    const double mean = sum / static_cast<double>(train_hours);
    double ss = 0.0;
    for (HourStamp h = split.start; h < split.test_start; ++h) {
      const double d = s->at(h) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(train_hours));
    ds.norm.feature_mean[fi] = mean;
    ds.norm.feature_std[fi] = sd > 0.0 ? sd : 1.0;
    if (ds.feature_segments[static_cast<std::size_t>(fi)] == wc.target) {
      ds.norm.target_mean = mean;
      ds.norm.target_std = sd > 0.0 ? sd : 1.0;
    }
  }

  const int L = wc.lookback_h;
  const int H = wc.horizon_h;
  for (HourStamp t = split.start + L; t <= split.end - H; ++t) {
    const HourStamp target_hour = t - 1 + H;
    bool blocked = false;
    for (HourStamp h = t - L; h <= t - 1 && !blocked; ++h)
      blocked = target_series.quality_at(h) == ingest::Quality::Missing;
    blocked = blocked || target_series.quality_at(target_hour) == ingest::Quality::Missing;
    if (blocked) continue;

    Sample smp;
    smp.window_end = t;
    smp.target_hour = target_hour;
    smp.window.resize(F, L);
    for (Eigen::Index fi = 0; fi < F; ++fi) {
      const auto* s = feats[static_cast<std::size_t>(fi)];
      for (int k = 0; k < L; ++k)
        smp.window(fi, k) =
            (s->at(t - L + k) - ds.norm.feature_mean[fi]) / ds.norm.feature_std[fi];
    }
    smp.target_raw = target_series.at(target_hour);
    smp.target_norm = ds.norm.normalize_target(smp.target_raw);
    smp.is_test = target_hour >= split.test_start;
    ds.samples.push_back(std::move(smp));
  }
  return ds;
}

TrainedModel train_model(const WindowedDataset& dataset, const lstm::HyperParams& hp,
                         std::uint64_t seed, lstm::TrainCurve* curve) {
  const lstm::Dataset<Scalar> data = dataset.train_data();
  auto [params, c] = lstm::train(data, hp, seed);
  if (curve != nullptr) *curve = std::move(c);
  return TrainedModel{std::move(params), dataset.norm, dataset.wc, dataset.feature_segments};
}

double predict(const TrainedModel& model, const ingest::SeriesMap& series,
               const WindowConfig& wc, HourStamp t) {
  if (wc.lookback_h != model.wc.lookback_h || wc.horizon_h != model.wc.horizon_h ||
      wc.target != model.wc.target)
    throw ConfigError("predict: window config does not match the trained model");
  const int L = wc.lookback_h;
  const auto F = static_cast<Eigen::Index>(model.feature_segments.size());
  Matrix window(F, L);
  for (Eigen::Index fi = 0; fi < F; ++fi) {
    const SegmentId id = model.feature_segments[static_cast<std::size_t>(fi)];
    auto it = series.find(id);
    if (it == series.end()) throw RangeError("predict: no series for segment " + std::to_string(id));
    const auto& s = it->second;
    if (t - L < s.t0 || t > s.t0 + s.size())
      throw RangeError("predict: window [" + iso_hour(t - L) + ", " + iso_hour(t) +
                       ") outside available history");
    for (int k = 0; k < L; ++k)
      window(fi, k) =
          (s.at(t - L + k) - model.norm.feature_mean[fi]) / model.norm.feature_std[fi];
  }
  std::vector<Matrix> xs(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k) xs[static_cast<std::size_t>(k)] = window.col(k);
  const Matrix y = lstm::forward_batch<Scalar>(model.params, xs, nullptr);
  return std::max(0.0, model.norm.denormalize_target(y(0, 0)));
}

namespace {

/// Denormalized, clamped member predictions for every test sample.
std::vector<double> member_predictions(const WindowedDataset& dataset,
                                       const lstm::Params<Scalar>& params) {
  std::vector<const Sample*> test;
  for (const auto& s : dataset.samples) {
    if (s.is_test) test.push_back(&s);
  }
  std::vector<double> out(test.size(), 0.0);
  if (test.empty()) return out;
  const Eigen::Index L = test.front()->window.cols();
  const Eigen::Index F = test.front()->window.rows();
  const std::size_t chunk = 2048;
  std::vector<Matrix> xs(static_cast<std::size_t>(L));
  for (std::size_t base = 0; base < test.size(); base += chunk) {
    const auto b = static_cast<Eigen::Index>(std::min(chunk, test.size() - base));
    for (Eigen::Index k = 0; k < L; ++k) xs[static_cast<std::size_t>(k)].resize(F, b);
    for (Eigen::Index col = 0; col < b; ++col) {
      const auto& w = test[base + static_cast<std::size_t>(col)]->window;
      for (Eigen::Index k = 0; k < L; ++k) xs[static_cast<std::size_t>(k)].col(col) = w.col(k);
    }
    const Matrix y = lstm::forward_batch<Scalar>(params, xs, nullptr);
    for (Eigen::Index col = 0; col < b; ++col)
      out[base + static_cast<std::size_t>(col)] =
          std::max(0.0, dataset.norm.denormalize_target(y(0, col)));
  }
  return out;
}

}  // namespace

ForecastRun run_ensemble_with_seeds(const WindowedDataset& dataset, const lstm::HyperParams& hp,
                                    const std::vector<std::uint64_t>& seeds, int jobs) {
  if (seeds.empty()) throw ConfigError("run_ensemble: ensemble_size must be >= 1");
  if (dataset.test_count() == 0) throw ConfigError("run_ensemble: dataset has no test samples");

  ForecastRun run;
  run.wc = dataset.wc;
  run.hp = hp;
  run.member_seeds = seeds;
  run.curves.resize(seeds.size());

  std::vector<std::vector<double>> preds(seeds.size());
  std::vector<lstm::Params<Scalar>> params(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t m) {
    try {
      lstm::TrainCurve curve;
      const TrainedModel model = train_model(dataset, hp, seeds[m], &curve);
      run.curves[m] = std::move(curve);
      params[m] = model.params;
      preds[m] = member_predictions(dataset, model.params);
    } catch (const NumericError& e) {
      throw NumericError("ensemble member " + std::to_string(m) + ": " + e.what());
    }
  });

  std::size_t k = 0;
  for (const auto& s : dataset.samples) {
    if (!s.is_test) continue;
    HourForecast hf;
    hf.target_hour = s.target_hour;
    hf.truth = s.target_raw;
    hf.members.reserve(seeds.size());
    for (std::size_t m = 0; m < seeds.size(); ++m) hf.members.push_back(preds[m][k]);
    // provisional-mean accumulation: identical members give exactly zero std
    const double pivot = hf.members.front();
    double acc = 0.0;
    for (double v : hf.members) acc += v - pivot;
    hf.mean = pivot + acc / static_cast<double>(seeds.size());
    double ss = 0.0;
    for (double v : hf.members) ss += (v - hf.mean) * (v - hf.mean);
    hf.stddev = std::sqrt(ss / static_cast<double>(seeds.size()));
    run.hours.push_back(std::move(hf));
    ++k;
  }
  return run;
}

ForecastRun run_ensemble(const WindowedDataset& dataset, const lstm::HyperParams& hp,
                         int ensemble_size, std::uint64_t base_seed, int jobs) {
  if (ensemble_size < 1) throw ConfigError("run_ensemble: ensemble_size must be >= 1");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(ensemble_size));
  for (std::size_t m = 0; m < seeds.size(); ++m)
    seeds[m] = base_seed + static_cast<std::uint64_t>(m);
  return run_ensemble_with_seeds(dataset, hp, seeds, jobs);
}

std::vector<double> ForecastRun::truth_series() const {
  std::vector<double> out;
  out.reserve(hours.size());
  for (const auto& h : hours) out.push_back(h.truth);
  return out;
}

std::vector<double> ForecastRun::mean_series() const {
  std::vector<double> out;
  out.reserve(hours.size());
  for (const auto& h : hours) out.push_back(h.mean);
  return out;
}

int shift_diagnostic(const std::vector<double>& predictions, const std::vector<double>& truth) {
  if (predictions.size() != truth.size())
    throw ShapeError("shift_diagnostic: length mismatch");
  const auto n = static_cast<std::int64_t>(predictions.size());
  if (n < 24) throw InputError("shift_diagnostic: need at least 24 aligned hours");

  // Scan order prefers the smaller |lag| on ties, with 0 first.
  static const int kLags[7] = {0, 1, -1, 2, -2, 3, -3};
  int best_lag = 0;
  double best = -2.0;
  for (int lag : kLags) {
    const std::int64_t lo = std::max<std::int64_t>(0, lag);
    const std::int64_t hi = n + std::min<std::int64_t>(0, lag);
    const auto m = static_cast<double>(hi - lo);
    double pm = 0.0, tm = 0.0;
    for (std::int64_t idx = lo; idx < hi; ++idx) {
      pm += predictions[static_cast<std::size_t>(idx)];
      tm += truth[static_cast<std::size_t>(idx - lag)];
    }
    pm /= m;
    tm /= m;
    double num = 0.0, dp = 0.0, dt = 0.0;
    for (std::int64_t idx = lo; idx < hi; ++idx) {
      const double a = predictions[static_cast<std::size_t>(idx)] - pm;
      const double b = truth[static_cast<std::size_t>(idx - lag)] - tm;
      num += a * b;
      dp += a * a;
      dt += b * b;
    }
    const double denom = std::sqrt(dp * dt);
    const double corr = denom > 0.0 ? num / denom : 0.0;
    if (corr > best) {
      best = corr;
      best_lag = lag;
    }
  }
  return best_lag;
}

nlohmann::json run_to_json(const ForecastRun& run) {
  nlohmann::json hours = nlohmann::json::array();
  for (const auto& h : run.hours) {
    hours.push_back({{"timestamp", iso_hour(h.target_hour)},
                     {"truth", h.truth},
                     {"mean", h.mean},
                     {"std", h.stddev},
                     {"members", h.members}});
  }
  return {{"config",
           {{"lookback_h", run.wc.lookback_h},
            {"horizon_h", run.wc.horizon_h},
            {"coverage", to_string(run.wc.coverage)},
            {"radius_m", run.wc.radius_m},
            {"target", run.wc.target},
            {"hidden_dim", run.hp.hidden_dim},
            {"epochs", run.hp.epochs},
            {"batch_size", run.hp.batch_size},
            {"learning_rate", run.hp.learning_rate},
            {"ensemble_size", run.member_seeds.size()},
            {"member_seeds", run.member_seeds}}},
          {"hours", hours}};
}

ForecastRun run_from_json(const nlohmann::json& j) {
  ForecastRun run;
  const auto& c = j.at("config");
  run.wc.lookback_h = c.at("lookback_h").get<int>();
  run.wc.horizon_h = c.at("horizon_h").get<int>();
  run.wc.coverage = coverage_from_string(c.at("coverage").get<std::string>());
  run.wc.radius_m = c.at("radius_m").get<double>();
  run.wc.target = c.at("target").get<SegmentId>();
  run.hp.hidden_dim = c.at("hidden_dim").get<Eigen::Index>();
  run.hp.epochs = c.at("epochs").get<int>();
  run.hp.batch_size = c.at("batch_size").get<int>();
  run.hp.learning_rate = c.at("learning_rate").get<double>();
  run.member_seeds = c.at("member_seeds").get<std::vector<std::uint64_t>>();
  for (const auto& e : j.at("hours")) {
    HourForecast hf;
    const auto ts = parse_iso_minute(e.at("timestamp").get<std::string>());
    if (!ts || *ts % 60 != 0) throw IoError("forecast run: bad hour timestamp");
    hf.target_hour = *ts / 60;
    hf.truth = e.at("truth").get<double>();
    hf.mean = e.at("mean").get<double>();
    hf.stddev = e.at("std").get<double>();
    hf.members = e.at("members").get<std::vector<double>>();
    run.hours.push_back(std::move(hf));
  }
  return run;
}

void write_forecast_csv(std::ostream& out, const ForecastRun& run) {
  out << "timestamp,truth,mean,std\n";
  char buf[128];
  for (const auto& h : run.hours) {
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g\n", h.truth, h.mean, h.stddev);
    out << iso_hour(h.target_hour) << buf;
  }
}

nlohmann::json model_to_json(const TrainedModel& model) {
  nlohmann::json j = lstm::params_to_json(model.params);
  j["format"] = "fluxcast-model-v1";
  nlohmann::json fm = nlohmann::json::array();
  nlohmann::json fs = nlohmann::json::array();
  for (Eigen::Index k = 0; k < model.norm.feature_mean.size(); ++k) {
    fm.push_back(model.norm.feature_mean[k]);
    fs.push_back(model.norm.feature_std[k]);
  }
  j["normalization"] = {{"feature_mean", fm},
                        {"feature_std", fs},
                        {"target_mean", model.norm.target_mean},
                        {"target_std", model.norm.target_std}};
  j["window"] = {{"lookback_h", model.wc.lookback_h},
                 {"horizon_h", model.wc.horizon_h},
                 {"coverage", to_string(model.wc.coverage)},
                 {"radius_m", model.wc.radius_m},
                 {"target", model.wc.target}};
  j["feature_segments"] = model.feature_segments;
  return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
  TrainedModel m;
  m.params = lstm::params_from_json(j);
  const auto& n = j.at("normalization");
  const auto fm = n.at("feature_mean").get<std::vector<double>>();
  const auto fs = n.at("feature_std").get<std::vector<double>>();
  m.norm.feature_mean = Eigen::Map<const Vector>(fm.data(), static_cast<Eigen::Index>(fm.size()));
  m.norm.feature_std = Eigen::Map<const Vector>(fs.data(), static_cast<Eigen::Index>(fs.size()));
  m.norm.target_mean = n.at("target_mean").get<double>();
  m.norm.target_std = n.at("target_std").get<double>();
  const auto& w = j.at("window");
  m.wc.lookback_h = w.at("lookback_h").get<int>();
  m.wc.horizon_h = w.at("horizon_h").get<int>();
  m.wc.coverage = coverage_from_string(w.at("coverage").get<std::string>());
  m.wc.radius_m = w.at("radius_m").get<double>();
  m.wc.target = w.at("target").get<SegmentId>();
  m.feature_segments = j.at("feature_segments").get<std::vector<SegmentId>>();
  if (static_cast<Eigen::Index>(m.feature_segments.size()) != m.params.input_dim)
    throw IoError("model checkpoint: feature list does not match input_dim");
  return m;
}

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << model_to_json(model).dump() << '\n';
  if (!out) throw IoError("failed writing " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid model JSON in " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace fluxcast::forecast

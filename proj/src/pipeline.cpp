#include "fluxcast/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "fluxcast/analytics.hpp"
#include "fluxcast/rng.hpp"

namespace fluxcast::cli {

namespace fs = std::filesystem;

Stage stage_from_string(const std::string& s) {
  if (s == "generate") return Stage::Generate;
  if (s == "ingest") return Stage::Ingest;
  if (s == "analytics" || s == "analyze") return Stage::Analytics;
  if (s == "train") return Stage::Train;
  if (s == "forecast") return Stage::Forecast;
  if (s == "evaluate") return Stage::Evaluate;
  throw ConfigError("unknown stage '" + s + "'");
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Generate: return "generate";
    case Stage::Ingest: return "ingest";
    case Stage::Analytics: return "analytics";
    case Stage::Train: return "train";
    case Stage::Forecast: return "forecast";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

void log_info(const std::string& kv) { std::cerr << "INFO " << kv << '\n'; }
void log_warn(const std::string& kv) { std::cerr << "WARN " << kv << '\n'; }

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
}

std::ofstream open_artifact(const RunConfig& cfg, PipelineContext& ctx, const std::string& name) {
  std::ofstream out(join_path(cfg.out_dir, name));
  if (!out) throw IoError("cannot open " + join_path(cfg.out_dir, name) + " for writing");
  ctx.artifacts.push_back(name);
  return out;
}

void require_artifact(const RunConfig& cfg, const std::string& name, const char* producer) {
  if (!fs::exists(join_path(cfg.out_dir, name)))
    throw IoError("missing artifact: " + name + " (run the " + std::string(producer) +
                  " stage first)");
}

const net::Network& need_network(const RunConfig& cfg, PipelineContext& ctx) {
  if (!ctx.network) {
    require_artifact(cfg, "network.json", "generate");
    ctx.network = net::load_network(join_path(cfg.out_dir, "network.json"));
  }
  return *ctx.network;
}

const ingest::SeriesMap& need_series(const RunConfig& cfg, PipelineContext& ctx) {
  if (ctx.series.empty()) {
    require_artifact(cfg, "hourly.csv", "ingest");
    std::ifstream in(join_path(cfg.out_dir, "hourly.csv"));
    if (!in) throw IoError("cannot open " + join_path(cfg.out_dir, "hourly.csv"));
    ctx.series = ingest::read_hourly_csv(in);
  }
  return ctx.series;
}

const forecast::ForecastRun& need_run(const RunConfig& cfg, PipelineContext& ctx) {
  if (!ctx.run) {
    require_artifact(cfg, "forecast_run.json", "forecast");
    std::ifstream in(join_path(cfg.out_dir, "forecast_run.json"));
    if (!in) throw IoError("cannot open " + join_path(cfg.out_dir, "forecast_run.json"));
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("invalid forecast_run.json: ") + e.what());
    }
    ctx.run = forecast::run_from_json(j);
  }
  return *ctx.run;
}

CivilDate analytics_week(const RunConfig& cfg, const ingest::SeriesMap& series) {
  if (cfg.analytics.week_start != "auto") return *parse_date(cfg.analytics.week_start);
  if (series.empty()) throw InputError("analytics: no series available");
  const HourRange r = series.begin()->second.range();
  HourStamp h = r.begin;
  while (weekday(h) != 0 || hour_of_day(h) != 0) ++h;
  if (h + 168 > r.end) throw RangeError("analytics: data does not cover one full Monday week");
  return date_of_hour(h);
}

synth::SynthConfig synth_config(const RunConfig& cfg) {
  synth::SynthConfig sc = cfg.synth;
  sc.seed = derive_seed(cfg.seed, "synth", "stream", 0);
  return sc;
}

}  // namespace

SegmentId resolve_target(const RunConfig& cfg, const net::Network& net) {
  if (cfg.target_spec == "busiest") {
    SegmentId best = 0;
    double best_scale = -1.0;
    for (const auto& s : net.segments()) {
      if (s.sensorized && s.mean_scale > best_scale) {
        best_scale = s.mean_scale;
        best = s.id;
      }
    }
    if (best_scale < 0.0) throw ConfigError("window.target: no sensorized segment available");
    return best;
  }
  const auto id = static_cast<SegmentId>(std::stoull(cfg.target_spec));
  if (!net.contains(id) || !net.segment(id).sensorized)
    throw ConfigError("window.target " + cfg.target_spec + " is not a sensorized segment");
  return id;
}

forecast::DataSplit data_split(const RunConfig& cfg) {
  forecast::DataSplit split;
  split.start = hour_stamp(cfg.synth.start_date);
  split.end = hour_stamp(cfg.synth.end_date);
  split.test_start = split.end - static_cast<HourStamp>(cfg.test_days) * 24;
  if (split.test_start <= split.start)
    throw ConfigError("test_days leaves no training range before the test window");
  return split;
}

int effective_jobs(const RunConfig& cfg) {
  if (cfg.jobs > 0) return cfg.jobs;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for checksumming");
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const auto n = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (in.eof()) break;
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void write_manifest(const RunConfig& cfg, const std::vector<std::string>& artifacts) {
  nlohmann::json arts = nlohmann::json::object();
  for (const auto& name : artifacts) {
    const std::string path = join_path(cfg.out_dir, name);
    arts[name] = {{"checksum", file_checksum(path)},
                  {"bytes", static_cast<std::uint64_t>(fs::file_size(path))}};
  }
  nlohmann::json manifest = {{"config", config_to_json(cfg)}, {"artifacts", arts}};
  std::ofstream out(join_path(cfg.out_dir, "manifest.json"));
  if (!out) throw IoError("cannot write manifest.json");
  out << manifest.dump(2) << '\n';
}

void run_generate(const RunConfig& cfg, PipelineContext& ctx) {
  ensure_out_dir(cfg);
  ctx.network = net::build_synthetic_network(cfg.network, cfg.seed);
  net::save_network(*ctx.network, join_path(cfg.out_dir, "network.json"));
  ctx.artifacts.push_back("network.json");

  auto raw = open_artifact(cfg, ctx, "raw.csv");
  synth::write_raw_csv_header(raw);
  std::uint64_t records = 0, outliers = 0;
  synth::generate(*ctx.network, synth::WeeklyProfile::standard(), synth_config(cfg),
                  [&](const synth::FluxRecord& r, bool is_outlier) {
                    synth::write_raw_csv_row(raw, r);
                    ++records;
                    outliers += is_outlier ? 1 : 0;
                  });
  if (!raw) throw IoError("failed writing raw.csv");
  raw.close();
  log_info("stage=generate segments=" + std::to_string(cfg.network.n_segments) +
           " sensorized=" + std::to_string(ctx.network->sensorized_count()) +
           " records=" + std::to_string(records) + " outliers_injected=" + std::to_string(outliers));
}

void run_ingest(const RunConfig& cfg, PipelineContext& ctx) {
  ensure_out_dir(cfg);
  const net::Network& network = need_network(cfg, ctx);
  require_artifact(cfg, "raw.csv", "generate");
  std::ifstream raw(join_path(cfg.out_dir, "raw.csv"));
  if (!raw) throw IoError("cannot open " + join_path(cfg.out_dir, "raw.csv"));

  const HourRange range{hour_stamp(cfg.synth.start_date), hour_stamp(cfg.synth.end_date)};
  ingest::IngestReport report;
  ctx.series = ingest::read_raw_csv(raw, network, range, cfg.ingest, report);

  auto hourly = open_artifact(cfg, ctx, "hourly.csv");
  ingest::write_hourly_csv(hourly, ctx.series);
  if (!hourly) throw IoError("failed writing hourly.csv");
  auto rep = open_artifact(cfg, ctx, "ingest_report.json");
  rep << report.to_json().dump(2) << '\n';
  log_info("stage=ingest rows_read=" + std::to_string(report.rows_read) +
           " rows_rejected=" + std::to_string(report.rows_rejected) +
           " outliers_removed=" + std::to_string(report.outliers_removed) +
           " hours_imputed=" + std::to_string(report.hours_imputed));
}

void run_analytics(const RunConfig& cfg, PipelineContext& ctx) {
  ensure_out_dir(cfg);
  const net::Network& network = need_network(cfg, ctx);
  const ingest::SeriesMap& series = need_series(cfg, ctx);

  const CivilDate week = analytics_week(cfg, series);
  const std::string tag = iso_date(week);

  const auto weekly = analytics::weekly_deviation(series, week);
  {
    auto out = open_artifact(cfg, ctx, "analytics_weekly_deviation_" + tag + ".csv");
    analytics::write_weekly_deviation_csv(out, weekly);
    auto js = open_artifact(cfg, ctx, "analytics_weekly_deviation_" + tag + ".json");
    js << analytics::weekly_deviation_summary(weekly).dump(2) << '\n';
  }

  // Daily profiles for the forecast target and the access-road segments.
  std::set<SegmentId> profiled{resolve_target(cfg, network)};
  for (const auto& [name, ids] : network.access_roads())
    for (SegmentId id : ids) profiled.insert(id);
  {
    auto out = open_artifact(cfg, ctx, "analytics_daily_profile_" + tag + ".csv");
    out << "key,hour,value\n";
    char buf[64];
    for (SegmentId id : profiled) {
      const auto profile = analytics::daily_profile(series, id, week);
      for (int h = 0; h < 24; ++h) {
        std::snprintf(buf, sizeof(buf), "segment_%u,%d,%.17g\n", id, h,
                      profile.flux[static_cast<std::size_t>(h)]);
        out << buf;
      }
    }
  }

  if (!network.access_roads().empty()) {
    const auto split = analytics::in_out_split(series, network, week);
    auto out = open_artifact(cfg, ctx, "analytics_in_out_" + tag + ".csv");
    analytics::write_in_out_csv(out, split);
    auto js = open_artifact(cfg, ctx, "analytics_in_out_" + tag + ".json");
    js << analytics::in_out_summary(split).dump(2) << '\n';
  }

  {
    auto out = open_artifact(cfg, ctx, "analytics_rush_hour_" + tag + ".csv");
    out << "key,hour,value\n";
    char buf[64];
    for (int rush : cfg.analytics.rush_hours) {
      auto snap = analytics::rush_hour_snapshot(series, network, hour_stamp(week, rush));
      snap.clip_value = cfg.analytics.clip_value;
      for (const auto& [id, flux] : snap.flux_by_segment) {
        std::snprintf(buf, sizeof(buf), "segment_%u,%d,%.17g\n", id, rush,
                      std::min(flux, snap.clip_value));
        out << buf;
      }
    }
  }
  log_info("stage=analytics week_start=" + tag);
}

void run_train(const RunConfig& cfg, PipelineContext& ctx) {
  ensure_out_dir(cfg);
  const net::Network& network = need_network(cfg, ctx);
  const ingest::SeriesMap& series = need_series(cfg, ctx);

  forecast::WindowConfig wc = cfg.window;
  wc.target = resolve_target(cfg, network);
  const auto dataset = forecast::build_dataset(series, network, wc, data_split(cfg));

  lstm::TrainCurve curve;
  const auto model =
      forecast::train_model(dataset, cfg.train, derive_seed(cfg.seed, "train", "member", 0),
                            &curve);
  forecast::save_model(model, join_path(cfg.out_dir, "model.json"));
  ctx.artifacts.push_back("model.json");
  auto out = open_artifact(cfg, ctx, "train_curve.csv");
  lstm::write_curve_csv(out, curve);
  log_info("stage=train samples=" + std::to_string(dataset.samples.size()) +
           " final_train_rmse=" + std::to_string(curve.train_rmse.back()) +
           " final_val_rmse=" + std::to_string(curve.val_rmse.back()));
}

void run_forecast(const RunConfig& cfg, PipelineContext& ctx) {
  ensure_out_dir(cfg);
  const net::Network& network = need_network(cfg, ctx);
  const ingest::SeriesMap& series = need_series(cfg, ctx);

  forecast::WindowConfig wc = cfg.window;
  wc.target = resolve_target(cfg, network);
  const auto dataset = forecast::build_dataset(series, network, wc, data_split(cfg));

  const std::uint64_t base_seed = cfg.ensemble.base_seed >= 0
                                      ? static_cast<std::uint64_t>(cfg.ensemble.base_seed)
                                      : derive_seed(cfg.seed, "forecast", "ensemble", 0);
  ctx.run = forecast::run_ensemble(dataset, cfg.train, cfg.ensemble.size, base_seed,
                                   effective_jobs(cfg));

  auto js = open_artifact(cfg, ctx, "forecast_run.json");
  js << forecast::run_to_json(*ctx.run).dump() << '\n';
  auto csv = open_artifact(cfg, ctx, "forecast.csv");
  forecast::write_forecast_csv(csv, *ctx.run);
  log_info("stage=forecast target=" + std::to_string(wc.target) +
           " ensemble=" + std::to_string(cfg.ensemble.size) +
           " test_hours=" + std::to_string(ctx.run->hours.size()));
}

void run_evaluate(const RunConfig& cfg, PipelineContext& ctx) {
  ensure_out_dir(cfg);
  const ingest::SeriesMap& series = need_series(cfg, ctx);
  const forecast::ForecastRun& run = need_run(cfg, ctx);

  const auto report = eval::evaluate_run(run, series);
  auto js = open_artifact(cfg, ctx, "evaluation.json");
  js << report.to_json().dump(2) << '\n';
  log_info("stage=evaluate global_rmse=" + std::to_string(report.global_rmse) +
           " relative_error=" + std::to_string(report.relative_error));

  if (cfg.grid.enabled) {
    const net::Network& network = need_network(cfg, ctx);
    eval::GridSpec spec;
    for (const auto& c : cfg.grid.coverages)
      spec.coverages.push_back(forecast::coverage_from_string(c));
    spec.lookbacks = cfg.grid.lookbacks;
    spec.horizons = cfg.grid.horizons;
    spec.base_seeds = cfg.grid.base_seeds;
    spec.ensemble_size = cfg.grid.ensemble_size;
    const auto cells =
        eval::comparison_grid(series, network, resolve_target(cfg, network), spec, cfg.train,
                              data_split(cfg), effective_jobs(cfg));
    auto csv = open_artifact(cfg, ctx, "grid.csv");
    eval::write_grid_csv(csv, cells);
    auto gj = open_artifact(cfg, ctx, "grid.json");
    gj << eval::grid_to_json(cells).dump(2) << '\n';
    log_info("stage=evaluate grid_cells=" + std::to_string(cells.size()));
  }
}

namespace {

template <class Fn>
void run_stage_named(Stage stage, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + to_string(stage) + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError("stage " + to_string(stage) + ": " + e.what());
  } catch (const LookupError& e) {
    throw LookupError("stage " + to_string(stage) + ": " + e.what());
  } catch (const RangeError& e) {
    throw RangeError("stage " + to_string(stage) + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError("stage " + to_string(stage) + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError("stage " + to_string(stage) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage " + to_string(stage) + ": " + e.what());
  }
}

}  // namespace

void run_pipeline(const RunConfig& cfg, Stage last_stage) {
  PipelineContext ctx;
  const std::pair<Stage, void (*)(const RunConfig&, PipelineContext&)> stages[] = {
      {Stage::Generate, run_generate}, {Stage::Ingest, run_ingest},
      {Stage::Analytics, run_analytics}, {Stage::Train, run_train},
      {Stage::Forecast, run_forecast}, {Stage::Evaluate, run_evaluate},
  };
  for (const auto& [stage, fn] : stages) {
    run_stage_named(stage, [&] { fn(cfg, ctx); });
    if (stage == last_stage) break;
  }
  write_manifest(cfg, ctx.artifacts);
  log_info("pipeline=done out_dir=" + cfg.out_dir);
}

void run_single_stage(const RunConfig& cfg, Stage stage) {
  PipelineContext ctx;
  switch (stage) {
    case Stage::Generate: run_stage_named(stage, [&] { run_generate(cfg, ctx); }); break;
    case Stage::Ingest: run_stage_named(stage, [&] { run_ingest(cfg, ctx); }); break;
    case Stage::Analytics: run_stage_named(stage, [&] { run_analytics(cfg, ctx); }); break;
    case Stage::Train: run_stage_named(stage, [&] { run_train(cfg, ctx); }); break;
    case Stage::Forecast: run_stage_named(stage, [&] { run_forecast(cfg, ctx); }); break;
    case Stage::Evaluate: run_stage_named(stage, [&] { run_evaluate(cfg, ctx); }); break;
  }
  write_manifest(cfg, ctx.artifacts);
}

}  // namespace fluxcast::cli

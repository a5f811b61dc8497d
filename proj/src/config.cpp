#include "fluxcast/config.hpp"

#include <fstream>
#include <set>

namespace fluxcast::cli {

namespace {

using nlohmann::json;

/// Section reader that tracks consumed keys so unknown ones can be rejected
/// with a full dotted path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string dotted(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(dotted(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  template <class T>
  void integer(const char* key, T& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() && !v->is_number_unsigned())
        throw ConfigError(dotted(key) + ": expected an integer");
      out = v->get<T>();
    }
  }

  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(dotted(key) + ": expected a boolean");
      out = v->get<bool>();
    }
  }

  void text(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(dotted(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void date(const char* key, CivilDate& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(dotted(key) + ": expected a YYYY-MM-DD string");
      const auto d = parse_date(v->get<std::string>());
      if (!d) throw ConfigError(dotted(key) + ": invalid date '" + v->get<std::string>() + "'");
      out = *d;
    }
  }

  template <class T>
  void int_list(const char* key, std::vector<T>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(dotted(key) + ": expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer() && !e.is_number_unsigned())
          throw ConfigError(dotted(key) + ": expected an array of integers");
        out.push_back(e.get<T>());
      }
    }
  }

  void text_list(const char* key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(dotted(key) + ": expected an array of strings");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) throw ConfigError(dotted(key) + ": expected an array of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }

  void done() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!seen_.contains(key))
        throw ConfigError("unknown config key: " + (path_.empty() ? key : path_ + "." + key));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void fail_if(bool cond, const std::string& message) {
  if (cond) throw ConfigError(message);
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

void RunConfig::validate() const {
  fail_if(test_days < 1, "test_days must be >= 1");
  fail_if(jobs < 0, "jobs must be >= 0");

  fail_if(network.n_segments < 1, "network.n_segments must be >= 1");
  fail_if(!(network.sensorized_fraction > 0.0) || network.sensorized_fraction > 1.0,
          "network.sensorized_fraction must be in (0, 1]");
  fail_if(!(network.side_m > 0.0), "network.side_m must be > 0");
  fail_if(!(network.scale_min > 0.0) || network.scale_max < network.scale_min,
          "network.scale_min/scale_max must satisfy 0 < min <= max");
  fail_if(network.n_access_roads < 0, "network.n_access_roads must be >= 0");

  fail_if(!is_valid_date(synth.start_date), "synth.start_date is not a valid date");
  fail_if(!is_valid_date(synth.end_date), "synth.end_date is not a valid date");
  fail_if(days_from_civil(synth.end_date) < days_from_civil(synth.start_date),
          "synth.end_date must be >= synth.start_date");
  fail_if(synth.noise_rel_std < 0.0, "synth.noise_rel_std must be >= 0");
  fail_if(synth.outlier_rate < 0.0 || synth.outlier_rate > 1.0,
          "synth.outlier_rate must be in [0, 1]");
  fail_if(synth.outlier_magnitude < 0.0, "synth.outlier_magnitude must be >= 0");
  fail_if(synth.latent_factor_std < 0.0, "synth.latent_factor_std must be >= 0");
  fail_if(synth.propagation_lag_h < 0, "synth.propagation_lag_h must be >= 0");

  fail_if(ingest.expected_per_hour < 1, "ingest.expected_per_hour must be >= 1");
  fail_if(!(ingest.ok_threshold > 0.0) || ingest.ok_threshold > 1.0,
          "ingest.ok_threshold must be in (0, 1]");

  train.validate();
  window.validate();

  if (target_spec != "busiest") {
    const auto pos = target_spec.find_first_not_of("0123456789");
    fail_if(target_spec.empty() || pos != std::string::npos,
            "window.target must be a segment id or \"busiest\"");
  }

  fail_if(analytics.clip_value <= 0.0, "analytics.clip_value must be > 0");
  for (int h : analytics.rush_hours)
    fail_if(h < 0 || h > 23, "analytics.rush_hours entries must be in [0, 23]");
  if (analytics.week_start != "auto") {
    const auto d = parse_date(analytics.week_start);
    fail_if(!d, "analytics.week_start must be \"auto\" or a YYYY-MM-DD date");
    fail_if(weekday(*d) != 0, "analytics.week_start must be a Monday");
  }

  fail_if(ensemble.size < 1, "ensemble.size must be >= 1");

  if (grid.enabled) {
    fail_if(grid.coverages.empty(), "grid.coverages must be nonempty");
    fail_if(grid.lookbacks.empty(), "grid.lookbacks must be nonempty");
    fail_if(grid.horizons.empty(), "grid.horizons must be nonempty");
    fail_if(grid.base_seeds.empty(), "grid.base_seeds must be nonempty");
    fail_if(grid.ensemble_size < 1, "grid.ensemble_size must be >= 1");
    for (const auto& c : grid.coverages) forecast::coverage_from_string(c);
    for (int l : grid.lookbacks) fail_if(l < 1, "grid.lookbacks entries must be >= 1");
    for (int h : grid.horizons) fail_if(h < 1, "grid.horizons entries must be >= 1");
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  Reader root(j, "");
  root.integer("seed", cfg.seed);
  root.text("out_dir", cfg.out_dir);
  root.integer("jobs", cfg.jobs);
  root.integer("test_days", cfg.test_days);

  if (const json* sec = root.find("network")) {
    Reader r(*sec, "network");
    r.integer("n_segments", cfg.network.n_segments);
    r.number("sensorized_fraction", cfg.network.sensorized_fraction);
    r.number("side_m", cfg.network.side_m);
    r.number("scale_min", cfg.network.scale_min);
    r.number("scale_max", cfg.network.scale_max);
    r.integer("n_access_roads", cfg.network.n_access_roads);
    r.done();
  }
  if (const json* sec = root.find("synth")) {
    Reader r(*sec, "synth");
    r.date("start_date", cfg.synth.start_date);
    r.date("end_date", cfg.synth.end_date);
    r.number("noise_rel_std", cfg.synth.noise_rel_std);
    r.number("outlier_rate", cfg.synth.outlier_rate);
    r.number("outlier_magnitude", cfg.synth.outlier_magnitude);
    r.number("latent_factor_std", cfg.synth.latent_factor_std);
    r.integer("propagation_lag_h", cfg.synth.propagation_lag_h);
    r.done();
  }
  if (const json* sec = root.find("ingest")) {
    Reader r(*sec, "ingest");
    r.integer("expected_per_hour", cfg.ingest.expected_per_hour);
    r.number("ok_threshold", cfg.ingest.ok_threshold);
    r.done();
  }
  if (const json* sec = root.find("train")) {
    Reader r(*sec, "train");
    r.integer("hidden_dim", cfg.train.hidden_dim);
    r.integer("epochs", cfg.train.epochs);
    r.integer("batch_size", cfg.train.batch_size);
    r.number("learning_rate", cfg.train.learning_rate);
    r.number("beta1", cfg.train.beta1);
    r.number("beta2", cfg.train.beta2);
    r.number("adam_eps", cfg.train.adam_eps);
    r.number("val_fraction", cfg.train.val_fraction);
    r.number("final_lr_fraction", cfg.train.final_lr_fraction);
    r.done();
  }
  if (const json* sec = root.find("window")) {
    Reader r(*sec, "window");
    r.integer("lookback_h", cfg.window.lookback_h);
    r.integer("horizon_h", cfg.window.horizon_h);
    if (const json* v = r.find("coverage")) {
      if (!v->is_string()) throw ConfigError("window.coverage: expected a string");
      cfg.window.coverage = forecast::coverage_from_string(v->get<std::string>());
    }
    r.number("radius_m", cfg.window.radius_m);
    if (const json* v = r.find("target")) {
      if (v->is_string())
        cfg.target_spec = v->get<std::string>();
      else if (v->is_number_integer() || v->is_number_unsigned())
        cfg.target_spec = std::to_string(v->get<std::uint64_t>());
      else
        throw ConfigError("window.target: expected a segment id or \"busiest\"");
    }
    r.done();
  }
  if (const json* sec = root.find("analytics")) {
    Reader r(*sec, "analytics");
    r.text("week_start", cfg.analytics.week_start);
    r.int_list("rush_hours", cfg.analytics.rush_hours);
    r.number("clip_value", cfg.analytics.clip_value);
    r.done();
  }
  if (const json* sec = root.find("ensemble")) {
    Reader r(*sec, "ensemble");
    r.integer("size", cfg.ensemble.size);
    r.integer("base_seed", cfg.ensemble.base_seed);
    r.done();
  }
  if (const json* sec = root.find("grid")) {
    Reader r(*sec, "grid");
    r.boolean("enabled", cfg.grid.enabled);
    r.text_list("coverages", cfg.grid.coverages);
    r.int_list("lookbacks", cfg.grid.lookbacks);
    r.int_list("horizons", cfg.grid.horizons);
    r.int_list("base_seeds", cfg.grid.base_seeds);
    r.integer("ensemble_size", cfg.grid.ensemble_size);
    r.done();
  }
  root.done();

  cfg.validate();
  return cfg;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  json target;
  if (cfg.target_spec == "busiest")
    target = "busiest";
  else
    target = std::stoull(cfg.target_spec);
  return {
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
      {"jobs", cfg.jobs},
      {"test_days", cfg.test_days},
      {"network",
       {{"n_segments", cfg.network.n_segments},
        {"sensorized_fraction", cfg.network.sensorized_fraction},
        {"side_m", cfg.network.side_m},
        {"scale_min", cfg.network.scale_min},
        {"scale_max", cfg.network.scale_max},
        {"n_access_roads", cfg.network.n_access_roads}}},
      {"synth",
       {{"start_date", iso_date(cfg.synth.start_date)},
        {"end_date", iso_date(cfg.synth.end_date)},
        {"noise_rel_std", cfg.synth.noise_rel_std},
        {"outlier_rate", cfg.synth.outlier_rate},
        {"outlier_magnitude", cfg.synth.outlier_magnitude},
        {"latent_factor_std", cfg.synth.latent_factor_std},
        {"propagation_lag_h", cfg.synth.propagation_lag_h}}},
      {"ingest",
       {{"expected_per_hour", cfg.ingest.expected_per_hour},
        {"ok_threshold", cfg.ingest.ok_threshold}}},
      {"train",
       {{"hidden_dim", cfg.train.hidden_dim},
        {"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
        {"learning_rate", cfg.train.learning_rate},
        {"beta1", cfg.train.beta1},
        {"beta2", cfg.train.beta2},
        {"adam_eps", cfg.train.adam_eps},
        {"val_fraction", cfg.train.val_fraction},
        {"final_lr_fraction", cfg.train.final_lr_fraction}}},
      {"window",
       {{"lookback_h", cfg.window.lookback_h},
        {"horizon_h", cfg.window.horizon_h},
        {"coverage", forecast::to_string(cfg.window.coverage)},
        {"radius_m", cfg.window.radius_m},
        {"target", target}}},
      {"analytics",
       {{"week_start", cfg.analytics.week_start},
        {"rush_hours", cfg.analytics.rush_hours},
        {"clip_value", cfg.analytics.clip_value}}},
      {"ensemble", {{"size", cfg.ensemble.size}, {"base_seed", cfg.ensemble.base_seed}}},
      {"grid",
       {{"enabled", cfg.grid.enabled},
        {"coverages", cfg.grid.coverages},
        {"lookbacks", cfg.grid.lookbacks},
        {"horizons", cfg.grid.horizons},
        {"base_seeds", cfg.grid.base_seeds},
        {"ensemble_size", cfg.grid.ensemble_size}}}};
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t pos = 0;
  for (;;) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw ConfigError("--set path has an empty component: '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (!node->is_object() && !node->is_null())
      throw ConfigError("--set path '" + path + "' crosses a non-object value");
    pos = dot + 1;
  }
}

}  // namespace fluxcast::cli

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxcast/eval.hpp"
#include "fluxcast/forecast.hpp"
#include "fluxcast/ingest.hpp"
#include "fluxcast/lstm.hpp"
#include "fluxcast/network.hpp"
#include "fluxcast/synth.hpp"

namespace fluxcast::cli {

struct AnalyticsConfig {
  std::string week_start = "auto";  // "auto" or YYYY-MM-DD (a Monday)
  std::vector<int> rush_hours = {8, 19};
  double clip_value = 2000.0;
};

struct EnsembleConfig {
  int size = 3;
  std::int64_t base_seed = -1;  // < 0: derived from the global seed
};

struct GridConfig {
  bool enabled = false;
  std::vector<std::string> coverages = {"target_only", "nearby", "all"};
  std::vector<int> lookbacks = {5, 24};
  std::vector<int> horizons = {1, 2};
  std::vector<std::uint64_t> base_seeds = {1, 2, 3};
  int ensemble_size = 1;
};

/// Full run configuration; one global seed feeds every stage through named
/// stream derivation.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  int jobs = 0;  // 0: hardware concurrency
  int test_days = 7;

  net::NetworkConfig network{50, 1.0, 5000.0, 150.0, 600.0, 3};
  synth::SynthConfig synth;
  ingest::IngestConfig ingest;
  lstm::HyperParams train{.hidden_dim = 32,
                          .epochs = 200,
                          .batch_size = 256,
                          .learning_rate = 2e-3};
  forecast::WindowConfig window;
  std::string target_spec = "busiest";  // "busiest" or a segment id
  AnalyticsConfig analytics;
  EnsembleConfig ensemble;
  GridConfig grid;

  void validate() const;  // throws ConfigError naming the offending field
};

RunConfig default_config();

/// Parses and validates; unknown keys are rejected with their dotted path.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

RunConfig load_config(const std::string& path);

/// Applies a dotted-path override like `synth.noise_rel_std=0.1` onto a
/// config JSON document (the value is parsed as JSON, falling back to a
/// string).
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace fluxcast::cli

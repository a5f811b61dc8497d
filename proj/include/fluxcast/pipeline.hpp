#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fluxcast/config.hpp"

namespace fluxcast::cli {

enum class Stage { Generate, Ingest, Analytics, Train, Forecast, Evaluate };

Stage stage_from_string(const std::string& s);
std::string to_string(Stage s);

/// In-memory handoff between stages of one invocation. Stages read missing
/// inputs from cfg.out_dir and fail with an IoError naming the absent
/// artifact.
struct PipelineContext {
  std::optional<net::Network> network;
  ingest::SeriesMap series;
  std::optional<forecast::ForecastRun> run;
  std::vector<std::string> artifacts;  // files written, relative to out_dir
};

void run_generate(const RunConfig& cfg, PipelineContext& ctx);
void run_ingest(const RunConfig& cfg, PipelineContext& ctx);
void run_analytics(const RunConfig& cfg, PipelineContext& ctx);
void run_train(const RunConfig& cfg, PipelineContext& ctx);
void run_forecast(const RunConfig& cfg, PipelineContext& ctx);
void run_evaluate(const RunConfig& cfg, PipelineContext& ctx);

/// generate -> ingest -> analytics -> train -> forecast -> evaluate, stopping
/// after last_stage; writes the manifest at the end.
void run_pipeline(const RunConfig& cfg, Stage last_stage = Stage::Evaluate);

/// Runs one stage standalone (subcommand entry) and writes the manifest.
void run_single_stage(const RunConfig& cfg, Stage stage);

SegmentId resolve_target(const RunConfig& cfg, const net::Network& net);
forecast::DataSplit data_split(const RunConfig& cfg);
int effective_jobs(const RunConfig& cfg);

std::string file_checksum(const std::string& path);  // "fnv1a64:<hex>"
void write_manifest(const RunConfig& cfg, const std::vector<std::string>& artifacts);

/// Machine-parsable `LEVEL key=value ...` lines on stderr.
void log_info(const std::string& kv);
void log_warn(const std::string& kv);

}  // namespace fluxcast::cli

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nmtune/harness.hpp"

namespace nmtune::io {

/// One split of a file-backed task. `features` may contain "{gamma}", which
/// is replaced by the gamma of the cell (formatted as by `simulate`).
struct FileSplit {
  std::string name = "test";
  std::string features;
  std::string labels;
};

struct FileTask {
  std::string id;
  sim::TaskKind kind = sim::TaskKind::kId;
  FileSplit train;
  std::vector<FileSplit> tests;
};

struct FilesConfig {
  std::vector<FileTask> tasks;
};

struct RetryPolicy {
  std::size_t max_retries = 3;
  double backoff_ms = 200.0;  ///< first delay; doubles every attempt
};

/// Splits of a provider-backed task: text inputs, one per line.
struct ProviderSplit {
  std::string name = "test";
  std::string inputs;
  std::string labels;
};

struct ProviderTask {
  std::string id;
  sim::TaskKind kind = sim::TaskKind::kId;
  ProviderSplit train;
  std::vector<ProviderSplit> tests;
};

struct ProviderConfig {
  std::string endpoint;                                ///< e.g. http://host:port/embed
  std::string endpoint_env = "NMTUNE_PROVIDER_ENDPOINT";  ///< overrides endpoint when set
  std::string token_env = "NMTUNE_PROVIDER_TOKEN";     ///< bearer token, never persisted
  std::size_t batch_size = 32;
  std::size_t parallelism = 1;  ///< in-flight batches per endpoint
  double timeout_s = 30.0;
  RetryPolicy retry;
  std::string cache_dir;  ///< empty: <out>/cache
  std::vector<ProviderTask> tasks;
};

enum class SourceKind { kSimulator, kFiles, kProvider };

std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view name);

struct RunConfig {
  SourceKind source = SourceKind::kSimulator;
  ExperimentPlan plan;
  SimulatorSource::Config simulator;
  FilesConfig files;
  ProviderConfig provider;

  void validate() const;
};

/// Strict JSON parse: unknown keys and wrong types are ConfigErrors. Missing
/// keys take their defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig read_run_config(const std::filesystem::path& path);

/// Canonical JSON with every default materialized.
std::string dump_run_config(const RunConfig& cfg);

/// First 16 hex digits of SHA-256 over the canonical config.
std::string plan_hash(const RunConfig& cfg);

/// NoiseSpec JSON ({"kind", "ratio", "subset", "seed"}), used by inject-noise.
NoiseSpec parse_noise_spec(const std::string& json_text);
/// TrainConfig JSON, used by tune; `mode` is required.
nn::TrainConfig parse_train_config(const std::string& json_text);
nn::TrainConfig parse_train_config_or(const std::string& json_text, nn::TuneMode fallback_mode);
/// SyntheticSpec plus pretraining settings, used by simulate.
struct SimulateConfig {
  sim::SyntheticSpec synthetic;
  sim::PretrainConfig pretrain;
  NoiseKind noise = NoiseKind::kSymmetric;
  std::vector<Label> subset;
  std::vector<double> gamma_list{0.0, 0.05, 0.10, 0.20, 0.30};
  std::vector<sim::DownstreamSpec> tasks;
};
SimulateConfig parse_simulate_config(const std::string& json_text);

/// Formats a gamma the way file patterns and cell ids expect ("0.05").
std::string format_ratio(double v);

}  // namespace nmtune::io

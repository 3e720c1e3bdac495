#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "nmtune/dataset.hpp"
#include "nmtune/nn/train.hpp"
#include "nmtune/sim/simulator.hpp"

namespace nmtune {

struct ExperimentPlan {
  std::vector<double> gamma_list{0.0, 0.05, 0.10, 0.20, 0.30};
  std::vector<double> eta_list{0.0, 0.10, 0.20, 0.30, 0.40, 0.50};
  std::vector<nn::TuneMode> modes{nn::TuneMode::kLinearProbe};
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::string> tasks;
  std::vector<double> data_fractions{0.10, 0.25, 0.50, 0.75, 1.00};
  std::uint64_t seed = 0;  ///< plan seed, mixed into every cell seed
  /// Per-mode training recipes; modes without an entry use defaults_for().
  std::map<nn::TuneMode, nn::TrainConfig> train;
  /// Downstream label noise (eta) kind.
  NoiseKind downstream_noise = NoiseKind::kSymmetric;

  void validate() const;
  nn::TrainConfig recipe(nn::TuneMode mode) const;
};

/// One grid point. `replicate` is an entry of plan.seeds.
struct Cell {
  double gamma = 0.0;
  double eta = 0.0;
  nn::TuneMode mode = nn::TuneMode::kLinearProbe;
  std::string task;
  double fraction = 1.0;
  std::uint64_t replicate = 0;

  std::string id() const;
};

/// Every cell of the plan in canonical order.
std::vector<Cell> expand(const ExperimentPlan& plan);

/// Seed of a cell's training run. MLP and NMTUNE_MLP (and LORA and
/// NMTUNE_LORA) share a seed so that they start from the same weights.
std::uint64_t cell_seed(std::uint64_t plan_seed, const Cell& cell);

/// Seed of everything upstream of tuning for one replicate: synthetic data,
/// pre-training, downstream samples.
std::uint64_t world_seed(std::uint64_t plan_seed, std::uint64_t replicate);

struct VariantResult {
  std::string name;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double sve = 0.0;
  double lsvr = 0.0;
};

struct EvalResult {
  std::string cell_id;
  nn::TuneMode mode = nn::TuneMode::kLinearProbe;
  double gamma = 0.0;
  double eta = 0.0;
  std::string task_id;
  sim::TaskKind task_kind = sim::TaskKind::kId;
  double fraction = 1.0;
  std::uint64_t seed = 0;       ///< replicate
  std::uint64_t cell_seed = 0;
  bool ok = true;
  std::string error_kind;       ///< set when !ok
  std::string error_message;
  // Means over evaluation variants (a single one for ID tasks).
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double sve = 0.0;
  double lsvr = 0.0;
  std::size_t train_size = 0;
  std::size_t flipped = 0;      ///< downstream labels corrupted by eta
  std::vector<VariantResult> variants;
  std::vector<double> loss_trace;  ///< mean objective per epoch
  std::optional<double> parameter_delta_norm;
  /// Z of each variant; filled only when the source asks for persistence.
  std::vector<Matrix> features;
};

/// Inputs of one (gamma, task, replicate). Train/test rows are features for
/// head-only modes; `raw_*` and `extractor` are present when the extractor
/// itself can be tuned.
struct TaskData {
  sim::TaskKind kind = sim::TaskKind::kId;
  Dataset train;
  std::vector<Dataset> tests;
  std::vector<std::string> test_names;
  std::optional<Dataset> raw_train;
  std::vector<Dataset> raw_tests;
  std::shared_ptr<const nn::FeedForward> extractor;
};

/// Where features come from. Implementations must be safe to call from
/// several workers at once.
class FeatureSource {
 public:
  virtual ~FeatureSource() = default;
  virtual std::shared_ptr<const TaskData> load(double gamma, const std::string& task,
                                               std::uint64_t world_seed) = 0;
  virtual bool persist_features() const { return false; }
};

/// Pre-trains one toy extractor per (gamma, replicate) and caches it.
class SimulatorSource final : public FeatureSource {
 public:
  struct Config {
    sim::SyntheticSpec synthetic;
    sim::PretrainConfig pretrain;
    NoiseKind pretrain_noise = NoiseKind::kSymmetric;
    std::vector<Label> pretrain_subset;  ///< asymmetric only
    std::vector<sim::DownstreamSpec> tasks;
    bool persist_features = false;
  };

  explicit SimulatorSource(Config cfg);
  std::shared_ptr<const TaskData> load(double gamma, const std::string& task,
                                       std::uint64_t world_seed) override;
  bool persist_features() const override { return cfg_.persist_features; }

  const Config& config() const noexcept { return cfg_; }
  /// Pre-trained extractor for (gamma, world seed), built on first use.
  std::shared_ptr<const sim::PretrainResult> extractor(double gamma, std::uint64_t world_seed);

 private:
  struct Slot {
    std::once_flag once;
    std::shared_ptr<const sim::PretrainResult> value;
  };
  Config cfg_;
  std::mutex mu_;
  std::map<std::pair<double, std::uint64_t>, std::shared_ptr<Slot>> cache_;
};

/// Precomputed splits, looked up by (gamma, task). Used for file-ingested
/// and provider-fetched features; the world seed is ignored.
class StaticSource final : public FeatureSource {
 public:
  using Loader = std::function<TaskData(double gamma, const std::string& task)>;
  explicit StaticSource(Loader loader, bool persist = false)
      : loader_(std::move(loader)), persist_(persist) {}
  std::shared_ptr<const TaskData> load(double gamma, const std::string& task,
                                       std::uint64_t world_seed) override;
  bool persist_features() const override { return persist_; }

 private:
  Loader loader_;
  bool persist_;
  std::mutex mu_;
  std::map<std::pair<double, std::string>, std::shared_ptr<const TaskData>> cache_;
};

struct RunOptions {
  std::size_t threads = 1;
};

/// One EvalResult per cell, sorted by cell id. A failing cell is recorded
/// (ok = false) and never aborts the grid.
std::vector<EvalResult> run_plan(const ExperimentPlan& plan, FeatureSource& source,
                                 const RunOptions& options = {});

/// Runs a single cell. Throws on failure.
EvalResult run_cell(const ExperimentPlan& plan, const Cell& cell, FeatureSource& source);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  ///< population
};

struct SummaryRow {
  nn::TuneMode mode = nn::TuneMode::kLinearProbe;
  double gamma = 0.0;
  double eta = 0.0;
  double fraction = 1.0;
  /// A task id, or "ID" / "OOD" for the unweighted macro-average over the
  /// tasks of that kind.
  std::string task;
  std::size_t n = 0;  ///< seeds contributing
  Stat accuracy;
  Stat macro_f1;
  Stat sve;
  Stat lsvr;
  /// mean accuracy minus the LP row with the same key, if present.
  std::optional<double> delta_vs_lp;
};

Stat mean_std(const std::vector<double>& xs);

/// Mean and population std over seeds; failed cells are skipped.
std::vector<SummaryRow> aggregate(const std::vector<EvalResult>& results);

}  // namespace nmtune

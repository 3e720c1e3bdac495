#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "nmtune/dataset.hpp"
#include "nmtune/metrics.hpp"
#include "nmtune/nn/heads.hpp"
#include "nmtune/nn/optim.hpp"
#include "nmtune/spectrum.hpp"

namespace nmtune::nn {

struct TrainConfig {
  TuneMode mode = TuneMode::kLinearProbe;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 0.01;
  double weight_decay = 0.0;
  Schedule schedule = Schedule::kCosine;
  std::uint64_t seed = 0;
  /// Used by the NMTUNE_* modes; defaults apply when unset.
  std::optional<NmTuneConfig> nmtune;
  /// MLP hidden width; 0 means "same as the input feature dimension".
  std::size_t hidden_dim = 0;
  FeatureTap tap = FeatureTap::kPostRelu;
  std::size_t lora_rank_reduction = 8;
  double lora_scaling = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Mode-specific learning rate, weight decay and epoch defaults.
  static TrainConfig defaults_for(TuneMode mode);
  /// Language-style recipe: 10 epochs with a linear schedule.
  static TrainConfig language_defaults_for(TuneMode mode);

  void validate() const;
  /// The regularizer configuration in effect for this mode (empty for
  /// non-NMTune modes).
  std::optional<NmTuneConfig> effective_nmtune() const;
};

struct EpochRecord {
  double total = 0.0;  ///< mean objective over batches
  double ce = 0.0;
  double mse = 0.0;
  double cov = 0.0;
  double svd = 0.0;
  std::size_t batches = 0;
  std::size_t cov_skipped = 0;
  std::size_t svd_skipped = 0;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;
  std::size_t train_size = 0;
  /// Extractor parameter change, FULL_FT only.
  std::optional<double> parameter_delta_norm;
};

struct TrainResult {
  std::unique_ptr<TuneHead> head;
  TrainTrace trace;
};

/// Builds the untrained model for a configuration. `extractor` must be given
/// for modes that tune the extractor; `in_dim` is the width of `x` rows.
std::unique_ptr<TuneHead> make_head(const TrainConfig& cfg, std::size_t in_dim,
                                    std::size_t num_classes, const FeedForward* extractor);

/// Trains from scratch. For LP and MLP modes `data.x` holds features; for
/// LoRA and full fine-tuning it holds raw extractor inputs. Deterministic
/// given cfg.seed. Throws TrainingDiverged on a non-finite objective.
TrainResult train(const Dataset& data, const TrainConfig& cfg,
                  const FeedForward* extractor = nullptr);

/// Continues training an existing head (used by train()).
TrainTrace fit(TuneHead& head, const Dataset& data, const TrainConfig& cfg);

struct Evaluation {
  ClassificationMetrics metrics;
  SpectrumReport spectrum;  ///< of the head's feature space on the eval set
};

Evaluation evaluate(const TuneHead& head, const Dataset& data,
                    const std::string& dataset_id = "eval",
                    const std::string& model_id = "head");

}  // namespace nmtune::nn

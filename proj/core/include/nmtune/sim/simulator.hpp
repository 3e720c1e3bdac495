#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nmtune/dataset.hpp"
#include "nmtune/nn/heads.hpp"
#include "nmtune/nn/train.hpp"
#include "nmtune/noise.hpp"

namespace nmtune::sim {

/// Gaussian class-conditional generator. Input coordinates are split into
/// three consecutive blocks:
///   semantic  [0, semantic_dim)                 class means live here
///   style     [semantic_dim, +style_dim)        large within-class variation
///   nuisance  the rest                          small isotropic variation
/// Pre-training classes differ only in the semantic block; downstream tasks
/// may also carry class signal in the style block.
struct SyntheticSpec {
  std::size_t num_pretrain_classes = 50;
  std::size_t input_dim = 64;
  std::size_t samples_per_class = 400;
  std::size_t semantic_dim = 16;
  std::size_t style_dim = 16;
  double mean_scale = 2.0;     ///< std of class-mean coordinates (semantic block)
  double within_scale = 1.0;   ///< within-class std, semantic and nuisance blocks
  double style_scale = 2.0;    ///< within-class std, style block
  std::uint64_t seed = 0;

  void validate() const;
};

/// Recipe for noisy pre-training of the toy extractor.
struct PretrainConfig {
  std::size_t hidden_dim = 128;
  std::size_t feature_dim = 32;
  bool final_relu = true;  ///< features are post-activation
  std::size_t epochs = 60;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t val_per_class = 50;  ///< clean held-out samples per class
};

/// Class-conditional generator. A sample of class c is
///   x = rotation * (mean_{c,k} + spread * within_std .* eps) + translation
/// with eps ~ N(0, I) and k cycling over the class's mixture components.
/// An empty rotation/translation means identity/zero.
struct Generator {
  Matrix means;                    ///< (classes * components) x input_dim, class-major
  std::vector<double> within_std;  ///< per input coordinate
  double spread = 1.0;
  Matrix rotation;
  std::vector<double> translation;
  std::size_t components = 1;

  std::size_t num_classes() const noexcept { return means.rows() / components; }
  std::size_t dim() const noexcept { return means.cols(); }
  /// Component means after the rotation and translation.
  Matrix effective_means() const;
  /// `per_class` samples of every class, labels balanced and class-ordered.
  Dataset sample(std::size_t per_class, Rng& rng) const;
};

Generator pretrain_generator(const SyntheticSpec& spec);

/// Raw pre-training dataset: samples_per_class points of every class.
Dataset generate(const SyntheticSpec& spec);

/// Feature extractor f: X -> F (two affine layers with ReLU) plus the
/// pre-training classifier, which downstream tuning discards.
struct ToyExtractor {
  nn::FeedForward net;
  nn::Affine pretrain_head;
  bool frozen = false;

  void freeze() { frozen = true; }
  std::size_t feature_dim() const { return net.out_dim(); }
};

struct PretrainResult {
  ToyExtractor extractor;
  nn::TrainTrace trace;
  double train_accuracy = 0.0;      ///< against the (noisy) training labels
  double clean_val_accuracy = 0.0;  ///< held-out clean samples
  std::size_t flipped = 0;
};

/// Pre-trains on `data` after corrupting its labels with `noise` (symmetric
/// or asymmetric), then freezes the extractor. `noise.seed` drives the
/// corruption and `seed` the initialization and batching.
PretrainResult pretrain(const Dataset& data, const NoiseSpec& noise, const PretrainConfig& cfg,
                        std::uint64_t seed, const Dataset* clean_val = nullptr);

/// Convenience: generate + clean validation split + pretrain.
PretrainResult pretrain_synthetic(const SyntheticSpec& spec, const NoiseSpec& noise,
                                  const PretrainConfig& cfg, std::uint64_t seed);

enum class TaskKind { kId, kOod };
enum class TaskRegime { kNovel, kSubset };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);
std::string_view to_string(TaskRegime regime);
TaskRegime parse_task_regime(std::string_view name);

/// Distribution shift applied to the downstream generator:
/// rotation by `rotation_deg` in each (semantic_i, style_i) plane, translation
/// by `translation` along a fixed unit direction in the style block, and
/// within-class std multiplied by (1 + inflation).
struct ShiftParams {
  double rotation_deg = 0.0;
  double translation = 0.0;
  double inflation = 0.0;

  bool is_identity() const noexcept {
    return rotation_deg == 0.0 && translation == 0.0 && inflation == 0.0;
  }
};

struct DownstreamSpec {
  std::string id = "task";
  TaskKind kind = TaskKind::kId;
  TaskRegime regime = TaskRegime::kNovel;
  std::size_t num_classes = 10;
  std::size_t train_per_class = 50;
  std::size_t test_per_class = 100;
  /// std of class-mean coordinates in the style block (novel regime).
  double style_mean_scale = 0.0;
  /// Gaussian components per class (novel regime); > 1 makes classes
  /// multi-modal and so not linearly separable.
  std::size_t components_per_class = 1;
  /// Evaluation shifts (OOD only); the source split is never shifted.
  std::vector<ShiftParams> shifts;
};

struct DownstreamTask {
  std::string id;
  TaskKind kind = TaskKind::kId;
  Dataset train;
  /// ID: one test split from the training distribution. OOD: one per shift.
  std::vector<Dataset> tests;
  std::vector<ShiftParams> shifts;
};

/// Draws a downstream task from the generator family. Novel tasks resample
/// class means (semantic block from the pre-training family, style block with
/// std style_mean_scale); subset tasks reuse the first num_classes
/// pre-training classes.
DownstreamTask make_downstream(const SyntheticSpec& spec, const DownstreamSpec& task,
                               std::uint64_t seed);

/// Generator of a downstream task, before and after a shift.
Generator downstream_generator(const SyntheticSpec& spec, const DownstreamSpec& task,
                               std::uint64_t seed);
Generator shifted(const SyntheticSpec& spec, const Generator& gen, const ShiftParams& shift);

/// Deterministic forward pass of a frozen extractor.
FeatureMatrix extract_features(const ToyExtractor& extractor, const Matrix& inputs);

}  // namespace nmtune::sim

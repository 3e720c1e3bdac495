#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "nmtune/dataset.hpp"
#include "nmtune/nn/layers.hpp"
#include "nmtune/regularizers.hpp"

namespace nmtune::nn {

enum class TuneMode { kLinearProbe, kMlp, kNmTuneMlp, kLora, kNmTuneLora, kFullFineTune };

std::string_view to_string(TuneMode mode);
TuneMode parse_tune_mode(std::string_view name);  ///< "LP", "MLP", "NMTUNE_MLP", ...

/// Whether the mode tunes (part of) the extractor and thus needs raw inputs.
bool needs_extractor(TuneMode mode);

/// Which activation of the MLP head is the transformed feature space Z.
enum class FeatureTap { kPostRelu, kPreRelu };

/// Stack of affine layers with ReLU between them (and after the last one
/// when final_relu is set).
struct FeedForward {
  std::vector<Affine> layers;
  bool final_relu = true;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  Matrix forward(const Matrix& x) const;
  /// Output of every layer, after its activation.
  std::vector<Matrix> activations(const Matrix& x) const;
  bool relu_after(std::size_t layer) const noexcept {
    return final_relu || layer + 1 < layers.size();
  }
};

/// Per-batch objective breakdown.
struct StepStats {
  double total = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  double cov = 0.0;
  double svd = 0.0;
  bool cov_skipped = false;
  bool svd_skipped = false;
};

/// A trainable downstream model. Parameters and gradients are exposed as
/// matching lists of matrices.
class TuneHead {
 public:
  virtual ~TuneHead() = default;

  virtual TuneMode mode() const = 0;
  virtual std::unique_ptr<TuneHead> clone() const = 0;
  virtual std::vector<Matrix*> parameters() = 0;
  std::vector<const Matrix*> parameters() const;

  /// Objective on a batch. Fills `grads` (one per parameter) when non-null.
  virtual StepStats loss_and_grad(const Matrix& x, std::span<const Label> y,
                                  std::vector<Matrix>* grads) const = 0;
  virtual Matrix logits(const Matrix& x) const = 0;
  /// The feature space the head classifies from (Z), one row per sample.
  virtual Matrix features(const Matrix& x) const = 0;
};

class LinearHead final : public TuneHead {
 public:
  LinearHead(std::size_t in_dim, std::size_t num_classes, Rng& rng);
  explicit LinearHead(Affine fc) : fc_(std::move(fc)) {}

  TuneMode mode() const override { return TuneMode::kLinearProbe; }
  std::unique_ptr<TuneHead> clone() const override;
  std::vector<Matrix*> parameters() override;
  StepStats loss_and_grad(const Matrix& x, std::span<const Label> y,
                          std::vector<Matrix>* grads) const override;
  Matrix logits(const Matrix& x) const override;
  Matrix features(const Matrix& x) const override { return x; }

  const Affine& fc() const noexcept { return fc_; }

 private:
  Affine fc_;
};

/// Two affine layers with one ReLU between them. With `nmtune` set, the
/// regularizers act on the tapped hidden representation with the raw input
/// as F.
class MlpHead final : public TuneHead {
 public:
  MlpHead(std::size_t in_dim, std::size_t hidden_dim, std::size_t num_classes, FeatureTap tap,
          std::optional<NmTuneConfig> nmtune, Rng& rng);
  MlpHead(Affine layer1, Affine layer2, FeatureTap tap, std::optional<NmTuneConfig> nmtune);

  TuneMode mode() const override {
    return nmtune_ ? TuneMode::kNmTuneMlp : TuneMode::kMlp;
  }
  std::unique_ptr<TuneHead> clone() const override;
  std::vector<Matrix*> parameters() override;
  StepStats loss_and_grad(const Matrix& x, std::span<const Label> y,
                          std::vector<Matrix>* grads) const override;
  Matrix logits(const Matrix& x) const override;
  Matrix features(const Matrix& x) const override;

  const Affine& layer1() const noexcept { return layer1_; }
  const Affine& layer2() const noexcept { return layer2_; }
  FeatureTap tap() const noexcept { return tap_; }
  const std::optional<NmTuneConfig>& nmtune() const noexcept { return nmtune_; }

 private:
  void check() const;

  Affine layer1_;
  Affine layer2_;
  FeatureTap tap_;
  std::optional<NmTuneConfig> nmtune_;
};

/// Frozen extractor with a low-rank adapter on every layer, plus a linear
/// classifier. With `nmtune` set, each adapted layer's output (Z) is
/// regularized against the frozen layer's output (F); the terms are averaged
/// over layers.
class LoraModel final : public TuneHead {
 public:
  LoraModel(FeedForward frozen, std::size_t num_classes, std::size_t rank_reduction,
            double scaling, std::optional<NmTuneConfig> nmtune, Rng& rng);
  LoraModel(FeedForward frozen, std::vector<LoraAdapter> adapters, Affine classifier,
            std::optional<NmTuneConfig> nmtune);

  TuneMode mode() const override {
    return nmtune_ ? TuneMode::kNmTuneLora : TuneMode::kLora;
  }
  std::unique_ptr<TuneHead> clone() const override;
  std::vector<Matrix*> parameters() override;
  StepStats loss_and_grad(const Matrix& x, std::span<const Label> y,
                          std::vector<Matrix>* grads) const override;
  Matrix logits(const Matrix& x) const override;
  Matrix features(const Matrix& x) const override;

  const FeedForward& frozen() const noexcept { return frozen_; }
  const std::vector<LoraAdapter>& adapters() const noexcept { return adapters_; }
  const Affine& classifier() const noexcept { return classifier_; }
  const std::optional<NmTuneConfig>& nmtune() const noexcept { return nmtune_; }

  /// Adapted layer outputs (after activation), one per layer.
  std::vector<Matrix> adapted_activations(const Matrix& x) const;

 private:
  struct Trace {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation output of each layer
    std::vector<Matrix> low;     // x A^T of each adapter
  };
  Matrix run(const Matrix& x, Trace* trace) const;

  FeedForward frozen_;
  std::vector<LoraAdapter> adapters_;
  Affine classifier_;
  std::optional<NmTuneConfig> nmtune_;
};

/// Every extractor layer plus a linear classifier is trainable.
class FullFineTune final : public TuneHead {
 public:
  FullFineTune(FeedForward extractor, std::size_t num_classes, Rng& rng);
  FullFineTune(FeedForward extractor, Affine classifier, FeedForward initial);

  TuneMode mode() const override { return TuneMode::kFullFineTune; }
  std::unique_ptr<TuneHead> clone() const override;
  std::vector<Matrix*> parameters() override;
  StepStats loss_and_grad(const Matrix& x, std::span<const Label> y,
                          std::vector<Matrix>* grads) const override;
  Matrix logits(const Matrix& x) const override;
  Matrix features(const Matrix& x) const override { return extractor_.forward(x); }

  const FeedForward& extractor() const noexcept { return extractor_; }
  const FeedForward& initial_extractor() const noexcept { return initial_; }
  const Affine& classifier() const noexcept { return classifier_; }
  /// Frobenius norm of (current - initial) extractor parameters.
  double parameter_delta_norm() const;

 private:
  FeedForward extractor_;
  Affine classifier_;
  FeedForward initial_;
};

}  // namespace nmtune::nn

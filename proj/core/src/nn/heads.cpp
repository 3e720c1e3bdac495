#include "nmtune/nn/heads.hpp"

#include <cmath>

#include "nmtune/error.hpp"
#include "nmtune/nn/loss.hpp"

namespace nmtune::nn {

namespace {

struct ModeName {
  TuneMode mode;
  std::string_view name;
};

constexpr ModeName kModeNames[] = {
    {TuneMode::kLinearProbe, "LP"},     {TuneMode::kMlp, "MLP"},
    {TuneMode::kNmTuneMlp, "NMTUNE_MLP"}, {TuneMode::kLora, "LORA"},
    {TuneMode::kNmTuneLora, "NMTUNE_LORA"}, {TuneMode::kFullFineTune, "FULL_FT"},
};

void push_affine_grads(std::vector<Matrix>& grads, AffineGrad g) {
  grads.push_back(std::move(g.weight));
  grads.push_back(std::move(g.bias));
}

}  // namespace

std::string_view to_string(TuneMode mode) {
  for (const auto& m : kModeNames) {
    if (m.mode == mode) return m.name;
  }
  return "UNKNOWN";
}

TuneMode parse_tune_mode(std::string_view name) {
  for (const auto& m : kModeNames) {
    if (m.name == name) return m.mode;
  }
  fail(ErrorKind::kConfigError, "unknown tuning mode '" + std::string(name) + "'");
}

bool needs_extractor(TuneMode mode) {
  return mode == TuneMode::kLora || mode == TuneMode::kNmTuneLora ||
         mode == TuneMode::kFullFineTune;
}

// FeedForward ---------------------------------------------------------------

std::size_t FeedForward::in_dim() const {
  if (layers.empty()) fail(ErrorKind::kShapeError, "extractor has no layers");
  return layers.front().in_dim();
}

std::size_t FeedForward::out_dim() const {
  if (layers.empty()) fail(ErrorKind::kShapeError, "extractor has no layers");
  return layers.back().out_dim();
}

Matrix FeedForward::forward(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = layers[l].forward(h);
    if (relu_after(l)) h = relu(h);
  }
  return h;
}

std::vector<Matrix> FeedForward::activations(const Matrix& x) const {
  std::vector<Matrix> out;
  out.reserve(layers.size());
  const Matrix* h = &x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix a = layers[l].forward(*h);
    out.push_back(relu_after(l) ? relu(a) : std::move(a));
    h = &out.back();
  }
  return out;
}

std::vector<const Matrix*> TuneHead::parameters() const {
  auto mutable_params = const_cast<TuneHead*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

// LinearHead ----------------------------------------------------------------

LinearHead::LinearHead(std::size_t in_dim, std::size_t num_classes, Rng& rng)
    : fc_(Affine::init(in_dim, num_classes, rng)) {}

std::unique_ptr<TuneHead> LinearHead::clone() const { return std::make_unique<LinearHead>(*this); }

std::vector<Matrix*> LinearHead::parameters() { return {&fc_.weight, &fc_.bias}; }

Matrix LinearHead::logits(const Matrix& x) const { return fc_.forward(x); }

StepStats LinearHead::loss_and_grad(const Matrix& x, std::span<const Label> y,
                                    std::vector<Matrix>* grads) const {
  const LossWithGrad ce = cross_entropy(fc_.forward(x), y);
  if (grads != nullptr) {
    grads->clear();
    push_affine_grads(*grads, affine_backward(fc_, x, ce.grad_z, nullptr));
  }
  return {ce.value, ce.value};
}

// MlpHead -------------------------------------------------------------------

MlpHead::MlpHead(std::size_t in_dim, std::size_t hidden_dim, std::size_t num_classes,
                 FeatureTap tap, std::optional<NmTuneConfig> nmtune, Rng& rng)
    : tap_(tap), nmtune_(std::move(nmtune)) {
  layer1_ = Affine::init(in_dim, hidden_dim, rng);
  layer2_ = Affine::init(hidden_dim, num_classes, rng);
  check();
}

MlpHead::MlpHead(Affine layer1, Affine layer2, FeatureTap tap, std::optional<NmTuneConfig> nmtune)
    : layer1_(std::move(layer1)), layer2_(std::move(layer2)), tap_(tap), nmtune_(std::move(nmtune)) {
  check();
}

void MlpHead::check() const {
  if (layer1_.out_dim() != layer2_.in_dim()) {
    fail(ErrorKind::kShapeError, "MLP head layers do not chain");
  }
  if (nmtune_) {
    nmtune_->validate();
    if (nmtune_->w_mse > 0.0 && layer1_.in_dim() != layer1_.out_dim()) {
      fail(ErrorKind::kShapeError,
           "consistency term needs hidden_dim equal to the input feature dimension (" +
               std::to_string(layer1_.in_dim()) + "), got " + std::to_string(layer1_.out_dim()));
    }
  }
}

std::unique_ptr<TuneHead> MlpHead::clone() const { return std::make_unique<MlpHead>(*this); }

std::vector<Matrix*> MlpHead::parameters() {
  return {&layer1_.weight, &layer1_.bias, &layer2_.weight, &layer2_.bias};
}

Matrix MlpHead::logits(const Matrix& x) const {
  return layer2_.forward(relu(layer1_.forward(x)));
}

Matrix MlpHead::features(const Matrix& x) const {
  Matrix pre = layer1_.forward(x);
  return tap_ == FeatureTap::kPostRelu ? relu(pre) : pre;
}

StepStats MlpHead::loss_and_grad(const Matrix& x, std::span<const Label> y,
                                 std::vector<Matrix>* grads) const {
  const Matrix pre = layer1_.forward(x);
  const Matrix hidden = relu(pre);
  const LossWithGrad ce = cross_entropy(layer2_.forward(hidden), y);
  StepStats stats{ce.value, ce.value};

  const bool need_reg = nmtune_.has_value();
  if (grads == nullptr && !need_reg) return stats;

  Matrix d_hidden;
  AffineGrad g2 = affine_backward(layer2_, hidden, ce.grad_z, &d_hidden);
  Matrix d_pre;
  if (need_reg) {
    const bool post = tap_ == FeatureTap::kPostRelu;
    const Matrix& z = post ? hidden : pre;
    const Matrix ce_grad_z = post ? d_hidden : relu_backward(pre, d_hidden);
    NmTuneTotal total = nmtune_total(ce.value, ce_grad_z, x, z, *nmtune_);
    stats = {total.value, ce.value, total.mse, total.cov, total.svd, total.cov_skipped,
             total.svd_skipped};
    d_pre = post ? relu_backward(pre, total.grad_z) : std::move(total.grad_z);
  } else {
    d_pre = relu_backward(pre, d_hidden);
  }
  if (grads != nullptr) {
    grads->clear();
    push_affine_grads(*grads, affine_backward(layer1_, x, d_pre, nullptr));
    push_affine_grads(*grads, std::move(g2));
  }
  return stats;
}

// LoraModel -----------------------------------------------------------------

LoraModel::LoraModel(FeedForward frozen, std::size_t num_classes, std::size_t rank_reduction,
                     double scaling, std::optional<NmTuneConfig> nmtune, Rng& rng)
    : frozen_(std::move(frozen)), nmtune_(std::move(nmtune)) {
  for (std::size_t l = 0; l < frozen_.layers.size(); ++l) {
    adapters_.push_back(LoraAdapter::init(frozen_.layers[l], rank_reduction, scaling,
                                          "layer" + std::to_string(l), rng));
  }
  classifier_ = Affine::init(frozen_.out_dim(), num_classes, rng);
  if (nmtune_) nmtune_->validate();
}

LoraModel::LoraModel(FeedForward frozen, std::vector<LoraAdapter> adapters, Affine classifier,
                     std::optional<NmTuneConfig> nmtune)
    : frozen_(std::move(frozen)),
      adapters_(std::move(adapters)),
      classifier_(std::move(classifier)),
      nmtune_(std::move(nmtune)) {
  if (adapters_.size() != frozen_.layers.size()) {
    fail(ErrorKind::kShapeError, "one LoRA adapter per extractor layer is required");
  }
  if (nmtune_) nmtune_->validate();
}

std::unique_ptr<TuneHead> LoraModel::clone() const { return std::make_unique<LoraModel>(*this); }

std::vector<Matrix*> LoraModel::parameters() {
  std::vector<Matrix*> out;
  for (auto& a : adapters_) {
    out.push_back(&a.a);
    out.push_back(&a.b);
  }
  out.push_back(&classifier_.weight);
  out.push_back(&classifier_.bias);
  return out;
}

Matrix LoraModel::run(const Matrix& x, Trace* trace) const {
  Matrix h = x;
  for (std::size_t l = 0; l < frozen_.layers.size(); ++l) {
    const LoraAdapter& ad = adapters_[l];
    Matrix pre = frozen_.layers[l].forward(h);
    Matrix low = matmul_bt(h, ad.a);
    Matrix delta = matmul_bt(low, ad.b);
    pre.axpy(ad.scaling, delta);
    Matrix out = frozen_.relu_after(l) ? relu(pre) : pre;
    if (trace != nullptr) {
      trace->inputs.push_back(std::move(h));
      trace->pre.push_back(std::move(pre));
      trace->low.push_back(std::move(low));
    }
    h = std::move(out);
  }
  return h;
}

std::vector<Matrix> LoraModel::adapted_activations(const Matrix& x) const {
  Trace trace;
  Matrix last = run(x, &trace);
  std::vector<Matrix> out;
  for (std::size_t l = 1; l < trace.inputs.size(); ++l) out.push_back(std::move(trace.inputs[l]));
  out.push_back(std::move(last));
  return out;
}

Matrix LoraModel::logits(const Matrix& x) const { return classifier_.forward(run(x, nullptr)); }

Matrix LoraModel::features(const Matrix& x) const { return run(x, nullptr); }

StepStats LoraModel::loss_and_grad(const Matrix& x, std::span<const Label> y,
                                   std::vector<Matrix>* grads) const {
  Trace trace;
  const Matrix feats = run(x, &trace);
  const LossWithGrad ce = cross_entropy(classifier_.forward(feats), y);
  StepStats stats{ce.value, ce.value};
  const bool need_reg = nmtune_.has_value() && nmtune_->lambda > 0.0;
  if (grads == nullptr && !need_reg) return stats;

  const std::size_t layers = frozen_.layers.size();
  std::vector<Matrix> frozen_acts;
  NmTuneConfig per_layer;
  if (need_reg) {
    frozen_acts = frozen_.activations(x);
    per_layer = *nmtune_;
    per_layer.lambda = nmtune_->lambda / static_cast<double>(layers);
  }

  Matrix d_h;
  AffineGrad gc = affine_backward(classifier_, feats, ce.grad_z, &d_h);
  std::vector<Matrix> adapter_grads(2 * layers);
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& out = (l + 1 < layers) ? trace.inputs[l + 1] : feats;
    if (need_reg) {
      NmTuneTotal t = nmtune_total(0.0, d_h, frozen_acts[l], out, per_layer);
      stats.total += t.value;
      const double inv = 1.0 / static_cast<double>(layers);
      stats.mse += inv * t.mse;
      stats.cov += inv * t.cov;
      stats.svd += inv * t.svd;
      stats.cov_skipped = stats.cov_skipped || t.cov_skipped;
      stats.svd_skipped = stats.svd_skipped || t.svd_skipped;
      d_h = std::move(t.grad_z);
    }
    if (grads == nullptr && l == 0) break;
    const Matrix d_pre = frozen_.relu_after(l) ? relu_backward(trace.pre[l], d_h) : d_h;
    const LoraAdapter& ad = adapters_[l];
    // pre = frozen(h) + s * (h A^T) B^T
    Matrix d_b = matmul_at(d_pre, trace.low[l]);
    d_b *= ad.scaling;
    Matrix d_low = matmul(d_pre, ad.b);
    d_low *= ad.scaling;
    Matrix d_a = matmul_at(d_low, trace.inputs[l]);
    adapter_grads[2 * l] = std::move(d_a);
    adapter_grads[2 * l + 1] = std::move(d_b);
    if (l > 0) {
      d_h = matmul(d_pre, frozen_.layers[l].weight);
      d_h += matmul(d_low, ad.a);
    }
  }
  if (grads != nullptr) {
    *grads = std::move(adapter_grads);
    push_affine_grads(*grads, std::move(gc));
  }
  return stats;
}

// FullFineTune --------------------------------------------------------------

FullFineTune::FullFineTune(FeedForward extractor, std::size_t num_classes, Rng& rng)
    : extractor_(extractor), initial_(std::move(extractor)) {
  classifier_ = Affine::init(extractor_.out_dim(), num_classes, rng);
}

FullFineTune::FullFineTune(FeedForward extractor, Affine classifier, FeedForward initial)
    : extractor_(std::move(extractor)), classifier_(std::move(classifier)), initial_(std::move(initial)) {}

std::unique_ptr<TuneHead> FullFineTune::clone() const {
  return std::make_unique<FullFineTune>(*this);
}

std::vector<Matrix*> FullFineTune::parameters() {
  std::vector<Matrix*> out;
  for (auto& layer : extractor_.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&classifier_.weight);
  out.push_back(&classifier_.bias);
  return out;
}

Matrix FullFineTune::logits(const Matrix& x) const {
  return classifier_.forward(extractor_.forward(x));
}

StepStats FullFineTune::loss_and_grad(const Matrix& x, std::span<const Label> y,
                                      std::vector<Matrix>* grads) const {
  const std::size_t layers = extractor_.layers.size();
  std::vector<Matrix> inputs{x};
  std::vector<Matrix> pre;
  for (std::size_t l = 0; l < layers; ++l) {
    pre.push_back(extractor_.layers[l].forward(inputs.back()));
    inputs.push_back(extractor_.relu_after(l) ? relu(pre.back()) : pre.back());
  }
  const LossWithGrad ce = cross_entropy(classifier_.forward(inputs.back()), y);
  if (grads == nullptr) return {ce.value, ce.value};

  Matrix d_h;
  AffineGrad gc = affine_backward(classifier_, inputs.back(), ce.grad_z, &d_h);
  std::vector<Matrix> layer_grads(2 * layers);
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix d_pre = extractor_.relu_after(l) ? relu_backward(pre[l], d_h) : d_h;
    AffineGrad g = affine_backward(extractor_.layers[l], inputs[l], d_pre, l > 0 ? &d_h : nullptr);
    layer_grads[2 * l] = std::move(g.weight);
    layer_grads[2 * l + 1] = std::move(g.bias);
  }
  *grads = std::move(layer_grads);
  push_affine_grads(*grads, std::move(gc));
  return {ce.value, ce.value};
}

double FullFineTune::parameter_delta_norm() const {
  double sq = 0.0;
  for (std::size_t l = 0; l < extractor_.layers.size(); ++l) {
    const Matrix dw = extractor_.layers[l].weight - initial_.layers[l].weight;
    const Matrix db = extractor_.layers[l].bias - initial_.layers[l].bias;
    sq += dot(dw.values(), dw.values()) + dot(db.values(), db.values());
  }
  return std::sqrt(sq);
}

}  // namespace nmtune::nn

#include "nmtune/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nmtune/error.hpp"
#include "nmtune/nn/loss.hpp"

namespace nmtune::nn {

TrainConfig TrainConfig::defaults_for(TuneMode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.epochs = 30;
  switch (mode) {
    case TuneMode::kLinearProbe:
      cfg.lr = 0.01;
      cfg.weight_decay = 0.0;
      break;
    case TuneMode::kMlp:
    case TuneMode::kNmTuneMlp:
      cfg.lr = 1e-3;
      cfg.weight_decay = 1e-4;
      break;
    case TuneMode::kLora:
    case TuneMode::kNmTuneLora:
      cfg.lr = 2e-4;
      cfg.weight_decay = 1e-4;
      break;
    case TuneMode::kFullFineTune:
      cfg.lr = 1e-4;
      cfg.weight_decay = 1e-4;
      break;
  }
  return cfg;
}

TrainConfig TrainConfig::language_defaults_for(TuneMode mode) {
  TrainConfig cfg = defaults_for(mode);
  cfg.epochs = 10;
  cfg.schedule = Schedule::kLinear;
  cfg.lr = mode == TuneMode::kLinearProbe ? 0.01 : 1e-3;
  return cfg;
}

void TrainConfig::validate() const {
  if (epochs == 0) fail(ErrorKind::kConfigError, "epochs must be positive");
  if (batch_size == 0) fail(ErrorKind::kConfigError, "batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail(ErrorKind::kConfigError, "lr must be positive");
  if (!(weight_decay >= 0.0)) fail(ErrorKind::kConfigError, "weight_decay must be >= 0");
  if (lora_rank_reduction == 0) fail(ErrorKind::kConfigError, "lora_rank_reduction must be >= 1");
  if (nmtune) nmtune->validate();
}

std::optional<NmTuneConfig> TrainConfig::effective_nmtune() const {
  if (mode != TuneMode::kNmTuneMlp && mode != TuneMode::kNmTuneLora) return std::nullopt;
  return nmtune.value_or(NmTuneConfig{});
}

std::unique_ptr<TuneHead> make_head(const TrainConfig& cfg, std::size_t in_dim,
                                    std::size_t num_classes, const FeedForward* extractor) {
  Rng rng = make_rng(cfg.seed, "init");
  if (needs_extractor(cfg.mode)) {
    if (extractor == nullptr) {
      fail(ErrorKind::kInvalidInput, std::string(to_string(cfg.mode)) +
                                         " needs an extractor; file-ingested features have no "
                                         "parameters to tune");
    }
    if (extractor->in_dim() != in_dim) {
      fail(ErrorKind::kShapeError, "extractor input width does not match the data");
    }
  }
  switch (cfg.mode) {
    case TuneMode::kLinearProbe:
      return std::make_unique<LinearHead>(in_dim, num_classes, rng);
    case TuneMode::kMlp:
    case TuneMode::kNmTuneMlp: {
      const std::size_t hidden = cfg.hidden_dim == 0 ? in_dim : cfg.hidden_dim;
      return std::make_unique<MlpHead>(in_dim, hidden, num_classes, cfg.tap,
                                       cfg.effective_nmtune(), rng);
    }
    case TuneMode::kLora:
    case TuneMode::kNmTuneLora:
      return std::make_unique<LoraModel>(*extractor, num_classes, cfg.lora_rank_reduction,
                                         cfg.lora_scaling, cfg.effective_nmtune(), rng);
    case TuneMode::kFullFineTune:
      return std::make_unique<FullFineTune>(*extractor, num_classes, rng);
  }
  fail(ErrorKind::kConfigError, "unhandled tuning mode");
}

TrainTrace fit(TuneHead& head, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  validate(data);
  const std::size_t n = data.size();
  if (n == 0) fail(ErrorKind::kInvalidInput, "training set is empty");

  const std::size_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * batches_per_epoch;
  AdamW opt({cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps});
  Rng shuffle_rng = make_rng(cfg.seed, "shuffle");

  TrainTrace trace;
  trace.train_size = n;
  std::vector<std::size_t> order(n);
  std::vector<Matrix> grads;
  const std::vector<Matrix*> params = head.parameters();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix xb = take_rows(data.x, idx);
      std::vector<Label> yb(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = data.y[idx[i]];

      const StepStats s = head.loss_and_grad(xb, yb, &grads);
      bool finite = std::isfinite(s.total);
      for (const Matrix& g : grads) finite = finite && all_finite(g);
      if (!finite) {
        fail(ErrorKind::kTrainingDiverged,
             "non-finite objective at epoch " + std::to_string(epoch));
      }
      const double lr = scheduled_lr(cfg.schedule, trace.steps, total_steps, cfg.lr);
      opt.step(params, grads, lr);
      ++trace.steps;

      rec.total += s.total;
      rec.ce += s.ce;
      rec.mse += s.mse;
      rec.cov += s.cov;
      rec.svd += s.svd;
      rec.cov_skipped += s.cov_skipped ? 1 : 0;
      rec.svd_skipped += s.svd_skipped ? 1 : 0;
      ++rec.batches;
    }
    const double inv = 1.0 / static_cast<double>(rec.batches);
    rec.total *= inv;
    rec.ce *= inv;
    rec.mse *= inv;
    rec.cov *= inv;
    rec.svd *= inv;
    trace.epochs.push_back(rec);
  }
  if (const auto* ft = dynamic_cast<const FullFineTune*>(&head)) {
    trace.parameter_delta_norm = ft->parameter_delta_norm();
  }
  return trace;
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const FeedForward* extractor) {
  cfg.validate();
  validate(data);
  if (data.size() == 0) fail(ErrorKind::kInvalidInput, "training set is empty");
  require_finite(data.x, "training inputs");
  TrainResult out;
  out.head = make_head(cfg, data.x.cols(), data.num_classes, extractor);
  out.trace = fit(*out.head, data, cfg);
  return out;
}

Evaluation evaluate(const TuneHead& head, const Dataset& data, const std::string& dataset_id,
                    const std::string& model_id) {
  validate(data);
  Evaluation out;
  const std::vector<Label> predicted = argmax_rows(head.logits(data.x));
  out.metrics = classification_metrics(predicted, data.y, data.num_classes);
  out.spectrum = analyze(head.features(data.x), dataset_id, model_id);
  return out;
}

}  // namespace nmtune::nn

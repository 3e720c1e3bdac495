#include "nmtune/sim/simulator.hpp"

#include <cmath>
#include <numbers>

#include "nmtune/error.hpp"
#include "nmtune/nn/loss.hpp"

namespace nmtune::sim {

namespace {

std::vector<double> block_stds(const SyntheticSpec& spec) {
  std::vector<double> s(spec.input_dim, spec.within_scale);
  for (std::size_t i = spec.semantic_dim; i < spec.semantic_dim + spec.style_dim; ++i) {
    s[i] = spec.style_scale;
  }
  return s;
}

double accuracy_of(const nn::TuneHead& head, const Dataset& d) {
  const auto pred = nn::argmax_rows(head.logits(d.x));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == d.y[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_pretrain_classes < 2) fail(ErrorKind::kConfigError, "need at least 2 pre-training classes");
  if (samples_per_class == 0) fail(ErrorKind::kConfigError, "samples_per_class must be positive");
  if (semantic_dim == 0 || semantic_dim + style_dim > input_dim) {
    fail(ErrorKind::kConfigError, "semantic_dim + style_dim must fit in input_dim");
  }
  if (!(mean_scale > 0.0) || !(within_scale > 0.0) || !(style_scale > 0.0)) {
    fail(ErrorKind::kConfigError, "generator scales must be positive");
  }
}

Matrix Generator::effective_means() const {
  Matrix m = rotation.empty() ? means : matmul_bt(means, rotation);
  if (!translation.empty()) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto row = m.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += translation[c];
    }
  }
  return m;
}

Dataset Generator::sample(std::size_t per_class, Rng& rng) const {
  const std::size_t c_count = num_classes(), d = dim();
  Dataset out{Matrix(c_count * per_class, d), {}, c_count};
  out.y.reserve(c_count * per_class);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t r = 0;
  for (std::size_t c = 0; c < c_count; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++r) {
      const auto mu = means.row(c * components + k % components);
      auto row = out.x.row(r);
      for (std::size_t j = 0; j < d; ++j) row[j] = mu[j] + spread * within_std[j] * normal(rng);
      out.y.push_back(static_cast<Label>(c));
    }
  }
  if (!rotation.empty()) out.x = matmul_bt(out.x, rotation);
  if (!translation.empty()) {
    for (std::size_t i = 0; i < out.x.rows(); ++i) {
      auto row = out.x.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += translation[j];
    }
  }
  return out;
}

Generator pretrain_generator(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, "pretrain-means");
  std::normal_distribution<double> normal(0.0, 1.0);
  Generator gen{Matrix(spec.num_pretrain_classes, spec.input_dim), block_stds(spec)};
  for (std::size_t c = 0; c < spec.num_pretrain_classes; ++c) {
    for (std::size_t j = 0; j < spec.semantic_dim; ++j) gen.means(c, j) = spec.mean_scale * normal(rng);
  }
  return gen;
}

Dataset generate(const SyntheticSpec& spec) {
  const Generator gen = pretrain_generator(spec);
  Rng rng = make_rng(spec.seed, "pretrain-samples");
  return gen.sample(spec.samples_per_class, rng);
}

PretrainResult pretrain(const Dataset& data, const NoiseSpec& noise, const PretrainConfig& cfg,
                        std::uint64_t seed, const Dataset* clean_val) {
  if (noise.kind == NoiseKind::kPairSwap) {
    fail(ErrorKind::kConfigError, "pre-training supports symmetric or asymmetric noise only");
  }
  if (cfg.hidden_dim == 0 || cfg.feature_dim == 0) {
    fail(ErrorKind::kConfigError, "extractor widths must be positive");
  }
  validate(data);

  const FlipResult corrupted = apply_noise(data.y, data.num_classes, noise);
  const Dataset noisy{data.x, corrupted.labels, data.num_classes};

  Rng rng = make_rng(seed, "extractor-init");
  nn::FeedForward net;
  net.layers.push_back(nn::Affine::init(data.x.cols(), cfg.hidden_dim, rng));
  net.layers.push_back(nn::Affine::init(cfg.hidden_dim, cfg.feature_dim, rng));
  net.final_relu = cfg.final_relu;

  nn::TrainConfig train_cfg;
  train_cfg.mode = nn::TuneMode::kFullFineTune;
  train_cfg.epochs = cfg.epochs;
  train_cfg.batch_size = cfg.batch_size;
  train_cfg.lr = cfg.lr;
  train_cfg.weight_decay = cfg.weight_decay;
  train_cfg.schedule = nn::Schedule::kCosine;
  train_cfg.seed = seed;

  nn::FullFineTune model(net, data.num_classes, rng);
  PretrainResult out;
  out.trace = nn::fit(model, noisy, train_cfg);
  out.flipped = corrupted.flipped();
  out.train_accuracy = accuracy_of(model, noisy);
  if (clean_val != nullptr) out.clean_val_accuracy = accuracy_of(model, *clean_val);
  out.extractor = ToyExtractor{model.extractor(), model.classifier(), false};
  out.extractor.freeze();
  return out;
}

PretrainResult pretrain_synthetic(const SyntheticSpec& spec, const NoiseSpec& noise,
                                  const PretrainConfig& cfg, std::uint64_t seed) {
  const Generator gen = pretrain_generator(spec);
  Rng sample_rng = make_rng(spec.seed, "pretrain-samples");
  const Dataset data = gen.sample(spec.samples_per_class, sample_rng);
  Rng val_rng = make_rng(spec.seed, "pretrain-validation");
  const Dataset val = gen.sample(cfg.val_per_class, val_rng);
  return pretrain(data, noise, cfg, seed, cfg.val_per_class > 0 ? &val : nullptr);
}

std::string_view to_string(TaskKind kind) { return kind == TaskKind::kId ? "ID" : "OOD"; }

TaskKind parse_task_kind(std::string_view name) {
  if (name == "ID" || name == "id") return TaskKind::kId;
  if (name == "OOD" || name == "ood") return TaskKind::kOod;
  fail(ErrorKind::kConfigError, "unknown task kind '" + std::string(name) + "'");
}

std::string_view to_string(TaskRegime regime) {
  return regime == TaskRegime::kNovel ? "novel" : "subset";
}

TaskRegime parse_task_regime(std::string_view name) {
  if (name == "novel") return TaskRegime::kNovel;
  if (name == "subset") return TaskRegime::kSubset;
  fail(ErrorKind::kConfigError, "unknown task regime '" + std::string(name) + "'");
}

Generator downstream_generator(const SyntheticSpec& spec, const DownstreamSpec& task,
                               std::uint64_t seed) {
  spec.validate();
  if (task.num_classes < 2) fail(ErrorKind::kConfigError, "downstream task needs >= 2 classes");
  if (task.regime == TaskRegime::kSubset) {
    if (task.num_classes > spec.num_pretrain_classes) {
      fail(ErrorKind::kConfigError, "subset task has more classes than pre-training");
    }
    Generator base = pretrain_generator(spec);
    Generator gen{Matrix(task.num_classes, spec.input_dim), base.within_std};
    for (std::size_t c = 0; c < task.num_classes; ++c) {
      std::copy(base.means.row(c).begin(), base.means.row(c).end(), gen.means.row(c).begin());
    }
    return gen;
  }
  Rng rng = make_rng(seed, "downstream-means:" + task.id);
  std::normal_distribution<double> normal(0.0, 1.0);
  if (task.components_per_class == 0) fail(ErrorKind::kConfigError, "components_per_class must be >= 1");
  const std::size_t rows = task.num_classes * task.components_per_class;
  Generator gen{Matrix(rows, spec.input_dim), block_stds(spec)};
  gen.components = task.components_per_class;
  for (std::size_t c = 0; c < rows; ++c) {
    for (std::size_t j = 0; j < spec.semantic_dim; ++j) gen.means(c, j) = spec.mean_scale * normal(rng);
    for (std::size_t j = spec.semantic_dim; j < spec.semantic_dim + spec.style_dim; ++j) {
      gen.means(c, j) = task.style_mean_scale * normal(rng);
    }
  }
  return gen;
}

Generator shifted(const SyntheticSpec& spec, const Generator& gen, const ShiftParams& shift) {
  Generator out = gen;
  if (shift.is_identity()) return out;
  const std::size_t d = gen.dim();
  out.spread = gen.spread * (1.0 + shift.inflation);
  if (shift.rotation_deg != 0.0) {
    const double theta = shift.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    Matrix rot = Matrix::identity(d);
    const std::size_t planes = std::min(spec.semantic_dim, spec.style_dim);
    if (planes == 0) {
      // No style block: rotate consecutive semantic coordinate pairs instead.
      for (std::size_t i = 0; i + 1 < spec.semantic_dim; i += 2) {
        rot(i, i) = c, rot(i, i + 1) = -s, rot(i + 1, i) = s, rot(i + 1, i + 1) = c;
      }
    }
    for (std::size_t i = 0; i < planes; ++i) {
      const std::size_t j = spec.semantic_dim + i;
      rot(i, i) = c, rot(i, j) = -s, rot(j, i) = s, rot(j, j) = c;
    }
    out.rotation = gen.rotation.empty() ? rot : matmul(rot, gen.rotation);
  }
  if (shift.translation != 0.0) {
    out.translation = gen.translation.empty() ? std::vector<double>(d, 0.0) : gen.translation;
    const std::size_t lo = spec.style_dim > 0 ? spec.semantic_dim : 0;
    const std::size_t width = spec.style_dim > 0 ? spec.style_dim : spec.semantic_dim;
    const double step = shift.translation / std::sqrt(static_cast<double>(width));
    for (std::size_t j = lo; j < lo + width; ++j) out.translation[j] += step;
  }
  return out;
}

DownstreamTask make_downstream(const SyntheticSpec& spec, const DownstreamSpec& task,
                               std::uint64_t seed) {
  const Generator gen = downstream_generator(spec, task, seed);
  DownstreamTask out;
  out.id = task.id;
  out.kind = task.kind;
  Rng train_rng = make_rng(seed, "downstream-train:" + task.id);
  out.train = gen.sample(task.train_per_class, train_rng);
  if (task.kind == TaskKind::kId) {
    Rng test_rng = make_rng(seed, "downstream-test:" + task.id);
    out.tests.push_back(gen.sample(task.test_per_class, test_rng));
    out.shifts.push_back(ShiftParams{});
    return out;
  }
  if (task.shifts.empty()) fail(ErrorKind::kConfigError, "OOD task needs at least one shift");
  for (std::size_t k = 0; k < task.shifts.size(); ++k) {
    // Every variant reuses the same noise draws so variants differ only by the shift.
    Rng test_rng = make_rng(seed, "downstream-test:" + task.id);
    out.tests.push_back(shifted(spec, gen, task.shifts[k]).sample(task.test_per_class, test_rng));
    out.shifts.push_back(task.shifts[k]);
  }
  return out;
}

FeatureMatrix extract_features(const ToyExtractor& extractor, const Matrix& inputs) {
  if (!extractor.frozen) fail(ErrorKind::kInvalidInput, "extractor must be frozen before extraction");
  if (inputs.cols() != extractor.net.in_dim()) {
    fail(ErrorKind::kShapeError, "extractor expects " + std::to_string(extractor.net.in_dim()) +
                                     " input columns, got " + std::to_string(inputs.cols()));
  }
  return extractor.net.forward(inputs);
}

}  // namespace nmtune::sim

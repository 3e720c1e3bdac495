#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "nmtune/error.hpp"
#include "nmtune/metrics.hpp"
#include "nmtune/nn/heads.hpp"
#include "nmtune/nn/loss.hpp"
#include "nmtune/nn/optim.hpp"
#include "nmtune/nn/train.hpp"
#include "oracles.hpp"

using nmtune::Label;
using nmtune::Matrix;
namespace nn = nmtune::nn;

namespace {

std::vector<Label> cyclic_labels(std::size_t n, std::size_t c) {
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<Label>(i % c);
  return y;
}

nn::Affine random_affine(std::size_t in, std::size_t out, std::uint64_t seed) {
  return {oracle::random_matrix(out, in, seed, 0.5), oracle::random_matrix(1, out, seed + 1000, 0.5)};
}

nn::FeedForward random_extractor(std::size_t in, std::size_t hidden, std::size_t out,
                                 std::uint64_t seed) {
  return {{random_affine(in, hidden, seed), random_affine(hidden, out, seed + 1)}, true};
}

// Two Gaussian blobs far apart.
nmtune::Dataset blobs(std::size_t per_class, std::uint64_t seed) {
  Matrix x = oracle::random_matrix(2 * per_class, 2, seed, 0.3);
  std::vector<Label> y(2 * per_class);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    y[i] = i < per_class ? 0 : 1;
    x(i, 0) += y[i] == 0 ? -3.0 : 3.0;
  }
  return {x, y, 2};
}

}  // namespace

// ---- cross-entropy ----

TEST(CrossEntropy, UniformLogits) {
  const auto r = nn::cross_entropy(Matrix(3, 4), std::vector<Label>{0, 1, 3});
  EXPECT_NEAR(r.value, std::log(4.0), 1e-15);
}

TEST(CrossEntropy, Saturated) {
  Matrix logits(2, 3);
  logits(0, 1) = 1000.0;
  logits(1, 2) = 1000.0;
  const auto r = nn::cross_entropy(logits, std::vector<Label>{1, 2});
  EXPECT_NEAR(r.value, 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(r.value));
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  const Matrix logits = oracle::random_matrix(5, 3, 2);
  const std::vector<Label> y{0, 2, 1, 1, 0};
  const auto r = nn::cross_entropy(logits, y);
  const Matrix num = oracle::numeric_gradient(
      [&](const Matrix& t) { return nn::cross_entropy(t, y).value; }, logits);
  EXPECT_LT(oracle::max_relative_error(r.grad_z, num), 1e-6);
}

TEST(CrossEntropy, BadLabel) {
  try {
    nn::cross_entropy(Matrix(1, 3), std::vector<Label>{3});
    FAIL();
  } catch (const nmtune::Error& e) {
    EXPECT_EQ(e.kind(), nmtune::ErrorKind::kLabelError);
  }
}

TEST(Argmax, FirstMaximumWins) {
  EXPECT_EQ(nn::argmax_rows(Matrix{{1, 3, 3}, {0, 0, 0}}), (std::vector<Label>{1, 0}));
}

// ---- schedule / optimizer ----

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(nn::cosine_lr(0, 100, 0.1), 0.1);
  EXPECT_NEAR(nn::cosine_lr(100, 100, 0.1), 0.0, 1e-18);
  EXPECT_NEAR(nn::cosine_lr(50, 100, 0.1), 0.05, 1e-17);
  EXPECT_DOUBLE_EQ(nn::linear_lr(25, 100, 0.1), 0.075);
}

TEST(AdamW, FirstStepByHand) {
  Matrix p{{1.0, -2.0}};
  const Matrix g{{0.5, -0.25}};
  nn::AdamW opt({.weight_decay = 0.1});
  Matrix* params[] = {&p};
  const Matrix grads[] = {g};
  opt.step(params, grads, 0.01);
  // bias-corrected moments equal g and g^2 on step one, so the update is
  // lr * g / (|g| + eps) after decoupled decay.
  for (std::size_t i = 0; i < 2; ++i) {
    const double p0 = i == 0 ? 1.0 : -2.0;
    const double gi = g(0, i);
    EXPECT_NEAR(p(0, i), p0 * (1 - 0.01 * 0.1) - 0.01 * gi / (std::fabs(gi) + 1e-8), 1e-15);
  }
  EXPECT_EQ(opt.step_count(), 1u);
}

// ---- head gradients ----

TEST(HeadGradients, LinearProbe) {
  const Matrix x = oracle::random_matrix(10, 5, 1);
  const auto y = cyclic_labels(10, 3);
  nn::LinearHead head(random_affine(5, 3, 2));
  EXPECT_LT(oracle::head_gradient_error(head, x, y), 1e-4);
}

TEST(HeadGradients, Mlp) {
  const Matrix x = oracle::random_matrix(12, 6, 3);
  const auto y = cyclic_labels(12, 3);
  nn::MlpHead head(random_affine(6, 8, 4), random_affine(8, 3, 5), nn::FeatureTap::kPostRelu,
                   std::nullopt);
  EXPECT_LT(oracle::head_gradient_error(head, x, y), 1e-4);
}

TEST(HeadGradients, NmTuneMlpBothTaps) {
  const Matrix x = oracle::random_matrix(12, 6, 6);
  const auto y = cyclic_labels(12, 3);
  for (auto tap : {nn::FeatureTap::kPostRelu, nn::FeatureTap::kPreRelu}) {
    nn::MlpHead head(random_affine(6, 6, 7), random_affine(6, 3, 8), tap,
                     nmtune::NmTuneConfig{.lambda = 0.5});
    EXPECT_LT(oracle::head_gradient_error(head, x, y), 1e-3);
  }
}

TEST(HeadGradients, LoraWithNonzeroAdapters) {
  const Matrix x = oracle::random_matrix(10, 6, 9);
  const auto y = cyclic_labels(10, 3);
  nn::FeedForward frozen = random_extractor(6, 8, 5, 10);
  std::vector<nn::LoraAdapter> adapters;
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& layer = frozen.layers[l];
    adapters.push_back({oracle::random_matrix(2, layer.in_dim(), 20 + l, 0.3),
                        oracle::random_matrix(layer.out_dim(), 2, 30 + l, 0.3), 1.5,
                        "layer" + std::to_string(l)});
  }
  nn::LoraModel plain(frozen, adapters, random_affine(5, 3, 11), std::nullopt);
  EXPECT_LT(oracle::head_gradient_error(plain, x, y), 1e-4);
  nn::LoraModel reg(frozen, adapters, random_affine(5, 3, 11),
                    nmtune::NmTuneConfig{.lambda = 0.3, .w_svd = 0.0});
  EXPECT_LT(oracle::head_gradient_error(reg, x, y), 1e-4);
}

TEST(HeadGradients, FullFineTune) {
  const Matrix x = oracle::random_matrix(10, 4, 12);
  const auto y = cyclic_labels(10, 3);
  nn::FeedForward ex = random_extractor(4, 7, 5, 13);
  nn::FullFineTune head(ex, random_affine(5, 3, 14), ex);
  EXPECT_LT(oracle::head_gradient_error(head, x, y), 1e-4);
  EXPECT_EQ(head.parameter_delta_norm(), 0.0);
}

// ---- degenerate equivalences ----

TEST(Train, LambdaZeroNmTuneEqualsMlp) {
  const nmtune::Dataset d{oracle::random_matrix(40, 6, 1), cyclic_labels(40, 4), 4};
  nn::TrainConfig mlp = nn::TrainConfig::defaults_for(nn::TuneMode::kMlp);
  mlp.epochs = 5;
  mlp.batch_size = 16;
  mlp.seed = 77;
  nn::TrainConfig nmt = mlp;
  nmt.mode = nn::TuneMode::kNmTuneMlp;
  nmt.nmtune = nmtune::NmTuneConfig{.lambda = 0.0};
  const auto a = nn::train(d, mlp);
  const auto b = nn::train(d, nmt);
  const auto pa = static_cast<const nn::TuneHead&>(*a.head).parameters();
  const auto pb = static_cast<const nn::TuneHead&>(*b.head).parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(*pa[k], *pb[k]) << "parameter " << k;
  for (std::size_t e = 0; e < a.trace.epochs.size(); ++e)
    EXPECT_EQ(a.trace.epochs[e].total, b.trace.epochs[e].total);
}

TEST(Train, LoraAtInitIsFrozenForward) {
  const nn::FeedForward ex = random_extractor(6, 8, 5, 40);
  nn::TrainConfig cfg = nn::TrainConfig::defaults_for(nn::TuneMode::kLora);
  cfg.lora_rank_reduction = 2;
  const auto head = nn::make_head(cfg, 6, 3, &ex);
  const auto& lora = dynamic_cast<const nn::LoraModel&>(*head);
  const Matrix x = oracle::random_matrix(15, 6, 41);
  EXPECT_EQ(lora.features(x), ex.forward(x));
  EXPECT_EQ(lora.logits(x), lora.classifier().forward(ex.forward(x)));
  for (const auto& ad : lora.adapters()) {
    EXPECT_EQ(ad.rank(), ad.a.cols() / 2);
    for (double v : ad.b.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Train, SeparableBlobsLinearProbe) {
  const auto d = blobs(50, 3);
  nn::TrainConfig cfg = nn::TrainConfig::defaults_for(nn::TuneMode::kLinearProbe);
  cfg.epochs = 200;
  const auto r = nn::train(d, cfg);
  EXPECT_EQ(nn::evaluate(*r.head, d).metrics.accuracy, 1.0);
  EXPECT_EQ(r.trace.steps, 200u * 2u);  // 100 samples, batch 64
}

TEST(Train, DeterministicForSeed) {
  const auto d = blobs(30, 4);
  nn::TrainConfig cfg = nn::TrainConfig::defaults_for(nn::TuneMode::kMlp);
  cfg.epochs = 3;
  const auto a = nn::train(d, cfg), b = nn::train(d, cfg);
  EXPECT_EQ(a.head->logits(d.x), b.head->logits(d.x));
  cfg.seed = 1;
  EXPECT_NE(nn::train(d, cfg).head->logits(d.x), a.head->logits(d.x));
}

TEST(Train, FullFineTuneReportsDelta) {
  const auto d = blobs(20, 5);
  const nn::FeedForward ex = random_extractor(2, 4, 3, 6);
  nn::TrainConfig cfg = nn::TrainConfig::defaults_for(nn::TuneMode::kFullFineTune);
  cfg.epochs = 2;
  const auto r = nn::train(d, cfg, &ex);
  ASSERT_TRUE(r.trace.parameter_delta_norm.has_value());
  EXPECT_GT(*r.trace.parameter_delta_norm, 0.0);
}

TEST(Train, ExtractorModesNeedExtractor) {
  const auto d = blobs(5, 1);
  EXPECT_THROW(nn::train(d, nn::TrainConfig::defaults_for(nn::TuneMode::kLora)), nmtune::Error);
}

TEST(Train, NmTuneNeedsMatchingHiddenWidth) {
  const auto d = blobs(5, 1);
  nn::TrainConfig cfg = nn::TrainConfig::defaults_for(nn::TuneMode::kNmTuneMlp);
  cfg.hidden_dim = 7;
  try {
    nn::train(d, cfg);
    FAIL();
  } catch (const nmtune::Error& e) {
    EXPECT_EQ(e.kind(), nmtune::ErrorKind::kShapeError);
  }
}

TEST(Train, DivergenceIsReported) {
  auto d = blobs(10, 2);
  d.x *= 1e307;  // finite inputs, logits overflow
  nn::TrainConfig cfg = nn::TrainConfig::defaults_for(nn::TuneMode::kLinearProbe);
  cfg.epochs = 1;
  try {
    nn::train(d, cfg);
    FAIL();
  } catch (const nmtune::Error& e) {
    EXPECT_EQ(e.kind(), nmtune::ErrorKind::kTrainingDiverged) << nmtune::to_string(e.kind());
  }
  d.x *= 100.0;
  EXPECT_THROW(nn::train(d, cfg), nmtune::Error);
}

// ---- metrics ----

TEST(Metrics, Perfect) {
  const std::vector<Label> y{0, 1, 2, 1};
  const auto m = nmtune::classification_metrics(y, y, 3);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
}

TEST(Metrics, ConstantPredictor) {
  const std::vector<Label> truth{0, 0, 1, 1};
  const std::vector<Label> pred{0, 0, 0, 0};
  const auto m = nmtune::classification_metrics(pred, truth, 2);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0 / 3.0);
}

TEST(Metrics, ConfusionOracle) {
  const Matrix logits = oracle::random_matrix(200, 5, 9);
  const auto pred = nn::argmax_rows(logits);
  const auto truth = cyclic_labels(200, 5);
  const auto m = nmtune::classification_metrics(pred, truth, 5);
  std::size_t correct = 0;
  double f1_sum = 0;
  for (Label c = 0; c < 5; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < 200; ++i) {
      tp += pred[i] == c && truth[i] == c;
      fp += pred[i] == c && truth[i] != c;
      fn += pred[i] != c && truth[i] == c;
      EXPECT_LE(m.confusion[truth[i]][pred[i]], 200u);
    }
    correct += tp;
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    EXPECT_NEAR(m.per_class_f1[c], f1, 1e-15);
    f1_sum += f1;
  }
  EXPECT_DOUBLE_EQ(m.accuracy, correct / 200.0);
  EXPECT_NEAR(m.macro_f1, f1_sum / 5, 1e-15);
}

TEST(Metrics, AbsentClassCountsAsZero) {
  const std::vector<Label> y{0, 0, 1};
  const auto m = nmtune::classification_metrics(y, y, 3);
  ASSERT_EQ(m.absent_classes, (std::vector<Label>{2}));
  EXPECT_DOUBLE_EQ(m.macro_f1, 2.0 / 3.0);
}

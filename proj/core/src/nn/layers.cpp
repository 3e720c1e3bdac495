#include "nmtune/nn/layers.hpp"

#include <cmath>

#include "nmtune/error.hpp"

namespace nmtune::nn {

namespace {

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : m.values()) v = dist(rng);
}

}  // namespace

Affine Affine::init(std::size_t in, std::size_t out, Rng& rng) {
  Affine layer = zeros(in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  fill_uniform(layer.weight, bound, rng);
  fill_uniform(layer.bias, bound, rng);
  return layer;
}

Affine Affine::zeros(std::size_t in, std::size_t out) {
  return Affine{Matrix(out, in), Matrix(1, out)};
}

Matrix Affine::forward(const Matrix& x) const {
  if (x.cols() != in_dim()) {
    fail(ErrorKind::kShapeError, "affine layer expects " + std::to_string(in_dim()) +
                                     " inputs, got " + std::to_string(x.cols()));
  }
  Matrix y = matmul_bt(x, weight);
  const auto b = bias.row(0);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
  return y;
}

AffineGrad affine_backward(const Affine& layer, const Matrix& x, const Matrix& dy, Matrix* dx) {
  AffineGrad g{matmul_at(dy, x), Matrix(1, layer.out_dim())};
  auto gb = g.bias.row(0);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    const auto row = dy.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
  }
  if (dx != nullptr) *dx = matmul(dy, layer.weight);
  return g;
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& pre, const Matrix& dy) {
  Matrix dx = dy;
  const auto p = pre.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(p[i] > 0.0)) d[i] = 0.0;
  }
  return dx;
}

LoraAdapter LoraAdapter::init(const Affine& layer, std::size_t rank_reduction, double scaling,
                              std::string attached_layer, Rng& rng) {
  if (rank_reduction == 0) fail(ErrorKind::kConfigError, "LoRA rank reduction must be positive");
  const std::size_t rank = std::max<std::size_t>(1, layer.in_dim() / rank_reduction);
  LoraAdapter adapter{Matrix(rank, layer.in_dim()), Matrix(layer.out_dim(), rank), scaling,
                      std::move(attached_layer)};
  fill_uniform(adapter.a, 1.0 / std::sqrt(static_cast<double>(layer.in_dim())), rng);
  return adapter;
}

}  // namespace nmtune::nn

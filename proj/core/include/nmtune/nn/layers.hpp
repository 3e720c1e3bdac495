#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nmtune/matrix.hpp"
#include "nmtune/rng.hpp"

namespace nmtune::nn {

/// y = x W^T + b, with W stored out x in and b as a 1 x out row.
struct Affine {
  Matrix weight;
  Matrix bias;

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights and biases.
  static Affine init(std::size_t in, std::size_t out, Rng& rng);
  static Affine zeros(std::size_t in, std::size_t out);

  Matrix forward(const Matrix& x) const;
};

struct AffineGrad {
  Matrix weight;
  Matrix bias;
};

/// Gradients of an affine layer given its input and dL/dy. Returns dL/dx in
/// `dx` when non-null.
AffineGrad affine_backward(const Affine& layer, const Matrix& x, const Matrix& dy,
                           Matrix* dx);

Matrix relu(const Matrix& x);
/// dy masked by (pre > 0).
Matrix relu_backward(const Matrix& pre, const Matrix& dy);

/// Low-rank update attached to an affine layer: y += scaling * (x A^T) B^T.
struct LoraAdapter {
  Matrix a;  ///< rank x in
  Matrix b;  ///< out x rank, zero at init
  double scaling = 1.0;
  std::string attached_layer;

  std::size_t rank() const noexcept { return a.rows(); }

  /// rank = max(1, in / rank_reduction); a uniform(+-1/sqrt(in)), b = 0.
  static LoraAdapter init(const Affine& layer, std::size_t rank_reduction, double scaling,
                          std::string attached_layer, Rng& rng);
};

}  // namespace nmtune::nn

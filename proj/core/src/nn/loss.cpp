#include "nmtune/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "nmtune/error.hpp"

namespace nmtune::nn {

LossWithGrad cross_entropy(const Matrix& logits, std::span<const Label> labels) {
  if (logits.rows() != labels.size()) {
    fail(ErrorKind::kShapeError, "cross_entropy: logits rows and label count differ");
  }
  if (logits.rows() == 0) fail(ErrorKind::kInvalidInput, "cross_entropy: empty batch");
  validate_labels(labels, logits.cols());

  const std::size_t m = logits.rows(), c = logits.cols();
  const double inv_m = 1.0 / static_cast<double>(m);
  LossWithGrad out{0.0, Matrix(m, c)};
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double v : row) denom += std::exp(v - mx);
    const double log_denom = std::log(denom);
    const auto y = static_cast<std::size_t>(labels[r]);
    out.value -= row[y] - mx - log_denom;
    auto g = out.grad_z.row(r);
    for (std::size_t k = 0; k < c; ++k) g[k] = std::exp(row[k] - mx - log_denom) * inv_m;
    g[y] -= inv_m;
  }
  out.value *= inv_m;
  return out;
}

std::vector<Label> argmax_rows(const Matrix& logits) {
  std::vector<Label> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    out[r] = static_cast<Label>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace nmtune::nn

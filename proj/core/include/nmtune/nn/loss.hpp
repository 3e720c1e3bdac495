#pragma once

#include <span>

#include "nmtune/dataset.hpp"
#include "nmtune/regularizers.hpp"

namespace nmtune::nn {

/// Mean negative log-softmax of the true class. grad_z holds dL/dlogits,
/// (softmax - onehot) / M. Throws LabelError for labels outside [0, C).
LossWithGrad cross_entropy(const Matrix& logits, std::span<const Label> labels);

/// Row-wise argmax (first maximum wins).
std::vector<Label> argmax_rows(const Matrix& logits);

}  // namespace nmtune::nn

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nmtune/matrix.hpp"

namespace nmtune {

using Label = std::int32_t;

/// Inputs (or features) with one class label per row.
struct Dataset {
  Matrix x;
  std::vector<Label> y;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return y.size(); }
};

/// Throws LabelError for labels outside [0, num_classes) and ShapeError when
/// the label count does not match the row count.
void validate_labels(std::span<const Label> labels, std::size_t num_classes);
void validate(const Dataset& d);

Dataset subset(const Dataset& d, std::span<const std::size_t> indices);

}  // namespace nmtune

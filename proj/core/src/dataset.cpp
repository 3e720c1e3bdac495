#include "nmtune/dataset.hpp"

#include <string>

#include "nmtune/error.hpp"

namespace nmtune {

void validate_labels(std::span<const Label> labels, std::size_t num_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      fail(ErrorKind::kLabelError, "label " + std::to_string(labels[i]) + " at index " +
                                       std::to_string(i) + " outside [0, " +
                                       std::to_string(num_classes) + ")");
    }
  }
}

void validate(const Dataset& d) {
  if (d.x.rows() != d.y.size()) {
    fail(ErrorKind::kShapeError, "dataset has " + std::to_string(d.x.rows()) + " rows but " +
                                     std::to_string(d.y.size()) + " labels");
  }
  validate_labels(d.y, d.num_classes);
}

Dataset subset(const Dataset& d, std::span<const std::size_t> indices) {
  Dataset out{take_rows(d.x, indices), {}, d.num_classes};
  out.y.reserve(indices.size());
  for (std::size_t i : indices) out.y.push_back(d.y[i]);
  return out;
}

}  // namespace nmtune

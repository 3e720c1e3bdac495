#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nmtune/dataset.hpp"

namespace nmtune {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  /// Classes that appear in neither predictions nor labels; counted as F1 = 0.
  std::vector<Label> absent_classes;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

ClassificationMetrics classification_metrics(std::span<const Label> predicted,
                                             std::span<const Label> truth,
                                             std::size_t num_classes);

}  // namespace nmtune

#include "nmtune/metrics.hpp"

#include "nmtune/error.hpp"

namespace nmtune {

ClassificationMetrics classification_metrics(std::span<const Label> predicted,
                                             std::span<const Label> truth,
                                             std::size_t num_classes) {
  if (predicted.size() != truth.size()) {
    fail(ErrorKind::kShapeError, "prediction and label counts differ");
  }
  if (truth.empty()) fail(ErrorKind::kInvalidInput, "cannot score an empty set");
  validate_labels(predicted, num_classes);
  validate_labels(truth, num_classes);

  ClassificationMetrics out;
  out.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++out.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    if (truth[i] == predicted[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

  out.per_class_f1.resize(num_classes);
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t tp = out.confusion[c][c];
    std::size_t fp = 0, fn = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
      if (k == c) continue;
      fp += out.confusion[k][c];
      fn += out.confusion[c][k];
    }
    const std::size_t denom = 2 * tp + fp + fn;
    if (denom == 0) {
      out.absent_classes.push_back(static_cast<Label>(c));
      out.per_class_f1[c] = 0.0;
    } else {
      out.per_class_f1[c] = 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
    sum += out.per_class_f1[c];
  }
  out.macro_f1 = sum / static_cast<double>(num_classes);
  return out;
}

}  // namespace nmtune

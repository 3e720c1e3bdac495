#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nmtune/matrix.hpp"

namespace nmtune::nn {

enum class Schedule { kCosine, kLinear };

/// base_lr * (1 + cos(pi * step / total_steps)) / 2
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr);
/// base_lr * (1 - step / total_steps)
double linear_lr(std::size_t step, std::size_t total_steps, double base_lr);
double scheduled_lr(Schedule schedule, std::size_t step, std::size_t total_steps,
                    double base_lr);

struct AdamWOptions {
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AdamW with decoupled weight decay. Moments are allocated on the first step
/// to match the parameter shapes.
class AdamW {
 public:
  explicit AdamW(AdamWOptions options = {}) : options_(options) {}

  void step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr);

  std::size_t step_count() const noexcept { return step_; }
  const AdamWOptions& options() const noexcept { return options_; }
  const std::vector<Matrix>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix>& second_moments() const noexcept { return v_; }

 private:
  AdamWOptions options_;
  std::size_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace nmtune::nn

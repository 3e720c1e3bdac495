#include "nmtune/nn/optim.hpp"

#include <cmath>
#include <numbers>

#include "nmtune/error.hpp"

namespace nmtune::nn {

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr) {
  if (total_steps == 0) return base_lr;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

double linear_lr(std::size_t step, std::size_t total_steps, double base_lr) {
  if (total_steps == 0) return base_lr;
  return base_lr * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

double scheduled_lr(Schedule schedule, std::size_t step, std::size_t total_steps,
                    double base_lr) {
  return schedule == Schedule::kCosine ? cosine_lr(step, total_steps, base_lr)
                                       : linear_lr(step, total_steps, base_lr);
}

void AdamW::step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr) {
  if (params.size() != grads.size()) {
    fail(ErrorKind::kShapeError, "AdamW: parameter and gradient counts differ");
  }
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }
  if (m_.size() != params.size()) fail(ErrorKind::kShapeError, "AdamW: parameter set changed");
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double decay = 1.0 - lr * options_.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->values();
    const auto g = grads[k].values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    if (g.size() != p.size() || m.size() != p.size()) {
      fail(ErrorKind::kShapeError, "AdamW: gradient shape does not match parameter");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] = p[i] * decay - lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

}  // namespace nmtune::nn

#include "mtnews/optimizer.h"

#include <cmath>

namespace mtnews {

double global_grad_norm(std::span<Tensor* const> tensors) {
  double sq = 0.0;
  for (const Tensor* t : tensors) sq += t->grad.squaredNorm();
  return std::sqrt(sq);
}

double SgdOptimizer::step(std::span<Tensor* const> tensors) {
  const double norm = global_grad_norm(tensors);
  const double scale =
      (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;
  for (Tensor* t : tensors) {
    if (config_.momentum == 0.0) {
      t->value -= (config_.learning_rate * scale) * t->grad;
      continue;
    }
    auto [it, inserted] = velocity_.try_emplace(t->name);
    Matrix& v = it->second;
    if (inserted) v = Matrix::Zero(t->value.rows(), t->value.cols());
    v = config_.momentum * v + scale * t->grad;
    t->value -= config_.learning_rate * v;
  }
  return norm;
}

}  // namespace mtnews

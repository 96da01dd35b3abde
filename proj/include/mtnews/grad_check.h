#ifndef MTNEWS_GRAD_CHECK_H_
#define MTNEWS_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "mtnews/tensor.h"

namespace mtnews {

struct GradCheckOptions {
  double step = 1e-3;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};

// Evaluates the loss at the current parameter values. When `with_grad` is
// set it must also accumulate the analytic gradient into each Tensor::grad
// (grad_check zeroes the gradients beforehand).
using LossFunction = std::function<double(bool with_grad)>;

// Compares analytic gradients with central differences
// (loss(θ+h) - loss(θ-h)) / 2h on sampled scalar parameters. Samples cycle
// through the tensors so every tensor is visited; the entry within a tensor
// is drawn uniformly. Relative error is |a - n| / max(|a|, |n|, 1e-8).
// Parameter values are restored afterwards. Throws DomainError when a loss
// evaluation is not finite.
GradCheckResult grad_check(std::span<Tensor* const> params, const LossFunction& loss,
                           const GradCheckOptions& options = {});

}  // namespace mtnews

#endif  // MTNEWS_GRAD_CHECK_H_

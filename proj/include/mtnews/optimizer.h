#ifndef MTNEWS_OPTIMIZER_H_
#define MTNEWS_OPTIMIZER_H_

#include <map>
#include <span>
#include <string>

#include "mtnews/tensor.h"

namespace mtnews {

struct SgdConfig {
  double learning_rate = 2e-5;
  double momentum = 0.0;
  // Global gradient norm cap; <= 0 disables clipping.
  double clip_norm = 1.0;
};

// Stochastic gradient descent with heavy-ball momentum. Velocity buffers are
// keyed by tensor name, so only the tensors passed to a step move.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig config) : config_(config) {}

  // Clips the joint gradient of `tensors` to clip_norm, then updates them.
  // Returns the gradient norm before clipping.
  double step(std::span<Tensor* const> tensors);

  const SgdConfig& config() const { return config_; }

 private:
  SgdConfig config_;
  std::map<std::string, Matrix> velocity_;
};

double global_grad_norm(std::span<Tensor* const> tensors);

}  // namespace mtnews

#endif  // MTNEWS_OPTIMIZER_H_

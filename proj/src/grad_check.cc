#include "mtnews/grad_check.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mtnews/common.h"

namespace mtnews {

GradCheckResult grad_check(std::span<Tensor* const> params, const LossFunction& loss,
                           const GradCheckOptions& options) {
  if (params.empty()) throw DomainError("grad_check: no parameters");
  for (Tensor* t : params) t->zero_grad();
  const double base = loss(true);
  if (!std::isfinite(base)) throw DomainError("grad_check: loss is not finite");

  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (Tensor* t : params) analytic.push_back(t->grad);

  // Skip empty tensors when cycling.
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.size() > 0) usable.push_back(i);
  }
  if (usable.empty()) throw DomainError("grad_check: all parameter tensors are empty");

  Rng rng(options.seed);
  GradCheckResult result;
  const double h = options.step;
  for (std::size_t s = 0; s < options.samples; ++s) {
    const std::size_t ti = usable[s % usable.size()];
    Tensor& t = *params[ti];
    const auto entry = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(t.value.size())));
    double& theta = t.value.data()[entry];
    const double saved = theta;
    theta = saved + h;
    const double plus = loss(false);
    theta = saved - h;
    const double minus = loss(false);
    theta = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw DomainError("grad_check: loss is not finite at a perturbed point of " + t.name);
    }
    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic[ti].data()[entry];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (result.checked == 0 || rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_tensor = t.name;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace mtnews

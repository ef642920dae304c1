#pragma once

// Central finite-difference validation of analytic gradients. The loss
// callable must be a deterministic function of the parameters (dropout off,
// batch norm on frozen running stats), so each probe is a pure re-evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mhnn/tensor.hpp"

namespace mhnn::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

// params: named tensors whose grad buffers already hold the analytic
// gradient of loss_fn. max_per_tensor == 0 checks every element.
template <typename T, typename LossFn>
GradCheckReport finite_difference_check(
    const std::vector<std::pair<std::string, Tensor<T>*>>& params,
    LossFn&& loss_fn, double h = 1e-5, std::size_t max_per_tensor = 0) {
  GradCheckReport report;
  for (const auto& [name, p] : params) {
    const std::size_t count = max_per_tensor == 0
                                  ? p->numel()
                                  : std::min(max_per_tensor, p->numel());
    const std::size_t stride = p->numel() / std::max<std::size_t>(count, 1);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t i = j * std::max<std::size_t>(stride, 1);
      const T original = p->data[i];
      p->data[i] = original + static_cast<T>(h);
      const double up = static_cast<double>(loss_fn());
      p->data[i] = original - static_cast<T>(h);
      const double down = static_cast<double>(loss_fn());
      p->data[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = static_cast<double>(p->grad[i]);
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace mhnn::nn

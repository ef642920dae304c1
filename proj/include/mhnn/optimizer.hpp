#pragma once

// Adam with bias correction. Gradients are read from each parameter's grad
// buffer; callers zero those between steps.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mhnn/common.hpp"
#include "mhnn/tensor.hpp"

namespace mhnn::nn {

template <typename T>
struct AdamState {
  std::size_t step_count = 0;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<T>> m, v;

  void init(const std::vector<Tensor<T>*>& params) {
    m.clear();
    v.clear();
    for (const Tensor<T>* p : params) {
      m.emplace_back(p->numel(), T(0));
      v.emplace_back(p->numel(), T(0));
    }
    step_count = 0;
  }
};

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, AdamState<T>& state) {
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          "adam state shape mismatch");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T one_m_b1 = static_cast<T>(1.0 - state.beta1);
  const T one_m_b2 = static_cast<T>(1.0 - state.beta2);
  const T lr = static_cast<T>(state.lr);
  const T eps = static_cast<T>(state.eps);
  const T ibc1 = static_cast<T>(1.0 / bc1);
  const T ibc2 = static_cast<T>(1.0 / bc2);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = *params[pi];
    require(p.grad.size() == p.data.size(), "adam state shape mismatch");
    require(state.m[pi].size() == p.data.size(), "adam state shape mismatch");
    T* m = state.m[pi].data();
    T* v = state.v[pi].data();
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const T g = p.grad[i];
      m[i] = b1 * m[i] + one_m_b1 * g;
      v[i] = b2 * v[i] + one_m_b2 * g * g;
      const T mhat = m[i] * ibc1;
      const T vhat = v[i] * ibc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace mhnn::nn

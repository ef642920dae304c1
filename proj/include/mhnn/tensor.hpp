#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "mhnn/common.hpp"

namespace mhnn {

// Dense row-major array with a shape tag and an optional gradient buffer.
// grad is empty unless something tracks gradients through this tensor.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;
  std::vector<T> grad;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s, T init = T(0))
      : shape(std::move(s)), data(numel_of(shape), init) {}

  Tensor(std::vector<std::size_t> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    require(numel_of(shape) == data.size(), "tensor shape/data size mismatch");
  }

  static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  T& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const {
    return data[i * shape[1] + j];
  }
  T& at(std::size_t b, std::size_t c, std::size_t t) {
    return data[(b * shape[1] + c) * shape[2] + t];
  }
  const T& at(std::size_t b, std::size_t c, std::size_t t) const {
    return data[(b * shape[1] + c) * shape[2] + t];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    std::transform(data.begin(), data.end(), out.data.begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }
};

}  // namespace mhnn

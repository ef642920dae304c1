#pragma once

// Reverse-mode tape. A forward pass appends nodes in topological order;
// backward() seeds the scalar loss and walks the tape in reverse, with each
// node's closure scattering gradients to its inputs. Parameters enter the
// graph through bind(), whose closure accumulates into the parameter's own
// grad buffer; binding the same tensor twice (weight sharing) therefore sums
// contributions. Repeated backward() calls without zeroing grads accumulate.

#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "mhnn/common.hpp"
#include "mhnn/tensor.hpp"

namespace mhnn {

struct Var {
  int idx = -1;
  bool ok() const { return idx >= 0; }
};

template <typename T>
class Tape {
 public:
  Var input(Tensor<T> value) { return make(std::move(value)); }

  // Leaf backed by an external parameter tensor.
  Var bind(Tensor<T>& param) {
    Var v = make(param);
    Tensor<T>* p = &param;
    set_back(v, [v, p](Tape<T>& t) {
      p->ensure_grad();
      const auto& g = t.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
    });
    return v;
  }

  Var make(Tensor<T> value) {
    Node node;
    node.grad.assign(value.numel(), T(0));
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void set_back(Var v, std::function<void(Tape<T>&)> fn) {
    nodes_[static_cast<std::size_t>(v.idx)].back = std::move(fn);
  }

  const Tensor<T>& val(Var v) const {
    return nodes_[static_cast<std::size_t>(v.idx)].value;
  }

  std::vector<T>& grad(Var v) {
    return nodes_[static_cast<std::size_t>(v.idx)].grad;
  }

  void backward(Var loss) {
    require(loss.ok() && static_cast<std::size_t>(loss.idx) < nodes_.size(),
            "backward before forward");
    require(nodes_[static_cast<std::size_t>(loss.idx)].value.numel() == 1,
            "backward requires a scalar loss");
    nodes_[static_cast<std::size_t>(loss.idx)].grad[0] += T(1);
    for (int i = loss.idx; i >= 0; --i) {
      auto& node = nodes_[static_cast<std::size_t>(i)];
      if (node.back) node.back(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;
    std::function<void(Tape<T>&)> back;
  };
  // deque keeps value/grad references stable while the tape grows
  std::deque<Node> nodes_;
};

}  // namespace mhnn

// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reltrack/tensor/kernels.hpp"
#include "reltrack/tensor/tensor.hpp"

namespace reltrack {

/// Handle to a value recorded on a Graph.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape. Ops append nodes in evaluation order, so the tape is
/// already topologically sorted and backward walks it in reverse.
///
/// A graph built with `record_gradients = false` keeps forward values only,
/// which is what inference and timing paths use.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& grad_out)>;

  explicit Graph(bool record_gradients = true, kernels::Exec exec = kernels::Exec::kParallel)
      : recording_(record_gradients), exec_(exec) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }
  kernels::Exec exec() const { return exec_; }

  /// Leaf whose gradient is readable through grad() after backward().
  Var input(Tensor<T> value) { return push(std::move(value), nullptr, nullptr); }

  /// Leaf bound to a parameter; backward() adds into p.grad. `p` must outlive the graph.
  Var param(Parameter<T>& p) { return push(p.value, nullptr, &p); }

  /// Records an op result. Non-finite forward values are rejected.
  Var record(Tensor<T> value, BackwardFn fn, std::string_view op) {
    value.require_finite(op);
    return push(std::move(value), recording_ ? std::move(fn) : nullptr, nullptr);
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  const Shape& shape(Var v) const { return value(v).shape(); }

  /// Gradient of the last backward() target with respect to v (zeros if unreached).
  Tensor<T> grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.grad.empty() ? Tensor<T>(n.value.shape()) : n.grad;
  }

  /// Mutable gradient buffer for v, allocated as zeros on first use.
  std::span<T> grad_buffer(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad.data();
  }

  void backward(Var output) {
    if (!recording_) throw std::logic_error("backward() on a graph built without gradient recording");
    if (value(output).size() != 1) throw DimensionError("backward() needs a scalar output");
    for (Node& n : nodes_) n.grad = Tensor<T>();
    grad_buffer(output)[0] = T{1};
    for (std::size_t i = output.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) {
        n.backward(*this, n.grad);
      } else if (n.param != nullptr) {
        auto dst = n.param->grad.data();
        auto src = n.grad.data();
        for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var push(Tensor<T> value, BackwardFn fn, Parameter<T>* p) {
    if (p != nullptr && p->grad.shape() != p->value.shape()) p->zero_grad();
    nodes_.push_back(Node{std::move(value), Tensor<T>(), std::move(fn), p});
    return Var{nodes_.size() - 1};
  }

  bool recording_;
  kernels::Exec exec_;
  std::deque<Node> nodes_;  // deque: references to values stay valid as the tape grows
};

}  // namespace reltrack

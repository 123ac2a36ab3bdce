// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pdm/tensor.hpp"

namespace pdm::ad {

// Define-by-run reverse-mode autodiff over Tensor<T>. Each op records a
// closure that scatters the node's output gradient into its parents.

namespace detail {
inline thread_local int no_grad_depth = 0;
}

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

// RAII guard: ops built inside the scope record no tape (used for sampling
// and evaluation so memory stays flat).
struct NoGradGuard {
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily on first accumulation
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // scatters this->grad into parents
  bool requires_grad = false;

  explicit Node(Tensor<T> v) : value(std::move(v)) {}

  // Releasing a long op chain through default shared_ptr destructors would
  // recurse node-by-node and overflow the stack; unlink iteratively instead.
  ~Node() {
    std::vector<std::shared_ptr<Node>> pending(std::move(parents));
    parents.clear();
    while (!pending.empty()) {
      std::shared_ptr<Node> p = std::move(pending.back());
      pending.pop_back();
      if (p && p.use_count() == 1) {
        for (auto& gp : p->parents) pending.push_back(std::move(gp));
        p->parents.clear();
      }
    }
  }

  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  void accumulate(const Tensor<T>& g) {
    if (!grad.defined()) grad = Tensor<T>::zeros(value.shape());
    T* dst = grad.data();
    const T* src = g.data();
    for (size_t i = 0; i < grad.numel(); ++i) dst[i] += src[i];
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> constant(Tensor<T> v) {
  return std::make_shared<Node<T>>(std::move(v));
}

template <typename T>
Var<T> leaf(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>(std::move(v));
  n->requires_grad = grad_enabled();
  return n;
}

// Wraps a computed value into a tape node. The backward closure is dropped
// when no parent needs gradients (or a NoGradGuard is active), so inference
// graphs do not retain their inputs.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>(std::move(value));
  bool need = false;
  if (grad_enabled())
    for (const auto& p : parents) need = need || (p && p->requires_grad);
  if (need) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

// Reverse pass from `root` (seeded with d(root)/d(root) = 1 everywhere,
// i.e. the gradient of sum(root)). Iterative topological order, so deep
// graphs cannot overflow the stack.
template <typename T>
void backward(const Var<T>& root) {
  if (!root->requires_grad) return;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->accumulate(Tensor<T>::full(root->value.shape(), T(1)));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->grad.defined()) n->backward_fn(*n);
  }
}

template <typename T>
void zero_grad(const Var<T>& v) {
  v->grad = Tensor<T>();
}

}  // namespace pdm::ad

// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pdm/networks.hpp"

namespace pdm {

// Adaptive moment estimation (arXiv:1412.6980), no weight decay. Moment
// buffers parallel the parameter list order, so the same ParamMap order must
// be used on every step (and is what checkpoints serialize).
template <typename T>
struct Adam {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::vector<Tensor<T>> m, v;

  void step(const ParamMap<T>& params) {
    if (m.empty()) {
      for (const auto& [name, p] : params) {
        m.push_back(Tensor<T>::zeros(p->value.shape()));
        v.push_back(Tensor<T>::zeros(p->value.shape()));
      }
    }
    if (m.size() != params.size())
      throw ConfigError("optimizer state does not match parameter list");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    for (size_t pi = 0; pi < params.size(); ++pi) {
      auto& node = *params[pi].second;
      Tensor<T>& mm = m[pi];
      Tensor<T>& vv = v[pi];
      const bool has_g = node.grad.defined();
      for (size_t i = 0; i < node.value.numel(); ++i) {
        const double g = has_g ? double(node.grad[i]) : 0.0;
        mm[i] = T(beta1 * mm[i] + (1.0 - beta1) * g);
        vv[i] = T(beta2 * vv[i] + (1.0 - beta2) * g * g);
        const double mhat = mm[i] / bc1;
        const double vhat = vv[i] / bc2;
        node.value[i] -= T(lr * mhat / (std::sqrt(vhat) + eps));
      }
      node.grad = Tensor<T>();
    }
  }
};

}  // namespace pdm

// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdm/autodiff.hpp"
#include "pdm/errors.hpp"
#include "pdm/rng.hpp"
#include "pdm/tensor.hpp"

namespace pdm {

// Call counters used by tests to prove control-flow contracts (supervised
// training must never run assignment or the compactness penalty).
inline std::atomic<uint64_t> g_assign_calls{0};
inline std::atomic<uint64_t> g_compact_evals{0};

// K learnable D-dimensional prototype vectors. In supervised mode each
// prototype is bound to one class id (a bijection).
template <typename T>
struct PrototypeBank {
  size_t K = 0;
  size_t D = 0;
  Tensor<T> e;  // [K, D]
  std::optional<std::vector<int>> labels;

  static PrototypeBank init_random(size_t K, size_t D, Rng& rng, double std = 0.02) {
    if (K < 1 || D < 1) throw ConfigError("prototype bank needs K >= 1, D >= 1");
    PrototypeBank b;
    b.K = K;
    b.D = D;
    b.e = Tensor<T>::randn({K, D}, rng, std);
    return b;
  }

  const T* row(size_t k0) const { return e.data() + k0 * D; }  // 0-based

  void bind_labels(std::vector<int> lab) {
    if (lab.size() != K) throw ConfigError("labels must cover every prototype");
    std::vector<bool> seen(K, false);
    for (int c : lab) {
      if (c < 0 || static_cast<size_t>(c) >= K || seen[c])
        throw ConfigError("prototype labels must be a bijection onto 0.." +
                          std::to_string(K - 1));
      seen[c] = true;
    }
    labels = std::move(lab);
  }

  // Class id -> 0-based prototype row (supervised lookup; no distances).
  size_t row_for_label(int c) const {
    if (!labels) throw ConfigError("bank has no class bindings");
    for (size_t k = 0; k < K; ++k)
      if ((*labels)[k] == c) return k;
    throw IndexError("no prototype bound to class " + std::to_string(c));
  }
};

struct Assignment {
  size_t index = 0;       // 1-based prototype index
  double distance_sq = 0;  // squared distance to the chosen prototype
};

// Nearest prototype by squared Euclidean distance; ties break to the lowest
// index. Non-differentiable by design — no gradient flows through selection.
template <typename T>
Assignment assign(const T* x_hat, size_t dim, const PrototypeBank<T>& bank) {
  if (dim != bank.D)
    throw ShapeError("assign: feature dim " + std::to_string(dim) +
                     " != bank D " + std::to_string(bank.D));
  g_assign_calls.fetch_add(1, std::memory_order_relaxed);
  size_t best = 0;
  double best_d = 0;
  for (size_t k = 0; k < bank.K; ++k) {
    const T* ek = bank.row(k);
    double d = 0;
    for (size_t j = 0; j < dim; ++j) {
      const double diff = static_cast<double>(x_hat[j]) - static_cast<double>(ek[j]);
      d += diff * diff;
    }
    if (k == 0 || d < best_d) {
      best = k;
      best_d = d;
    }
  }
  return Assignment{best + 1, best_d};
}

template <typename T>
Assignment assign(const Tensor<T>& x_hat, const PrototypeBank<T>& bank) {
  return assign(x_hat.data(), x_hat.numel(), bank);
}

template <typename T>
struct LossGrad {
  double value = 0;
  Tensor<T> d_x;  // gradient w.r.t. the feature vector (when applicable)
  Tensor<T> d_e;  // gradient w.r.t. the full bank [K, D]
};

// Softmax cross-entropy over negative scaled distances:
//   L = -log( exp(-tau d_x^2) / sum_k exp(-tau d_k^2) )
// Computed with max-subtraction. Gradients cover x_hat and every prototype
// (the denominator touches all of them). Accumulation in double regardless
// of storage type so the float32 path shares one derivation with the
// float64 oracle.
template <typename T>
LossGrad<T> contrastive_loss(const T* x_hat, size_t dim,
                             const PrototypeBank<T>& bank, size_t assigned_1based,
                             double tau) {
  if (dim != bank.D) throw ShapeError("contrastive_loss: feature dim mismatch");
  if (!(tau > 0)) throw ConfigError("contrastive_loss: tau must be positive");
  if (assigned_1based < 1 || assigned_1based > bank.K)
    throw IndexError("contrastive_loss: assigned index out of range");
  const size_t K = bank.K, x = assigned_1based - 1;

  std::vector<double> logit(K);
  double m = -1e300;
  for (size_t k = 0; k < K; ++k) {
    const T* ek = bank.row(k);
    double d = 0;
    for (size_t j = 0; j < dim; ++j) {
      const double diff = static_cast<double>(x_hat[j]) - static_cast<double>(ek[j]);
      d += diff * diff;
    }
    logit[k] = -tau * d;
    m = std::max(m, logit[k]);
  }
  double z = 0;
  std::vector<double> p(K);
  for (size_t k = 0; k < K; ++k) {
    p[k] = std::exp(logit[k] - m);
    z += p[k];
  }
  for (size_t k = 0; k < K; ++k) p[k] /= z;

  LossGrad<T> out;
  out.value = -(logit[x] - m) + std::log(z);
  out.d_x = Tensor<T>({dim});
  out.d_e = Tensor<T>({K, dim});
  for (size_t k = 0; k < K; ++k) {
    const double w = (p[k] - (k == x ? 1.0 : 0.0)) * 2.0 * tau;
    const T* ek = bank.row(k);
    for (size_t j = 0; j < dim; ++j) {
      const double diff = static_cast<double>(x_hat[j]) - static_cast<double>(ek[j]);
      out.d_x[j] -= static_cast<T>(w * diff);
      out.d_e[k * dim + j] += static_cast<T>(w * diff);
    }
  }
  return out;
}

// L = ||x_hat - e_x||^2 with d/dx = 2(x - e), d/de = -2(x - e).
// d_e here is the gradient for the single selected prototype ([D]).
template <typename T>
LossGrad<T> align_loss(const T* x_hat, const T* e_x, size_t dim) {
  LossGrad<T> out;
  out.d_x = Tensor<T>({dim});
  out.d_e = Tensor<T>({dim});
  for (size_t j = 0; j < dim; ++j) {
    const double diff = static_cast<double>(x_hat[j]) - static_cast<double>(e_x[j]);
    out.value += diff * diff;
    out.d_x[j] = static_cast<T>(2.0 * diff);
    out.d_e[j] = static_cast<T>(-2.0 * diff);
  }
  return out;
}

// Compactness penalty: beta * sum over ordered pairs k != k' of
// cos(e_k, e_k'). The ordered sum counts each unordered pair twice, so each
// pair contributes 2 beta cos and a doubled gradient. K = 1 gives 0.
template <typename T>
LossGrad<T> compact_loss(const PrototypeBank<T>& bank, double beta) {
  g_compact_evals.fetch_add(1, std::memory_order_relaxed);
  const size_t K = bank.K, D = bank.D;
  LossGrad<T> out;
  out.d_e = Tensor<T>({K, D});
  if (K < 2) return out;

  std::vector<double> norm(K);
  for (size_t k = 0; k < K; ++k) {
    double n2 = 0;
    for (size_t j = 0; j < D; ++j)
      n2 += static_cast<double>(bank.row(k)[j]) * static_cast<double>(bank.row(k)[j]);
    norm[k] = std::sqrt(n2);
    if (norm[k] == 0.0)
      throw NumericError("compact_loss: prototype " + std::to_string(k + 1) +
                         " has zero norm (cosine undefined)");
  }
  for (size_t k = 0; k < K; ++k) {
    for (size_t kp = k + 1; kp < K; ++kp) {
      const T* a = bank.row(k);
      const T* b = bank.row(kp);
      double dot = 0;
      for (size_t j = 0; j < D; ++j)
        dot += static_cast<double>(a[j]) * static_cast<double>(b[j]);
      const double c = dot / (norm[k] * norm[kp]);
      out.value += 2.0 * beta * c;
      // d cos / d a = b/(|a||b|) - cos * a/|a|^2, doubled for ordered pairs
      for (size_t j = 0; j < D; ++j) {
        out.d_e[k * D + j] += static_cast<T>(
            2.0 * beta * (b[j] / (norm[k] * norm[kp]) - c * a[j] / (norm[k] * norm[k])));
        out.d_e[kp * D + j] += static_cast<T>(
            2.0 * beta * (a[j] / (norm[k] * norm[kp]) - c * b[j] / (norm[kp] * norm[kp])));
      }
    }
  }
  return out;
}

// ---- Autodiff bridges -----------------------------------------------------
// Batched tape nodes over the analytic losses above, so training composes
// them with network graphs. Values and gradients come from the same per-item
// functions the unit oracles check.

// Mean over batch of contrastive_loss(x_i, bank, idx_i). idx0 is 0-based.
template <typename T>
ad::Var<T> contrastive_mean(const ad::Var<T>& xhat, const ad::Var<T>& protos,
                            std::vector<size_t> idx0, double tau) {
  const size_t B = xhat->value.size(0), D = xhat->value.size(1);
  const size_t K = protos->value.size(0);
  if (idx0.size() != B) throw ShapeError("contrastive_mean: index count != batch");
  PrototypeBank<T> view{K, D, protos->value, std::nullopt};
  double acc = 0;
  for (size_t i = 0; i < B; ++i)
    acc += contrastive_loss(xhat->value.data() + i * D, D, view, idx0[i] + 1, tau).value;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / B));
  return ad::make_op<T>(
      std::move(out), {xhat, protos},
      [idx0 = std::move(idx0), tau, B, D, K](ad::Node<T>& n) {
        PrototypeBank<T> view{K, D, n.parents[1]->value, std::nullopt};
        Tensor<T> dx(n.parents[0]->value.shape());
        Tensor<T> de(n.parents[1]->value.shape());
        const T g = n.grad[0] / static_cast<T>(B);
        for (size_t i = 0; i < B; ++i) {
          auto lg = contrastive_loss(n.parents[0]->value.data() + i * D, D, view,
                                     idx0[i] + 1, tau);
          for (size_t j = 0; j < D; ++j) dx[i * D + j] += g * lg.d_x[j];
          for (size_t j = 0; j < K * D; ++j) de[j] += g * lg.d_e[j];
        }
        n.parents[0]->accumulate(dx);
        n.parents[1]->accumulate(de);
      });
}

// Mean over batch of ||x_i - e_{idx_i}||^2. idx0 is 0-based.
template <typename T>
ad::Var<T> align_mean(const ad::Var<T>& xhat, const ad::Var<T>& protos,
                      std::vector<size_t> idx0) {
  const size_t B = xhat->value.size(0), D = xhat->value.size(1);
  if (idx0.size() != B) throw ShapeError("align_mean: index count != batch");
  double acc = 0;
  for (size_t i = 0; i < B; ++i)
    acc += align_loss(xhat->value.data() + i * D,
                      protos->value.data() + idx0[i] * D, D)
               .value;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / B));
  return ad::make_op<T>(
      std::move(out), {xhat, protos},
      [idx0 = std::move(idx0), B, D](ad::Node<T>& n) {
        Tensor<T> dx(n.parents[0]->value.shape());
        Tensor<T> de(n.parents[1]->value.shape());
        const T g = n.grad[0] / static_cast<T>(B);
        for (size_t i = 0; i < B; ++i) {
          auto lg = align_loss(n.parents[0]->value.data() + i * D,
                               n.parents[1]->value.data() + idx0[i] * D, D);
          for (size_t j = 0; j < D; ++j) {
            dx[i * D + j] += g * lg.d_x[j];
            de[idx0[i] * D + j] += g * lg.d_e[j];
          }
        }
        n.parents[0]->accumulate(dx);
        n.parents[1]->accumulate(de);
      });
}

// beta * ordered-pair cosine sum over the bank (batch-independent).
template <typename T>
ad::Var<T> compact_mean(const ad::Var<T>& protos, double beta) {
  const size_t K = protos->value.size(0), D = protos->value.size(1);
  PrototypeBank<T> view{K, D, protos->value, std::nullopt};
  auto lg = compact_loss(view, beta);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(lg.value));
  return ad::make_op<T>(std::move(out), {protos}, [beta, K, D](ad::Node<T>& n) {
    PrototypeBank<T> view{K, D, n.parents[0]->value, std::nullopt};
    auto lg = compact_loss(view, beta);
    Tensor<T> de(n.parents[0]->value.shape());
    for (size_t j = 0; j < K * D; ++j) de[j] = n.grad[0] * lg.d_e[j];
    n.parents[0]->accumulate(de);
  });
}

}  // namespace pdm

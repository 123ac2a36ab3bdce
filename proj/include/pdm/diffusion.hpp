// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>

#include "pdm/rng.hpp"
#include "pdm/schedule.hpp"
#include "pdm/tensor.hpp"

namespace pdm {

template <typename T>
struct NoisedSample {
  Tensor<T> x_t;
  size_t t = 0;
  Tensor<T> eps;
};

// Closed-form forward marginal: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
template <typename T>
NoisedSample<T> forward_sample(const Tensor<T>& x0, size_t t, const Tensor<T>& eps,
                               const NoiseSchedule& s) {
  check_same_shape(x0, eps, "forward_sample");
  const double abar = s.alpha_bar_at(t);
  const T a = static_cast<T>(std::sqrt(abar));
  const T b = static_cast<T>(std::sqrt(1.0 - abar));
  NoisedSample<T> out{Tensor<T>(x0.shape()), t, eps};
  for (size_t i = 0; i < x0.numel(); ++i) out.x_t[i] = a * x0[i] + b * eps[i];
  return out;
}

// Step-by-step noising x_s = sqrt(1-beta_s) x_{s-1} + sqrt(beta_s) z_s for
// s = 1..t. Exists as a Monte-Carlo oracle for forward_sample's marginal;
// training never calls it. t = 0 returns x0 unchanged.
template <typename T>
Tensor<T> forward_chain(const Tensor<T>& x0, size_t t, const NoiseSchedule& s,
                        Rng& rng) {
  if (t > s.T) throw IndexError("forward_chain: t beyond schedule");
  Tensor<T> x = x0;
  Tensor<T> z(x0.shape());
  for (size_t step = 1; step <= t; ++step) {
    const T a = static_cast<T>(std::sqrt(1.0 - s.beta_at(step)));
    const T b = static_cast<T>(std::sqrt(s.beta_at(step)));
    rng.fill_normal(z.data(), z.numel());
    for (size_t i = 0; i < x.numel(); ++i) x[i] = a * x[i] + b * z[i];
  }
  return x;
}

// One ancestral-sampling update:
//   x_{t-1} = (x_t - ((1-alpha_t)/sqrt(1-abar_t)) eps_hat) / sqrt(alpha_t)
//             + sigma_t z
// The caller passes z = 0 at t = 1 (no noise on the final step).
template <typename T>
Tensor<T> reverse_step(const Tensor<T>& x_t, const Tensor<T>& eps_hat, size_t t,
                       const Tensor<T>& z, const NoiseSchedule& s) {
  check_same_shape(x_t, eps_hat, "reverse_step");
  check_same_shape(x_t, z, "reverse_step");
  const double alpha = s.alpha_at(t);
  const double abar = s.alpha_bar_at(t);
  const T inv_sqrt_a = static_cast<T>(1.0 / std::sqrt(alpha));
  // (1-alpha)/sqrt(1-abar); a zero-noise step (alpha = 1) makes this 0/0 in
  // a degenerate schedule — the limit is 0, matching the identity update.
  const T coef = alpha == 1.0
                     ? T(0)
                     : static_cast<T>((1.0 - alpha) / std::sqrt(1.0 - abar));
  const T sig = static_cast<T>(sigma(s, t));
  Tensor<T> out(x_t.shape());
  for (size_t i = 0; i < out.numel(); ++i)
    out[i] = inv_sqrt_a * (x_t[i] - coef * eps_hat[i]) + sig * z[i];
  return out;
}

// Inverts the forward marginal given the true noise:
//   x0 = (x_t - sqrt(1-abar_t) eps) / sqrt(abar_t)
template <typename T>
Tensor<T> x0_reconstruct(const Tensor<T>& x_t, const Tensor<T>& eps, size_t t,
                         const NoiseSchedule& s) {
  check_same_shape(x_t, eps, "x0_reconstruct");
  const double abar = s.alpha_bar_at(t);
  const T a = static_cast<T>(std::sqrt(abar));
  const T b = static_cast<T>(std::sqrt(1.0 - abar));
  Tensor<T> out(x_t.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = (x_t[i] - b * eps[i]) / a;
  return out;
}

}  // namespace pdm

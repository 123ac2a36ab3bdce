// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pdm/errors.hpp"

namespace pdm {

// Diffusion noise schedule: per-step variance increments beta_t, retention
// factors alpha_t = 1 - beta_t, and cumulative products alpha_bar_t.
// Timesteps are 1-indexed at the API (t in [1, T]); storage is 0-indexed.
// Immutable after construction.
struct NoiseSchedule {
  size_t T = 0;
  std::vector<double> beta;       // beta[t-1] in (0,1)
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // prod_{s<=t} alpha_s, strictly decreasing

  double beta_at(size_t t) const { return beta[check(t)]; }
  double alpha_at(size_t t) const { return alpha[check(t)]; }
  double alpha_bar_at(size_t t) const { return alpha_bar[check(t)]; }

  size_t check(size_t t) const {
    if (t < 1 || t > T)
      throw IndexError("timestep " + std::to_string(t) + " outside [1, " +
                       std::to_string(T) + "]");
    return t - 1;
  }
};

// Evenly interpolates beta from beta_start to beta_end inclusive over T steps
// (the usual DDPM schedule, arXiv:2006.11239) and precomputes the products.
inline NoiseSchedule linear_schedule(size_t T, double beta_start = 1e-4,
                                     double beta_end = 0.02) {
  if (T < 1) throw ConfigError("schedule needs T >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (size_t i = 0; i < T; ++i) {
    s.beta[i] = T == 1 ? beta_start
                       : beta_start + (beta_end - beta_start) *
                                          (static_cast<double>(i) / (T - 1));
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  return s;
}

// Rebuilds a schedule from explicit beta values (checkpoint restore path).
// Uses the same accumulation loop as construction, so a round trip through
// stored betas reproduces alpha and alpha_bar bit-identically.
inline NoiseSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ConfigError("schedule needs T >= 1");
  NoiseSchedule s;
  s.T = betas.size();
  s.beta = std::move(betas);
  s.alpha.resize(s.T);
  s.alpha_bar.resize(s.T);
  double prod = 1.0;
  for (size_t i = 0; i < s.T; ++i) {
    if (!(s.beta[i] > 0.0) || !(s.beta[i] < 1.0))
      throw ConfigError("beta values must lie in (0, 1)");
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  return s;
}

// Reverse-update noise scale sigma_t = sqrt(1 - alpha_t) = sqrt(beta_t).
inline double sigma(const NoiseSchedule& s, size_t t) {
  return std::sqrt(1.0 - s.alpha_at(t));
}

}  // namespace pdm

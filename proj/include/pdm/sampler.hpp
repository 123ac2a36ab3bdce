// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdm/diffusion.hpp"
#include "pdm/errors.hpp"
#include "pdm/training.hpp"

namespace pdm {

// What to generate and how to pick the conditioning prototype.
struct SampleRequest {
  enum class Mode { Random, RefImage, Label, ProtoIndex };
  size_t count = 1;
  Mode mode = Mode::Random;
  std::optional<Tensor<float>> ref_image;  // [C,H,W], RefImage mode
  int label = -1;                          // Label mode (supervised checkpoints)
  size_t proto_index = 0;                  // 1-based, ProtoIndex mode
  uint64_t seed = 0;
  size_t T_override = 0;  // 0 = checkpoint schedule; else shorter smoke runs
};

// Resolves one conditioning choice to a 1-based prototype row. Reference
// images are encoded and matched to their nearest row; labels use the bound
// class lookup; Random draws uniformly from the bank with the caller's rng.
inline size_t select_condition(const SampleRequest& req, const ModelState& s,
                               Rng& rng) {
  if (!s.has_prototypes())
    throw ConfigError("this checkpoint has no prototypes to condition on");
  switch (req.mode) {
    case SampleRequest::Mode::RefImage: {
      if (!req.ref_image) throw ConfigError("reference mode needs an image");
      if (req.ref_image->ndim() != 3 || req.ref_image->size(0) != s.cfg.img_c ||
          req.ref_image->size(1) != s.cfg.img_h ||
          req.ref_image->size(2) != s.cfg.img_w)
        throw ShapeError("reference image shape mismatch");
      ad::NoGradGuard ng;
      Tensor<float> x({1, s.cfg.img_c, s.cfg.img_h, s.cfg.img_w},
                      req.ref_image->vec());
      auto feat = s.encoder(ad::constant(std::move(x)));
      return assign(feat->value.data(), s.cfg.D, s.bank_view()).index;
    }
    case SampleRequest::Mode::Label: {
      if (!s.proto_labels)
        throw ConfigError("label conditioning needs a supervised checkpoint");
      return s.bank_view().row_for_label(req.label) + 1;
    }
    case SampleRequest::Mode::ProtoIndex: {
      if (req.proto_index < 1 || req.proto_index > s.cfg.K)
        throw IndexError("prototype index out of range 1.." +
                         std::to_string(s.cfg.K));
      return req.proto_index;
    }
    case SampleRequest::Mode::Random:
      return size_t(rng.uniform_int(1, int64_t(s.cfg.K))) ;
  }
  throw ConfigError("unknown sampling mode");
}

struct SampleBatch {
  Tensor<float> images;                // [count, C, H, W], clamped to [-1,1]
  std::vector<size_t> proto_indices;   // 1-based row per sample (empty: ablation)
};

// Reverse-process generation: start from pure noise and denoise t = T..1,
// conditioning every step on the (fixed) chosen prototype plus the step's
// time embedding. The ablation variant conditions on the embedding alone.
inline SampleBatch generate(const SampleRequest& req, const ModelState& s) {
  if (req.count < 1) throw ConfigError("sample count must be >= 1");
  const size_t C = s.cfg.img_c, H = s.cfg.img_h, W = s.cfg.img_w;
  if (C == 0) throw ConfigError("model has no image geometry");
  const size_t pixels = C * H * W;

  // A shorter schedule is an off-reference smoke knob: same beta endpoints,
  // fewer steps.
  const NoiseSchedule sched =
      req.T_override == 0
          ? s.sched
          : linear_schedule(req.T_override, s.cfg.beta_start, s.cfg.beta_end);
  const size_t T = sched.T;

  ad::NoGradGuard ng;

  // One prototype per sample, chosen once (constant across the t-loop).
  Rng cond_rng = Rng(req.seed).derive("cond");
  SampleBatch out;
  std::vector<const float*> cond_rows(req.count, nullptr);
  if (s.has_prototypes()) {
    out.proto_indices.resize(req.count);
    for (size_t i = 0; i < req.count; ++i) {
      out.proto_indices[i] = select_condition(req, s, cond_rng);
      cond_rows[i] = s.protos->value.data() + (out.proto_indices[i] - 1) * s.cfg.D;
    }
  } else if (req.mode != SampleRequest::Mode::Random) {
    throw ConfigError("this checkpoint supports only unconditional sampling");
  }

  Rng noise_rng = Rng(req.seed).derive("sample");
  Tensor<float> x({req.count, C, H, W});
  noise_rng.fill_normal(x.data(), x.numel());

  Tensor<float> z({C, H, W});
  for (size_t t = T; t >= 1; --t) {
    // Predict noise for the whole batch in one pass.
    std::vector<size_t> ts(req.count, t);
    auto gamma = s.time_embed(ts, T);  // [count, D]
    Tensor<float> cond_val = gamma->value;
    if (s.has_prototypes())
      for (size_t i = 0; i < req.count; ++i)
        for (size_t j = 0; j < s.cfg.D; ++j)
          cond_val[i * s.cfg.D + j] += cond_rows[i][j];
    auto eps_hat =
        s.unet(ad::constant(Tensor<float>(x)), ad::constant(std::move(cond_val)));
    if (!eps_hat->value.all_finite())
      throw NumericError("non-finite noise prediction at t=" + std::to_string(t));

    for (size_t i = 0; i < req.count; ++i) {
      Tensor<float> xi({C, H, W},
                       std::vector<float>(x.data() + i * pixels,
                                          x.data() + i * pixels + pixels));
      Tensor<float> ei({C, H, W},
                       std::vector<float>(eps_hat->value.data() + i * pixels,
                                          eps_hat->value.data() + i * pixels + pixels));
      if (t > 1)
        noise_rng.fill_normal(z.data(), pixels);
      else
        z.fill(0.0f);  // final step adds no noise
      Tensor<float> next = reverse_step(xi, ei, t, z, sched);
      if (!next.all_finite())
        throw NumericError("non-finite sample state at t=" + std::to_string(t));
      std::copy_n(next.data(), pixels, x.data() + i * pixels);
    }
  }

  for (size_t i = 0; i < x.numel(); ++i)
    x[i] = std::max(-1.0f, std::min(1.0f, x[i]));
  out.images = std::move(x);
  return out;
}

}  // namespace pdm

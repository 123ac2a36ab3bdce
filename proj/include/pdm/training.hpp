// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdm/data.hpp"
#include "pdm/diffusion.hpp"
#include "pdm/errors.hpp"
#include "pdm/networks.hpp"
#include "pdm/optimizer.hpp"
#include "pdm/prototypes.hpp"
#include "pdm/schedule.hpp"

namespace pdm {

enum class Variant { PDM, SPDM, DDPM };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::PDM: return "pdm";
    case Variant::SPDM: return "spdm";
    case Variant::DDPM: return "ddpm";
  }
  throw ConfigError("unknown variant");
}

inline Variant parse_variant(const std::string& s) {
  if (s == "pdm") return Variant::PDM;
  if (s == "spdm") return Variant::SPDM;
  if (s == "ddpm") return Variant::DDPM;
  throw ConfigError("unknown variant '" + s + "' (want pdm|spdm|ddpm)");
}

// Everything a run needs, resolvable from a config file plus CLI overrides.
struct RunConfig {
  Variant variant = Variant::PDM;
  size_t T = 1000;            // diffusion steps
  size_t K = 4;               // prototype count
  size_t D = 32;              // prototype / feature dimension
  double tau = 1.0;           // contrastive temperature
  double beta_compact = 1.0;  // compactness weight
  size_t batch = 8;
  size_t epochs = 1;
  double lr = 2e-4;
  uint64_t seed = 0;
  std::string dataset;             // "synth:<n>:<size>" or image directory
  std::string labels_file;         // optional CSV for image directories
  std::array<size_t, 4> widths = {16, 32, 32, 32};       // denoiser channels
  std::array<size_t, 3> enc_widths = {32, 64, 128};      // encoder channels
  size_t heads = 4;
  double beta_start = 1e-4, beta_end = 0.02;
  size_t ckpt_every = 0;  // 0 = only final
  std::string out_dir = "out";
  // Image geometry; filled in from the dataset when training starts.
  size_t img_c = 0, img_h = 0, img_w = 0;

  void validate() const {
    if (T < 1) throw ConfigError("T must be >= 1");
    if (K < 1) throw ConfigError("K must be >= 1");
    if (D < 2 || D % 2 != 0) throw ConfigError("D must be even and >= 2");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (tau <= 0) throw ConfigError("tau must be positive");
    if (lr < 0) throw ConfigError("learning rate must be >= 0");
    if (beta_start <= 0 || beta_end >= 1 || beta_start > beta_end)
      throw ConfigError("need 0 < beta_start <= beta_end < 1");
    if (heads < 1) throw ConfigError("heads must be >= 1");
    if (dataset.empty()) throw ConfigError("dataset must be set");
  }
};

// Per-step loss breakdown. `total` is always the literal float sum of the
// four components, so the decomposition identity holds bit-exactly.
struct LossReport {
  size_t step = 0;
  double diff = 0, contrastive = 0, align = 0, compact = 0, total = 0;
};

// Owns every trainable object plus the RNG streams. The parameter map is a
// stable, name-keyed ordering shared by the optimizer and the checkpoint
// format, so moments and weights line up across save/load.
struct ModelState {
  RunConfig cfg;
  NoiseSchedule sched;
  Encoder<float> encoder;          // absent in the unconditional ablation
  UNet<float> unet;
  TimeEmbedding<float> time_embed;
  ad::Var<float> protos;           // [K, D] leaf; unused by the ablation
  std::optional<std::vector<int>> proto_labels;  // class id per row (supervised)
  Adam<float> opt;
  size_t step = 0;
  Rng train_rng;  // stream for t, epsilon, and shuffling offsets

  bool has_prototypes() const { return cfg.variant != Variant::DDPM; }

  static ModelState build(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.img_c == 0 || cfg.img_h == 0 || cfg.img_w == 0)
      throw ConfigError("image geometry unset; load a dataset first");
    if (cfg.img_h % 8 != 0 || cfg.img_w % 8 != 0)
      throw ConfigError("image side lengths must be divisible by 8");
    ModelState s;
    s.cfg = cfg;
    s.sched = linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    Rng init = Rng(cfg.seed).derive("init");
    if (s.has_prototypes()) {
      s.encoder = Encoder<float>(cfg.img_c, cfg.enc_widths, cfg.D, init);
      auto bank = PrototypeBank<float>::init_random(cfg.K, cfg.D, init);
      s.protos = ad::leaf(std::move(bank.e));
    }
    s.unet = UNet<float>(cfg.img_c, cfg.widths, cfg.D, cfg.heads, init);
    s.time_embed = TimeEmbedding<float>(cfg.D, init);
    s.opt.lr = cfg.lr;
    s.train_rng = Rng(cfg.seed).derive("train");
    return s;
  }

  // Stable order: encoder, denoiser, time projection, prototypes.
  ParamMap<float> params() {
    ParamMap<float> pm;
    if (has_prototypes()) encoder.params(pm, "encoder");
    unet.params(pm, "unet");
    time_embed.params(pm, "time_proj");
    if (has_prototypes()) pm.emplace_back("protos.e", protos);
    return pm;
  }

  // Read-only view of the prototype rows for assignment / sampling.
  PrototypeBank<float> bank_view() const {
    PrototypeBank<float> b;
    b.K = cfg.K;
    b.D = cfg.D;
    b.e = protos->value;
    b.labels = proto_labels;
    return b;
  }
};

// One optimizer update over a fixed batch: encode, select prototypes
// (nearest-row for the unsupervised variant, class lookup for the supervised
// one, none for the ablation), noise each item at its own timestep, predict,
// combine losses, and step. The batch's label span may be empty except for
// the supervised variant.
inline LossReport train_step(ModelState& s, const Tensor<float>& batch,
                             const std::vector<int>& labels) {
  const size_t B = batch.size(0);
  if (B == 0) throw DataError("train_step: empty batch");
  if (batch.ndim() != 4 || batch.size(1) != s.cfg.img_c ||
      batch.size(2) != s.cfg.img_h || batch.size(3) != s.cfg.img_w)
    throw ShapeError("train_step: batch shape mismatch");
  const bool supervised = s.cfg.variant == Variant::SPDM;
  if (supervised && labels.size() != B)
    throw DataError("supervised training needs one label per batch item");

  const size_t C = s.cfg.img_c, H = s.cfg.img_h, W = s.cfg.img_w;
  const size_t pixels = C * H * W;

  // Per-item draws, in a fixed order (t first, then epsilon) so the stream
  // is reproducible and checkpoint-resumable.
  std::vector<size_t> ts(B);
  Tensor<float> eps({B, C, H, W});
  Tensor<float> noisy({B, C, H, W});
  for (size_t i = 0; i < B; ++i) {
    ts[i] = size_t(s.train_rng.uniform_int(1, int64_t(s.cfg.T)));
    s.train_rng.fill_normal(eps.data() + i * pixels, pixels);
    Tensor<float> x0({C, H, W},
                     std::vector<float>(batch.data() + i * pixels,
                                        batch.data() + i * pixels + pixels));
    Tensor<float> e({C, H, W},
                    std::vector<float>(eps.data() + i * pixels,
                                       eps.data() + i * pixels + pixels));
    NoisedSample<float> ns = forward_sample(x0, ts[i], e, s.sched);
    std::copy_n(ns.x_t.data(), pixels, noisy.data() + i * pixels);
  }

  LossReport rep;
  rep.step = s.step;

  auto gamma = s.time_embed(ts, s.cfg.T);  // [B, D]
  ad::Var<float> loss;

  if (s.cfg.variant == Variant::DDPM) {
    // Ablation: time embedding is the whole conditioning signal.
    auto eps_hat = s.unet(ad::constant(std::move(noisy)), gamma);
    auto d = ad::sub(eps_hat, ad::constant(eps));
    loss = ad::scale(ad::sum_all(ad::mul(d, d)), float(1.0 / double(B)));
    rep.diff = loss->value[0];
  } else {
    auto xhat = s.encoder(ad::constant(Tensor<float>(batch)));  // [B, D]

    // Prototype row per item. Selection is non-differentiable: the
    // unsupervised variant takes the nearest row, the supervised variant a
    // class lookup that never measures distances.
    std::vector<size_t> idx0(B);
    if (supervised) {
      PrototypeBank<float> view = s.bank_view();
      for (size_t i = 0; i < B; ++i) idx0[i] = view.row_for_label(labels[i]);
    } else {
      PrototypeBank<float> view = s.bank_view();
      for (size_t i = 0; i < B; ++i)
        idx0[i] = assign(xhat->value.data() + i * s.cfg.D, s.cfg.D, view).index - 1;
    }

    // Conditioning takes the selected rows straight from the bank, not from
    // the encoder output, so the denoising loss cannot reach the encoder.
    auto cond = ad::add(ad::gather_rows(s.protos, idx0), gamma);
    auto eps_hat = s.unet(ad::constant(std::move(noisy)), cond);
    auto d = ad::sub(eps_hat, ad::constant(eps));
    auto l_diff = ad::scale(ad::sum_all(ad::mul(d, d)), float(1.0 / double(B)));

    auto l_contr = contrastive_mean(xhat, s.protos, idx0, s.cfg.tau);
    auto l_align = align_mean(xhat, s.protos, idx0);
    loss = ad::add(ad::add(l_diff, l_contr), l_align);
    if (!supervised) {
      // Supervised prototypes are pinned to classes; the repulsion term is
      // dropped entirely there (never evaluated, counter-checked in tests).
      auto l_compact = compact_mean(s.protos, s.cfg.beta_compact);
      loss = ad::add(loss, l_compact);
      rep.compact = l_compact->value[0];
    }
    rep.diff = l_diff->value[0];
    rep.contrastive = l_contr->value[0];
    rep.align = l_align->value[0];
  }

  rep.total = rep.diff + rep.contrastive + rep.align + rep.compact;
  if (!std::isfinite(rep.total))
    throw NumericError("non-finite loss at step " + std::to_string(s.step) +
                       " (diff=" + std::to_string(rep.diff) + ")");

  ad::backward(loss);
  ParamMap<float> pm = s.params();
  s.opt.step(pm);
  ++s.step;
  return rep;
}

using LossSink = std::function<void(const LossReport&)>;
using CheckpointSink = std::function<void(ModelState&, size_t step)>;

// Epochs x floor(N/B) optimizer updates over shuffled batches. Labels ride
// along when present. Checkpoints at the configured cadence plus once at the
// end (cadence 0 = final only).
inline ModelState train(const Dataset& data, const RunConfig& cfg_in,
                        const LossSink& on_loss = {},
                        const CheckpointSink& on_ckpt = {}) {
  RunConfig cfg = cfg_in;
  cfg.img_c = data.C;
  cfg.img_h = data.H;
  cfg.img_w = data.W;
  cfg.validate();

  if (cfg.variant == Variant::SPDM) {
    if (!data.labels)
      throw ConfigError("the supervised variant needs a labeled dataset");
    if (cfg.K != data.num_classes)
      throw ConfigError("the supervised variant needs K = class count (" +
                        std::to_string(data.num_classes) + ")");
  }
  if (data.size() < cfg.batch)
    throw ConfigError("dataset smaller than one batch");

  ModelState s = ModelState::build(cfg);
  if (cfg.variant == Variant::SPDM) {
    // Fixed class->prototype binding: row k serves class k.
    std::vector<int> binding(cfg.K);
    for (size_t k = 0; k < cfg.K; ++k) binding[k] = int(k);
    s.proto_labels = binding;
  }

  const size_t n = data.size(), B = cfg.batch;
  const size_t steps_per_epoch = n / B;
  const size_t pixels = data.C * data.H * data.W;
  Rng shuffle_base = Rng(cfg.seed).derive("shuffle");

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng sh = shuffle_base.derive(epoch);
    const std::vector<size_t> order = shuffle_indices(n, sh);
    for (size_t b = 0; b < steps_per_epoch; ++b) {
      Tensor<float> batch({B, data.C, data.H, data.W});
      std::vector<int> labels;
      for (size_t i = 0; i < B; ++i) {
        const size_t pick = order[b * B + i];
        std::copy_n(data.images[pick].data(), pixels, batch.data() + i * pixels);
        if (data.labels) labels.push_back((*data.labels)[pick]);
      }
      LossReport rep = train_step(s, batch, labels);
      if (on_loss) on_loss(rep);
      if (on_ckpt && cfg.ckpt_every > 0 && s.step % cfg.ckpt_every == 0)
        on_ckpt(s, s.step);
    }
  }
  if (on_ckpt) on_ckpt(s, s.step);
  return s;
}

// Class id -> bound prototype row as a copy; the supervised selection path.
inline Tensor<float> supervised_select(int label, const PrototypeBank<float>& bank) {
  const size_t k = bank.row_for_label(label);
  return Tensor<float>({bank.D},
                       std::vector<float>(bank.row(k), bank.row(k) + bank.D));
}

}  // namespace pdm

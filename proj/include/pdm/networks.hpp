// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pdm/ops.hpp"
#include "pdm/rng.hpp"

namespace pdm {

template <typename T>
using ParamMap = std::vector<std::pair<std::string, ad::Var<T>>>;

// ---- Layers ----------------------------------------------------------------

template <typename T>
struct Conv2dLayer {
  ad::Var<T> w, b;
  size_t stride = 1, pad = 1;

  Conv2dLayer() = default;
  Conv2dLayer(size_t in_ch, size_t out_ch, size_t k, size_t stride_, size_t pad_,
              Rng& rng, bool zero_init = false)
      : stride(stride_), pad(pad_) {
    const double std = zero_init ? 0.0 : std::sqrt(2.0 / (in_ch * k * k));
    w = ad::leaf(Tensor<T>::randn({out_ch, in_ch, k, k}, rng, std));
    b = ad::leaf(Tensor<T>::zeros({out_ch}));
  }

  ad::Var<T> operator()(const ad::Var<T>& x) const {
    return ad::conv2d(x, w, b, stride, pad);
  }

  void params(ParamMap<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".weight", w);
    out.emplace_back(prefix + ".bias", b);
  }
};

template <typename T>
struct LinearLayer {
  ad::Var<T> w, b;

  LinearLayer() = default;
  LinearLayer(size_t in, size_t out, Rng& rng) {
    w = ad::leaf(Tensor<T>::randn({in, out}, rng, std::sqrt(1.0 / in)));
    b = ad::leaf(Tensor<T>::zeros({out}));
  }

  ad::Var<T> operator()(const ad::Var<T>& x) const { return ad::linear(x, w, b); }

  void params(ParamMap<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".weight", w);
    out.emplace_back(prefix + ".bias", b);
  }
};

// ---- Feature encoder f_phi -------------------------------------------------
// Four stride-2 3x3 convolutions with SiLU, then adaptive average pooling to
// 1x1. Purely (piecewise-)zero-preserving stages: zero input and zero biases
// give the zero feature vector.
template <typename T>
struct Encoder {
  std::array<Conv2dLayer<T>, 4> conv;
  size_t in_ch = 0, D = 0;

  Encoder() = default;
  Encoder(size_t in_channels, std::array<size_t, 3> widths, size_t feat_dim, Rng& rng)
      : in_ch(in_channels), D(feat_dim) {
    const std::array<size_t, 5> ch = {in_channels, widths[0], widths[1], widths[2],
                                      feat_dim};
    for (size_t i = 0; i < 4; ++i)
      conv[i] = Conv2dLayer<T>(ch[i], ch[i + 1], 3, /*stride=*/2, /*pad=*/1, rng);
  }

  // x: [B,C,H,W] with H,W >= 8  ->  features [B,D]
  ad::Var<T> operator()(const ad::Var<T>& x) const {
    const auto& s = x->value.shape();
    if (s.size() != 4 || s[1] != in_ch)
      throw ShapeError("encoder expects [B," + std::to_string(in_ch) + ",H,W]");
    if (s[2] < 8 || s[3] < 8) throw ShapeError("encoder expects H,W >= 8");
    ad::Var<T> h = x;
    for (const auto& c : conv) h = ad::silu(c(h));
    return ad::global_avg_pool(h);
  }

  void params(ParamMap<T>& out, const std::string& prefix) const {
    for (size_t i = 0; i < 4; ++i)
      conv[i].params(out, prefix + ".conv" + std::to_string(i + 1));
  }
};

// ---- Timestep embedding gamma(t) -------------------------------------------
// Sinusoidal basis (pairs sin/cos at geometrically spaced frequencies)
// followed by a learned linear projection to the same dimension.
template <typename T>
struct TimeEmbedding {
  size_t D = 0;
  LinearLayer<T> proj;

  TimeEmbedding() = default;
  TimeEmbedding(size_t dim, Rng& rng) : D(dim), proj(dim, dim, rng) {
    if (dim < 2 || dim % 2 != 0)
      throw ConfigError("time embedding dimension must be even and >= 2");
  }

  // Pre-projection basis row: component 2i = sin(t/10000^{2i/D}),
  // component 2i+1 = cos of the same angle.
  Tensor<T> basis(double t) const {
    Tensor<T> out({D});
    for (size_t i = 0; i < D / 2; ++i) {
      const double freq = std::pow(10000.0, -(2.0 * i) / D);
      out[2 * i] = static_cast<T>(std::sin(t * freq));
      out[2 * i + 1] = static_cast<T>(std::cos(t * freq));
    }
    return out;
  }

  // Batched gamma(t): one row per timestep. 1-indexed t in [1, T_total].
  ad::Var<T> operator()(const std::vector<size_t>& ts, size_t T_total) const {
    Tensor<T> bas({ts.size(), D});
    for (size_t i = 0; i < ts.size(); ++i) {
      if (ts[i] < 1 || ts[i] > T_total)
        throw IndexError("time_embed: t=" + std::to_string(ts[i]) + " outside [1, " +
                         std::to_string(T_total) + "]");
      Tensor<T> row = basis(static_cast<double>(ts[i]));
      std::copy_n(row.data(), D, bas.data() + i * D);
    }
    return proj(ad::constant(std::move(bas)));
  }

  void params(ParamMap<T>& out, const std::string& prefix) const {
    proj.params(out, prefix);
  }
};

// ---- Bottleneck cross-attention ---------------------------------------------
// Every spatial position is a query token; the conditioning vector provides
// the single key and value after learned (bias-free) projections. Queries are
// standardized per token before projection; the block is residual. With one
// key token the softmax weights are identically 1, so the output depends on
// the conditioning only through the value projection.
template <typename T>
struct CrossAttention {
  size_t C = 0, D = 0, heads = 4;
  ad::Var<T> wq, wk, wv, wo;
  mutable Tensor<T> last_weights;  // [B*h*w, heads], stashed each forward

  CrossAttention() = default;
  CrossAttention(size_t channels, size_t cond_dim, size_t n_heads, Rng& rng)
      : C(channels), D(cond_dim), heads(n_heads) {
    if (C % heads != 0)
      throw ConfigError("attention channels must divide evenly into heads");
    wq = ad::leaf(Tensor<T>::randn({C, C}, rng, std::sqrt(1.0 / C)));
    wk = ad::leaf(Tensor<T>::randn({D, C}, rng, std::sqrt(1.0 / D)));
    wv = ad::leaf(Tensor<T>::randn({D, C}, rng, std::sqrt(1.0 / D)));
    wo = ad::leaf(Tensor<T>::randn({C, C}, rng, std::sqrt(1.0 / C)));
  }

  // x: [B,C,h,w], cond: [B,D] -> [B,C,h,w]
  ad::Var<T> operator()(const ad::Var<T>& x, const ad::Var<T>& cond) const {
    const auto& s = x->value.shape();
    if (s.size() != 4 || s[1] != C) throw ShapeError("cross_attend: bad bottleneck shape");
    if (cond->value.size(1) != D) throw ShapeError("cross_attend: bad cond dim");
    ad::Var<T> tokens = ad::bchw_to_tokens(x);
    ad::Var<T> q = ad::matmul(ad::standardize_blocks(tokens, C), wq);
    ad::Var<T> k = ad::matmul(cond, wk);
    ad::Var<T> v = ad::matmul(cond, wv);
    ad::Var<T> attn = ad::attn_single_kv(q, k, v, heads, &last_weights);
    ad::Var<T> res = ad::add(tokens, ad::matmul(attn, wo));
    return ad::tokens_to_bchw(res, s[0], s[2], s[3]);
  }

  void params(ParamMap<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".wq", wq);
    out.emplace_back(prefix + ".wk", wk);
    out.emplace_back(prefix + ".wv", wv);
    out.emplace_back(prefix + ".wo", wo);
  }
};

// ---- Residual block ----------------------------------------------------------
// norm -> SiLU -> conv, twice, plus identity (or 1x1 projection) shortcut.
template <typename T>
struct ResBlock {
  Conv2dLayer<T> conv1, conv2, skip;
  bool has_skip = false;

  ResBlock() = default;
  ResBlock(size_t cin, size_t cout, Rng& rng)
      : conv1(cin, cout, 3, 1, 1, rng), conv2(cout, cout, 3, 1, 1, rng) {
    if (cin != cout) {
      skip = Conv2dLayer<T>(cin, cout, 1, 1, 0, rng);
      has_skip = true;
    }
  }

  ad::Var<T> operator()(const ad::Var<T>& x) const {
    ad::Var<T> h = conv1(ad::silu(ad::group_norm(x)));
    h = conv2(ad::silu(ad::group_norm(h)));
    return ad::add(h, has_skip ? skip(x) : x);
  }

  void params(ParamMap<T>& out, const std::string& prefix) const {
    conv1.params(out, prefix + ".conv1");
    conv2.params(out, prefix + ".conv2");
    if (has_skip) skip.params(out, prefix + ".skip");
  }
};

// ---- U-Net denoiser f_theta ---------------------------------------------------
// Down path over four widths with two residual blocks per stage and three
// stride-2 downsamples; bottleneck res-attn-res with prototype cross-attention;
// mirrored up path with skip concatenation; norm-SiLU-conv head. Input H and W
// must be divisible by 8.
template <typename T>
struct UNet {
  size_t in_ch = 0, D = 0;
  std::array<size_t, 4> w{};
  Conv2dLayer<T> stem;
  std::array<std::array<ResBlock<T>, 2>, 4> down;
  std::array<Conv2dLayer<T>, 3> downsample;
  ResBlock<T> mid0, mid1;
  CrossAttention<T> attn;
  std::array<std::array<ResBlock<T>, 2>, 4> up;
  std::array<Conv2dLayer<T>, 3> upconv;  // upconv[i]: width i+1 -> width i
  Conv2dLayer<T> out_conv;

  UNet() = default;
  UNet(size_t in_channels, std::array<size_t, 4> widths, size_t cond_dim,
       size_t heads, Rng& rng)
      : in_ch(in_channels), D(cond_dim), w(widths) {
    stem = Conv2dLayer<T>(in_ch, w[0], 3, 1, 1, rng);
    for (size_t i = 0; i < 4; ++i)
      for (size_t j = 0; j < 2; ++j) down[i][j] = ResBlock<T>(w[i], w[i], rng);
    for (size_t i = 0; i < 3; ++i)
      downsample[i] = Conv2dLayer<T>(w[i], w[i + 1], 3, 2, 1, rng);
    mid0 = ResBlock<T>(w[3], w[3], rng);
    attn = CrossAttention<T>(w[3], D, heads, rng);
    mid1 = ResBlock<T>(w[3], w[3], rng);
    for (size_t i = 0; i < 4; ++i) {
      up[i][0] = ResBlock<T>(2 * w[i], w[i], rng);
      up[i][1] = ResBlock<T>(w[i], w[i], rng);
    }
    for (size_t i = 0; i < 3; ++i)
      upconv[i] = Conv2dLayer<T>(w[i + 1], w[i], 3, 1, 1, rng);
    out_conv = Conv2dLayer<T>(w[0], in_ch, 3, 1, 1, rng, /*zero_init=*/true);
  }

  // x_t: [B,C,H,W], cond: [B,D] (e_x + gamma(t), or gamma(t) alone for the
  // no-prototype ablation) -> predicted noise, same shape as x_t.
  ad::Var<T> operator()(const ad::Var<T>& x, const ad::Var<T>& cond) const {
    const auto& s = x->value.shape();
    if (s.size() != 4 || s[1] != in_ch) throw ShapeError("denoise: bad input shape");
    if (s[2] % 8 != 0 || s[3] % 8 != 0)
      throw ShapeError("denoise: H and W must be divisible by 8");
    ad::Var<T> h = stem(x);
    std::array<ad::Var<T>, 4> skips;
    for (size_t i = 0; i < 4; ++i) {
      h = down[i][1](down[i][0](h));
      skips[i] = h;
      if (i < 3) h = downsample[i](h);
    }
    h = mid1(attn(mid0(h), cond));
    for (size_t ii = 4; ii-- > 0;) {
      h = up[ii][1](up[ii][0](ad::concat_channels(h, skips[ii])));
      if (ii > 0) h = upconv[ii - 1](ad::upsample_nearest2x(h));
    }
    return out_conv(ad::silu(ad::group_norm(h)));
  }

  void params(ParamMap<T>& out, const std::string& prefix) const {
    stem.params(out, prefix + ".stem");
    for (size_t i = 0; i < 4; ++i)
      for (size_t j = 0; j < 2; ++j)
        down[i][j].params(out, prefix + ".down" + std::to_string(i) + ".block" +
                                   std::to_string(j));
    for (size_t i = 0; i < 3; ++i)
      downsample[i].params(out, prefix + ".downsample" + std::to_string(i));
    mid0.params(out, prefix + ".mid.block0");
    attn.params(out, prefix + ".attn");
    mid1.params(out, prefix + ".mid.block1");
    for (size_t i = 0; i < 4; ++i)
      for (size_t j = 0; j < 2; ++j)
        up[i][j].params(out, prefix + ".up" + std::to_string(i) + ".block" +
                                 std::to_string(j));
    for (size_t i = 0; i < 3; ++i)
      upconv[i].params(out, prefix + ".upconv" + std::to_string(i));
    out_conv.params(out, prefix + ".out");
  }
};

}  // namespace pdm

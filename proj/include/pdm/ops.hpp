// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pdm/autodiff.hpp"
#include "pdm/kernels.hpp"
#include "pdm/tensor.hpp"

// Differentiable op library over Tensor<T>. Shapes follow the usual
// conventions: images [B,C,H,W], token matrices [N,C], feature rows [B,D],
// conv weights [OC,IC,kh,kw], linear weights [in,out].
namespace pdm::ad {

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor<T> out = a->value;
  for (size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    n.parents[0]->accumulate(n.grad);
    n.parents[1]->accumulate(n.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "sub");
  Tensor<T> out = a->value;
  for (size_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    n.parents[0]->accumulate(n.grad);
    Tensor<T> gb = n.grad;
    for (size_t i = 0; i < gb.numel(); ++i) gb[i] = -gb[i];
    n.parents[1]->accumulate(gb);
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "mul");
  Tensor<T> out = a->value;
  for (size_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    Tensor<T> ga = n.grad, gb = n.grad;
    const Tensor<T>& av = n.parents[0]->value;
    const Tensor<T>& bv = n.parents[1]->value;
    for (size_t i = 0; i < ga.numel(); ++i) {
      ga[i] *= bv[i];
      gb[i] *= av[i];
    }
    n.parents[0]->accumulate(ga);
    n.parents[1]->accumulate(gb);
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
  Tensor<T> out = a->value;
  for (size_t i = 0; i < out.numel(); ++i) out[i] *= c;
  return make_op<T>(std::move(out), {a}, [c](Node<T>& n) {
    Tensor<T> g = n.grad;
    for (size_t i = 0; i < g.numel(); ++i) g[i] *= c;
    n.parents[0]->accumulate(g);
  });
}

template <typename T>
Var<T> silu(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (size_t i = 0; i < out.numel(); ++i) {
    const T s = T(1) / (T(1) + std::exp(-out[i]));
    out[i] *= s;
  }
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    const Tensor<T>& x = n.parents[0]->value;
    Tensor<T> g = n.grad;
    for (size_t i = 0; i < g.numel(); ++i) {
      const T s = T(1) / (T(1) + std::exp(-x[i]));
      g[i] *= s * (T(1) + x[i] * (T(1) - s));
    }
    n.parents[0]->accumulate(g);
  });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  T acc = 0;
  for (size_t i = 0; i < a->value.numel(); ++i) acc += a->value[i];
  return make_op<T>(Tensor<T>::scalar(acc), {a}, [](Node<T>& n) {
    n.parents[0]->accumulate(Tensor<T>::full(n.parents[0]->value.shape(), n.grad[0]));
  });
}

// View with identical storage ordering; gradient passes through unchanged.
template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<size_t> shape) {
  Tensor<T> out(std::move(shape), a->value.vec());
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    n.parents[0]->accumulate(Tensor<T>(n.parents[0]->value.shape(), n.grad.vec()));
  });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const size_t M = a->value.size(0), K = a->value.size(1);
  const size_t Kb = b->value.size(0), N = b->value.size(1);
  if (K != Kb)
    throw ShapeError("matmul: inner dims differ " + a->value.shape_str() + " vs " +
                     b->value.shape_str());
  Tensor<T> out({M, N});
  kern::gemm_nn(a->value.data(), b->value.data(), out.data(), M, K, N);
  return make_op<T>(std::move(out), {a, b}, [M, K, N](Node<T>& n) {
    Tensor<T> da({M, K}), db({K, N});
    kern::gemm_nt(n.grad.data(), n.parents[1]->value.data(), da.data(), M, N, K);
    kern::gemm_tn(n.parents[0]->value.data(), n.grad.data(), db.data(), K, M, N);
    n.parents[0]->accumulate(da);
    n.parents[1]->accumulate(db);
  });
}

// y[i,:] = x[i,:] + b  (bias broadcast over rows)
template <typename T>
Var<T> add_rowvec(const Var<T>& x, const Var<T>& b) {
  const size_t N = x->value.size(0), D = x->value.size(1);
  if (b->value.numel() != D)
    throw ShapeError("add_rowvec: bias size != row width");
  Tensor<T> out = x->value;
  for (size_t i = 0; i < N; ++i)
    for (size_t j = 0; j < D; ++j) out[i * D + j] += b->value[j];
  return make_op<T>(std::move(out), {x, b}, [N, D](Node<T>& n) {
    n.parents[0]->accumulate(n.grad);
    Tensor<T> db(n.parents[1]->value.shape());
    for (size_t i = 0; i < N; ++i)
      for (size_t j = 0; j < D; ++j) db[j] += n.grad[i * D + j];
    n.parents[1]->accumulate(db);
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& W, const Var<T>& b) {
  Var<T> y = matmul(x, W);
  return b ? add_rowvec(y, b) : y;
}

// Standardizes each consecutive block of `block` elements to zero mean /
// unit variance (biased variance, epsilon inside the sqrt). Serves as the
// affine-free group-normalization core and as per-token pre-norm.
template <typename T>
Var<T> standardize_blocks(const Var<T>& x, size_t block, T eps = T(1e-5)) {
  const size_t n = x->value.numel();
  if (block == 0 || n % block != 0)
    throw ShapeError("standardize_blocks: size not divisible by block");
  const size_t nblocks = n / block;
  Tensor<T> out = x->value;
  for (size_t bI = 0; bI < nblocks; ++bI) {
    T* p = out.data() + bI * block;
    T mu = 0;
    for (size_t i = 0; i < block; ++i) mu += p[i];
    mu /= T(block);
    T var = 0;
    for (size_t i = 0; i < block; ++i) var += (p[i] - mu) * (p[i] - mu);
    var /= T(block);
    const T inv = T(1) / std::sqrt(var + eps);
    for (size_t i = 0; i < block; ++i) p[i] = (p[i] - mu) * inv;
  }
  return make_op<T>(std::move(out), {x}, [block, nblocks, eps](Node<T>& n) {
    const Tensor<T>& x0 = n.parents[0]->value;
    Tensor<T> dx(x0.shape());
    for (size_t bI = 0; bI < nblocks; ++bI) {
      const T* xp = x0.data() + bI * block;
      const T* gp = n.grad.data() + bI * block;
      T* dp = dx.data() + bI * block;
      T mu = 0;
      for (size_t i = 0; i < block; ++i) mu += xp[i];
      mu /= T(block);
      T var = 0;
      for (size_t i = 0; i < block; ++i) var += (xp[i] - mu) * (xp[i] - mu);
      var /= T(block);
      const T inv = T(1) / std::sqrt(var + eps);
      T gmean = 0, gdotx = 0;
      for (size_t i = 0; i < block; ++i) {
        gmean += gp[i];
        gdotx += gp[i] * (xp[i] - mu) * inv;
      }
      gmean /= T(block);
      gdotx /= T(block);
      for (size_t i = 0; i < block; ++i)
        dp[i] = inv * (gp[i] - gmean - (xp[i] - mu) * inv * gdotx);
    }
    n.parents[0]->accumulate(dx);
  });
}

// Largest group size <= min(8, C) that divides C; mirrors the "groups of 8"
// convention while staying valid for small channel counts.
inline size_t group_size_for(size_t C) {
  size_t g = C < 8 ? C : 8;
  while (C % g != 0) --g;
  return g;
}

// Group standardization over [B,C,H,W]: each (batch, channel-group) block is
// standardized; contiguous layout makes the block stride (C/G)*H*W.
template <typename T>
Var<T> group_norm(const Var<T>& x) {
  const auto& s = x->value.shape();
  if (s.size() != 4) throw ShapeError("group_norm expects [B,C,H,W]");
  const size_t gsize = group_size_for(s[1]);
  return standardize_blocks(x, gsize * s[2] * s[3]);
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, size_t stride,
              size_t pad) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw ShapeError("conv2d expects x[B,C,H,W], w[OC,C,kh,kw]");
  const size_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const size_t OC = ws[0], kh = ws[2], kw = ws[3];
  if (ws[1] != C) throw ShapeError("conv2d: channel mismatch");
  if (H + 2 * pad < kh || W + 2 * pad < kw)
    throw ShapeError("conv2d: kernel larger than padded input");
  const size_t OH = (H + 2 * pad - kh) / stride + 1;
  const size_t OW = (W + 2 * pad - kw) / stride + 1;
  const size_t CK = C * kh * kw, P = OH * OW;

  Tensor<T> out({B, OC, OH, OW});
  std::vector<T> cols(CK * P);
  for (size_t bi = 0; bi < B; ++bi) {
    kern::im2col(x->value.data() + bi * C * H * W, C, H, W, kh, kw, stride, pad,
                 OH, OW, cols.data());
    T* o = out.data() + bi * OC * P;
    if (b) {
      for (size_t oc = 0; oc < OC; ++oc)
        for (size_t p = 0; p < P; ++p) o[oc * P + p] = b->value[oc];
    }
    kern::gemm_nn(w->value.data(), cols.data(), o, OC, CK, P);
  }

  std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b}
                                  : std::vector<Var<T>>{x, w};
  // im2col is recomputed in the backward pass instead of captured: a full
  // training step holds dozens of conv nodes alive at once and the patch
  // matrices dominate memory.
  return make_op<T>(
      std::move(out), std::move(parents),
      [B, C, H, W, OC, kh, kw, stride, pad, OH, OW, CK, P](Node<T>& n) {
        const Tensor<T>& xv = n.parents[0]->value;
        const Tensor<T>& wv = n.parents[1]->value;
        Tensor<T> dx(xv.shape()), dw(wv.shape());
        std::vector<T> cols(CK * P), dcols(CK * P);
        for (size_t bi = 0; bi < B; ++bi) {
          const T* g = n.grad.data() + bi * OC * P;
          kern::im2col(xv.data() + bi * C * H * W, C, H, W, kh, kw, stride, pad,
                       OH, OW, cols.data());
          kern::gemm_nt(g, cols.data(), dw.data(), OC, P, CK);
          std::fill(dcols.begin(), dcols.end(), T(0));
          kern::gemm_tn(wv.data(), g, dcols.data(), CK, OC, P);
          kern::col2im(dcols.data(), C, H, W, kh, kw, stride, pad, OH, OW,
                       dx.data() + bi * C * H * W);
        }
        n.parents[0]->accumulate(dx);
        n.parents[1]->accumulate(dw);
        if (n.parents.size() == 3) {
          Tensor<T> db({OC});
          for (size_t bi = 0; bi < B; ++bi) {
            const T* g = n.grad.data() + bi * OC * P;
            for (size_t oc = 0; oc < OC; ++oc)
              for (size_t p = 0; p < P; ++p) db[oc] += g[oc * P + p];
          }
          n.parents[2]->accumulate(db);
        }
      });
}

template <typename T>
Var<T> upsample_nearest2x(const Var<T>& x) {
  const auto& s = x->value.shape();
  if (s.size() != 4) throw ShapeError("upsample_nearest2x expects [B,C,H,W]");
  const size_t BC = s[0] * s[1], H = s[2], W = s[3];
  Tensor<T> out({s[0], s[1], 2 * H, 2 * W});
  for (size_t bc = 0; bc < BC; ++bc) {
    const T* src = x->value.data() + bc * H * W;
    T* dst = out.data() + bc * 4 * H * W;
    for (size_t i = 0; i < 2 * H; ++i)
      for (size_t j = 0; j < 2 * W; ++j)
        dst[i * 2 * W + j] = src[(i / 2) * W + j / 2];
  }
  return make_op<T>(std::move(out), {x}, [BC, H, W](Node<T>& n) {
    Tensor<T> dx(n.parents[0]->value.shape());
    for (size_t bc = 0; bc < BC; ++bc) {
      const T* g = n.grad.data() + bc * 4 * H * W;
      T* d = dx.data() + bc * H * W;
      for (size_t i = 0; i < 2 * H; ++i)
        for (size_t j = 0; j < 2 * W; ++j) d[(i / 2) * W + j / 2] += g[i * 2 * W + j];
    }
    n.parents[0]->accumulate(dx);
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const auto& sa = a->value.shape();
  const auto& sb = b->value.shape();
  if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] ||
      sa[3] != sb[3])
    throw ShapeError("concat_channels: incompatible shapes " +
                     a->value.shape_str() + " vs " + b->value.shape_str());
  const size_t B = sa[0], Ca = sa[1], Cb = sb[1], HW = sa[2] * sa[3];
  Tensor<T> out({B, Ca + Cb, sa[2], sa[3]});
  for (size_t bi = 0; bi < B; ++bi) {
    std::copy_n(a->value.data() + bi * Ca * HW, Ca * HW,
                out.data() + bi * (Ca + Cb) * HW);
    std::copy_n(b->value.data() + bi * Cb * HW, Cb * HW,
                out.data() + bi * (Ca + Cb) * HW + Ca * HW);
  }
  return make_op<T>(std::move(out), {a, b}, [B, Ca, Cb, HW](Node<T>& n) {
    Tensor<T> da(n.parents[0]->value.shape()), db(n.parents[1]->value.shape());
    for (size_t bi = 0; bi < B; ++bi) {
      const T* g = n.grad.data() + bi * (Ca + Cb) * HW;
      T* pa = da.data() + bi * Ca * HW;
      T* pb = db.data() + bi * Cb * HW;
      for (size_t i = 0; i < Ca * HW; ++i) pa[i] += g[i];
      for (size_t i = 0; i < Cb * HW; ++i) pb[i] += g[i + Ca * HW];
    }
    n.parents[0]->accumulate(da);
    n.parents[1]->accumulate(db);
  });
}

// [B,C,H,W] -> [B*H*W, C]: one row per spatial position (batch-major, then
// row-major spatial order), used to treat positions as attention tokens.
template <typename T>
Var<T> bchw_to_tokens(const Var<T>& x) {
  const auto& s = x->value.shape();
  if (s.size() != 4) throw ShapeError("bchw_to_tokens expects [B,C,H,W]");
  const size_t B = s[0], C = s[1], HW = s[2] * s[3];
  Tensor<T> out({B * HW, C});
  for (size_t bi = 0; bi < B; ++bi)
    for (size_t c = 0; c < C; ++c)
      for (size_t p = 0; p < HW; ++p)
        out[(bi * HW + p) * C + c] = x->value[(bi * C + c) * HW + p];
  return make_op<T>(std::move(out), {x}, [B, C, HW](Node<T>& n) {
    Tensor<T> dx(n.parents[0]->value.shape());
    for (size_t bi = 0; bi < B; ++bi)
      for (size_t c = 0; c < C; ++c)
        for (size_t p = 0; p < HW; ++p)
          dx[(bi * C + c) * HW + p] = n.grad[(bi * HW + p) * C + c];
    n.parents[0]->accumulate(dx);
  });
}

template <typename T>
Var<T> tokens_to_bchw(const Var<T>& x, size_t B, size_t H, size_t W) {
  const auto& s = x->value.shape();
  if (s.size() != 2 || s[0] != B * H * W)
    throw ShapeError("tokens_to_bchw: token count mismatch");
  const size_t C = s[1], HW = H * W;
  Tensor<T> out({B, C, H, W});
  for (size_t bi = 0; bi < B; ++bi)
    for (size_t c = 0; c < C; ++c)
      for (size_t p = 0; p < HW; ++p)
        out[(bi * C + c) * HW + p] = x->value[(bi * HW + p) * C + c];
  return make_op<T>(std::move(out), {x}, [B, C, HW](Node<T>& n) {
    Tensor<T> dx(n.parents[0]->value.shape());
    for (size_t bi = 0; bi < B; ++bi)
      for (size_t c = 0; c < C; ++c)
        for (size_t p = 0; p < HW; ++p)
          dx[(bi * HW + p) * C + c] = n.grad[(bi * C + c) * HW + p];
    n.parents[0]->accumulate(dx);
  });
}

// Adaptive average pooling to 1x1: [B,C,H,W] -> [B,C]
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const auto& s = x->value.shape();
  if (s.size() != 4) throw ShapeError("global_avg_pool expects [B,C,H,W]");
  const size_t BC = s[0] * s[1], HW = s[2] * s[3];
  Tensor<T> out({s[0], s[1]});
  for (size_t bc = 0; bc < BC; ++bc) {
    T acc = 0;
    const T* p = x->value.data() + bc * HW;
    for (size_t i = 0; i < HW; ++i) acc += p[i];
    out[bc] = acc / T(HW);
  }
  return make_op<T>(std::move(out), {x}, [BC, HW](Node<T>& n) {
    Tensor<T> dx(n.parents[0]->value.shape());
    for (size_t bc = 0; bc < BC; ++bc) {
      const T g = n.grad[bc] / T(HW);
      T* d = dx.data() + bc * HW;
      for (size_t i = 0; i < HW; ++i) d[i] = g;
    }
    n.parents[0]->accumulate(dx);
  });
}

// out[i,:] = m[idx[i],:]; backward scatter-adds into the selected rows.
// idx entries are 0-based here (callers translate from 1-based API indices).
template <typename T>
Var<T> gather_rows(const Var<T>& m, std::vector<size_t> idx) {
  const size_t K = m->value.size(0), D = m->value.size(1);
  for (size_t r : idx)
    if (r >= K) throw IndexError("gather_rows: row index out of range");
  Tensor<T> out({idx.size(), D});
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy_n(m->value.data() + idx[i] * D, D, out.data() + i * D);
  return make_op<T>(std::move(out), {m}, [idx = std::move(idx), D](Node<T>& n) {
    Tensor<T> dm(n.parents[0]->value.shape());
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t j = 0; j < D; ++j) dm[idx[i] * D + j] += n.grad[i * D + j];
    n.parents[0]->accumulate(dm);
  });
}

// Scaled-dot-product attention specialized to one key/value token per batch
// item. q: [B*hw, C] query tokens, k/v: [B, C]. Multi-head over C = heads*dh.
// The softmax runs over a single logit, so every weight is exactly 1 and the
// softmax Jacobian w*(g - w*g) vanishes identically — the backward computes
// that expression literally, which yields exact-zero gradients into q and k.
// When `weights_out` is given, the forward stashes the [B*hw, heads] weights.
template <typename T>
Var<T> attn_single_kv(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                      size_t heads, Tensor<T>* weights_out = nullptr) {
  const size_t N = q->value.size(0), C = q->value.size(1);
  const size_t B = k->value.size(0);
  if (k->value.size(1) != C || !v->value.same_shape(k->value))
    throw ShapeError("attn_single_kv: k/v must be [B,C] matching q width");
  if (heads == 0 || C % heads != 0)
    throw ShapeError("attn_single_kv: C not divisible by head count");
  if (N % B != 0) throw ShapeError("attn_single_kv: token count not divisible by B");
  const size_t hw = N / B, dh = C / heads;
  const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));

  Tensor<T> out({N, C});
  if (weights_out) *weights_out = Tensor<T>({N, heads});
  for (size_t n = 0; n < N; ++n) {
    const size_t bi = n / hw;
    for (size_t h = 0; h < heads; ++h) {
      T logit = 0;
      for (size_t j = 0; j < dh; ++j)
        logit += q->value[n * C + h * dh + j] * k->value[bi * C + h * dh + j];
      logit *= inv_sqrt_dh;
      const T w = std::exp(logit - logit);  // softmax over the singleton axis
      if (weights_out) (*weights_out)[n * heads + h] = w;
      for (size_t j = 0; j < dh; ++j)
        out[n * C + h * dh + j] = w * v->value[bi * C + h * dh + j];
    }
  }
  return make_op<T>(std::move(out), {q, k, v},
                    [N, C, B, hw, dh, heads, inv_sqrt_dh](Node<T>& n) {
    const Tensor<T>& qv = n.parents[0]->value;
    const Tensor<T>& kv = n.parents[1]->value;
    const Tensor<T>& vv = n.parents[2]->value;
    Tensor<T> dq({N, C}), dk({B, C}), dv({B, C});
    for (size_t t = 0; t < N; ++t) {
      const size_t bi = t / hw;
      for (size_t h = 0; h < heads; ++h) {
        const T w = T(1);
        T gw = 0;
        for (size_t j = 0; j < dh; ++j) {
          const size_t c = h * dh + j;
          dv[bi * C + c] += w * n.grad[t * C + c];
          gw += n.grad[t * C + c] * vv[bi * C + c];
        }
        // Softmax backward over one element: identically zero.
        const T dlogit = w * (gw - w * gw);
        for (size_t j = 0; j < dh; ++j) {
          const size_t c = h * dh + j;
          dq[t * C + c] += dlogit * kv[bi * C + c] * inv_sqrt_dh;
          dk[bi * C + c] += dlogit * qv[t * C + c] * inv_sqrt_dh;
        }
      }
    }
    n.parents[0]->accumulate(dq);
    n.parents[1]->accumulate(dk);
    n.parents[2]->accumulate(dv);
  });
}

// Mean softmax cross-entropy over logit rows [B,C] against integer targets.
// Max-subtracted softmax; backward is the usual (p - onehot)/B.
template <typename T>
Var<T> softmax_ce_mean(const Var<T>& logits, std::vector<int> labels) {
  const size_t B = logits->value.size(0), C = logits->value.size(1);
  if (labels.size() != B) throw ShapeError("softmax_ce_mean: label count != batch");
  for (int l : labels)
    if (l < 0 || size_t(l) >= C) throw IndexError("softmax_ce_mean: label out of range");
  double acc = 0;
  for (size_t i = 0; i < B; ++i) {
    const T* row = logits->value.data() + i * C;
    double m = row[0];
    for (size_t c = 1; c < C; ++c) m = std::max(m, double(row[c]));
    double z = 0;
    for (size_t c = 0; c < C; ++c) z += std::exp(double(row[c]) - m);
    acc += -(double(row[labels[i]]) - m) + std::log(z);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / B));
  return make_op<T>(std::move(out), {logits},
                    [labels = std::move(labels), B, C](Node<T>& n) {
    Tensor<T> dl({B, C});
    const T g = n.grad[0] / static_cast<T>(B);
    for (size_t i = 0; i < B; ++i) {
      const T* row = n.parents[0]->value.data() + i * C;
      double m = row[0];
      for (size_t c = 1; c < C; ++c) m = std::max(m, double(row[c]));
      double z = 0;
      for (size_t c = 0; c < C; ++c) z += std::exp(double(row[c]) - m);
      for (size_t c = 0; c < C; ++c) {
        const double p = std::exp(double(row[c]) - m) / z;
        dl[i * C + c] = g * static_cast<T>(p - (int(c) == labels[i] ? 1.0 : 0.0));
      }
    }
    n.parents[0]->accumulate(dl);
  });
}

}  // namespace pdm::ad

// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace pdm::kern {

// Minimal single-threaded GEMM kernels. All accumulate into C (callers zero
// C when overwrite semantics are wanted). Inner loops run over contiguous
// memory so the compiler can auto-vectorize.

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, size_t M, size_t K, size_t N) {
  for (size_t i = 0; i < M; ++i) {
    const T* a = A + i * K;
    T* c = C + i * N;
    for (size_t k = 0; k < K; ++k) {
      const T av = a[k];
      const T* b = B + k * N;
      for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,N] += A[M,K] * B^T, with B stored [N,K]
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, size_t M, size_t K, size_t N) {
  for (size_t i = 0; i < M; ++i) {
    const T* a = A + i * K;
    T* c = C + i * N;
    for (size_t j = 0; j < N; ++j) {
      const T* b = B + j * K;
      T acc = 0;
      for (size_t k = 0; k < K; ++k) acc += a[k] * b[k];
      c[j] += acc;
    }
  }
}

// C[M,N] += A^T * B, with A stored [K,M], B stored [K,N]
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, size_t M, size_t K, size_t N) {
  for (size_t k = 0; k < K; ++k) {
    const T* a = A + k * M;
    const T* b = B + k * N;
    for (size_t i = 0; i < M; ++i) {
      const T av = a[i];
      T* c = C + i * N;
      for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// Unrolls conv patches of one [C,H,W] image into cols[C*kh*kw, OH*OW]
// (overwrites cols). Out-of-bounds taps read as zero padding.
template <typename T>
void im2col(const T* x, size_t C, size_t H, size_t W, size_t kh, size_t kw,
            size_t stride, size_t pad, size_t OH, size_t OW, T* cols) {
  for (size_t c = 0; c < C; ++c) {
    for (size_t ki = 0; ki < kh; ++ki) {
      for (size_t kj = 0; kj < kw; ++kj) {
        T* row = cols + ((c * kh + ki) * kw + kj) * (OH * OW);
        for (size_t oi = 0; oi < OH; ++oi) {
          const long ii = static_cast<long>(oi * stride + ki) - static_cast<long>(pad);
          if (ii < 0 || ii >= static_cast<long>(H)) {
            for (size_t oj = 0; oj < OW; ++oj) row[oi * OW + oj] = T(0);
            continue;
          }
          const T* src = x + (c * H + ii) * W;
          for (size_t oj = 0; oj < OW; ++oj) {
            const long jj = static_cast<long>(oj * stride + kj) - static_cast<long>(pad);
            row[oi * OW + oj] = (jj < 0 || jj >= static_cast<long>(W)) ? T(0) : src[jj];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds cols back into the [C,H,W] image buffer.
template <typename T>
void col2im(const T* cols, size_t C, size_t H, size_t W, size_t kh, size_t kw,
            size_t stride, size_t pad, size_t OH, size_t OW, T* x) {
  for (size_t c = 0; c < C; ++c) {
    for (size_t ki = 0; ki < kh; ++ki) {
      for (size_t kj = 0; kj < kw; ++kj) {
        const T* row = cols + ((c * kh + ki) * kw + kj) * (OH * OW);
        for (size_t oi = 0; oi < OH; ++oi) {
          const long ii = static_cast<long>(oi * stride + ki) - static_cast<long>(pad);
          if (ii < 0 || ii >= static_cast<long>(H)) continue;
          T* dst = x + (c * H + ii) * W;
          for (size_t oj = 0; oj < OW; ++oj) {
            const long jj = static_cast<long>(oj * stride + kj) - static_cast<long>(pad);
            if (jj >= 0 && jj < static_cast<long>(W)) dst[jj] += row[oi * OW + oj];
          }
        }
      }
    }
  }
}

}  // namespace pdm::kern

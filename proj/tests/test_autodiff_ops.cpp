// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fd_check.hpp"
#include "pdm/ops.hpp"
#include "pdm/rng.hpp"

using namespace pdm;
using ad::Var;
using pdm::testing::fd_max_rel_err;

namespace {
Var<double> rand_leaf(std::vector<size_t> shape, Rng& rng, double scale = 1.0) {
  return ad::leaf(Tensor<double>::randn(std::move(shape), rng, scale));
}
}  // namespace

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(1);
  auto a = rand_leaf({2, 3}, rng);
  auto b = rand_leaf({2, 3}, rng);
  CHECK(fd_max_rel_err({a, b}, [&] {
          return ad::sum_all(ad::mul(ad::add(a, b), ad::sub(a, b)));
        }) < 1e-6);
  CHECK(fd_max_rel_err({a}, [&] {
          return ad::sum_all(ad::scale(ad::silu(a), 1.7));
        }) < 1e-6);
}

TEST_CASE("matmul and linear match finite differences") {
  Rng rng(2);
  auto x = rand_leaf({3, 4}, rng);
  auto w = rand_leaf({4, 5}, rng);
  auto b = rand_leaf({5}, rng);
  auto c = ad::constant(Tensor<double>::randn({3, 5}, rng));
  CHECK(fd_max_rel_err({x, w, b}, [&] {
          return ad::sum_all(ad::mul(ad::linear(x, w, b), c));
        }) < 1e-6);
}

TEST_CASE("conv2d (stride 1 and 2, with padding) matches finite differences") {
  Rng rng(3);
  for (size_t stride : {size_t(1), size_t(2)}) {
    auto x = rand_leaf({2, 2, 4, 4}, rng);
    auto w = rand_leaf({3, 2, 3, 3}, rng, 0.5);
    auto b = rand_leaf({3}, rng);
    const size_t OH = (4 + 2 - 3) / stride + 1;
    auto c = ad::constant(Tensor<double>::randn({2, 3, OH, OH}, rng));
    CHECK(fd_max_rel_err({x, w, b}, [&] {
            return ad::sum_all(ad::mul(ad::conv2d(x, w, b, stride, 1), c));
          }) < 1e-6);
  }
}

TEST_CASE("conv2d 1x1 without padding matches finite differences") {
  Rng rng(4);
  auto x = rand_leaf({1, 3, 2, 2}, rng);
  auto w = rand_leaf({2, 3, 1, 1}, rng);
  auto b = rand_leaf({2}, rng);
  auto c = ad::constant(Tensor<double>::randn({1, 2, 2, 2}, rng));
  CHECK(fd_max_rel_err({x, w, b}, [&] {
          return ad::sum_all(ad::mul(ad::conv2d(x, w, b, 1, 0), c));
        }) < 1e-6);
}

TEST_CASE("conv2d forward agrees with a direct correlation") {
  // 1x1x3x3 input, 1x1x2x2 kernel, stride 1, no padding
  auto x = ad::leaf(Tensor<double>({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
  auto w = ad::leaf(Tensor<double>({1, 1, 2, 2}, {1, 0, 0, -1}));
  auto b = ad::leaf(Tensor<double>({1}, {0.5}));
  auto y = ad::conv2d(x, w, b, 1, 0);
  // each output = x[i,j] - x[i+1,j+1] + 0.5 = -4 + 0.5
  for (size_t i = 0; i < 4; ++i) CHECK(y->value[i] == doctest::Approx(-3.5));
}

TEST_CASE("standardize_blocks output has zero mean / unit variance per block") {
  Rng rng(5);
  auto x = rand_leaf({4, 6}, rng, 3.0);
  auto y = ad::standardize_blocks(x, 6);
  for (size_t r = 0; r < 4; ++r) {
    double m = 0, v = 0;
    for (size_t j = 0; j < 6; ++j) m += y->value[r * 6 + j];
    m /= 6;
    for (size_t j = 0; j < 6; ++j) {
      const double d = y->value[r * 6 + j] - m;
      v += d * d;
    }
    CHECK(std::abs(m) < 1e-12);
    CHECK(v / 6 == doctest::Approx(1.0).epsilon(1e-4));  // eps shifts it slightly
  }
}

TEST_CASE("standardize_blocks and group_norm match finite differences") {
  Rng rng(6);
  auto x = rand_leaf({2, 8}, rng);
  auto c = ad::constant(Tensor<double>::randn({2, 8}, rng));
  CHECK(fd_max_rel_err({x}, [&] {
          return ad::sum_all(ad::mul(ad::standardize_blocks(x, 8), c));
        }) < 1e-5);

  auto im = rand_leaf({2, 4, 2, 2}, rng);  // group size 4 -> one group of 16
  auto cc = ad::constant(Tensor<double>::randn({2, 4, 2, 2}, rng));
  CHECK(fd_max_rel_err({im}, [&] {
          return ad::sum_all(ad::mul(ad::group_norm(im), cc));
        }) < 1e-5);
}

TEST_CASE("group size picks the largest divisor at most 8") {
  CHECK(ad::group_size_for(16) == 8);
  CHECK(ad::group_size_for(8) == 8);
  CHECK(ad::group_size_for(4) == 4);
  CHECK(ad::group_size_for(12) == 6);
  CHECK(ad::group_size_for(1) == 1);
}

TEST_CASE("upsample, concat, tokens, pool, gather, reshape match finite differences") {
  Rng rng(7);
  auto x = rand_leaf({2, 3, 2, 2}, rng);
  auto c4 = ad::constant(Tensor<double>::randn({2, 3, 4, 4}, rng));
  CHECK(fd_max_rel_err({x}, [&] {
          return ad::sum_all(ad::mul(ad::upsample_nearest2x(x), c4));
        }) < 1e-6);

  auto a = rand_leaf({2, 2, 2, 2}, rng);
  auto b = rand_leaf({2, 3, 2, 2}, rng);
  auto c5 = ad::constant(Tensor<double>::randn({2, 5, 2, 2}, rng));
  CHECK(fd_max_rel_err({a, b}, [&] {
          return ad::sum_all(ad::mul(ad::concat_channels(a, b), c5));
        }) < 1e-6);

  auto ct = ad::constant(Tensor<double>::randn({8, 3}, rng));
  CHECK(fd_max_rel_err({x}, [&] {
          return ad::sum_all(ad::mul(ad::bchw_to_tokens(x), ct));
        }) < 1e-6);
  auto cb = ad::constant(Tensor<double>::randn({2, 3, 2, 2}, rng));
  CHECK(fd_max_rel_err({x}, [&] {
          return ad::sum_all(
              ad::mul(ad::tokens_to_bchw(ad::bchw_to_tokens(x), 2, 2, 2), cb));
        }) < 1e-6);

  auto cp = ad::constant(Tensor<double>::randn({2, 3}, rng));
  CHECK(fd_max_rel_err({x}, [&] {
          return ad::sum_all(ad::mul(ad::global_avg_pool(x), cp));
        }) < 1e-6);

  auto m = rand_leaf({4, 3}, rng);
  auto cg = ad::constant(Tensor<double>::randn({5, 3}, rng));
  CHECK(fd_max_rel_err({m}, [&] {
          return ad::sum_all(ad::mul(ad::gather_rows(m, {0, 2, 2, 3, 1}), cg));
        }) < 1e-6);

  auto cr = ad::constant(Tensor<double>::randn({12, 2}, rng));
  CHECK(fd_max_rel_err({x}, [&] {
          return ad::sum_all(ad::mul(ad::reshape(x, {12, 2}), cr));
        }) < 1e-6);
}

TEST_CASE("token round-trip is the identity") {
  Rng rng(8);
  auto x = rand_leaf({2, 3, 2, 4}, rng);
  auto y = ad::tokens_to_bchw(ad::bchw_to_tokens(x), 2, 2, 4);
  for (size_t i = 0; i < x->value.numel(); ++i) CHECK(y->value[i] == x->value[i]);
}

TEST_CASE("single-key attention: weights are exactly one") {
  Rng rng(9);
  auto q = rand_leaf({6, 8}, rng);  // B=2, hw=3
  auto k = rand_leaf({2, 8}, rng);
  auto v = rand_leaf({2, 8}, rng);
  Tensor<double> weights;
  auto out = ad::attn_single_kv(q, k, v, 4, &weights);
  REQUIRE(weights.shape() == std::vector<size_t>{6, 4});
  for (size_t i = 0; i < weights.numel(); ++i) CHECK(weights[i] == 1.0);
  // output is v broadcast over the positions of its batch item
  for (size_t n = 0; n < 6; ++n)
    for (size_t c = 0; c < 8; ++c)
      CHECK(out->value[n * 8 + c] == v->value[(n / 3) * 8 + c]);
}

TEST_CASE("single-key attention: gradients into q and k are exactly zero") {
  Rng rng(10);
  auto q = rand_leaf({6, 8}, rng);
  auto k = rand_leaf({2, 8}, rng);
  auto v = rand_leaf({2, 8}, rng);
  auto c = ad::constant(Tensor<double>::randn({6, 8}, rng));
  auto loss = ad::sum_all(ad::mul(ad::attn_single_kv(q, k, v, 4), c));
  ad::backward(loss);
  REQUIRE(q->grad.defined());
  REQUIRE(k->grad.defined());
  for (size_t i = 0; i < q->grad.numel(); ++i) CHECK(q->grad[i] == 0.0);
  for (size_t i = 0; i < k->grad.numel(); ++i) CHECK(k->grad[i] == 0.0);
  // v receives the position-summed upstream gradient
  for (size_t b = 0; b < 2; ++b)
    for (size_t j = 0; j < 8; ++j) {
      double expect = 0;
      for (size_t p = 0; p < 3; ++p) expect += c->value[(b * 3 + p) * 8 + j];
      CHECK(v->grad[b * 8 + j] == doctest::Approx(expect).epsilon(1e-12));
    }
  ad::zero_grad(q);
  ad::zero_grad(k);
  ad::zero_grad(v);
}

TEST_CASE("single-key attention matches finite differences (v path live)") {
  Rng rng(11);
  auto q = rand_leaf({4, 4}, rng);
  auto k = rand_leaf({2, 4}, rng);
  auto v = rand_leaf({2, 4}, rng);
  auto c = ad::constant(Tensor<double>::randn({4, 4}, rng));
  CHECK(fd_max_rel_err({q, k, v}, [&] {
          return ad::sum_all(ad::mul(ad::attn_single_kv(q, k, v, 2), c));
        }) < 1e-6);
}

TEST_CASE("diamond graphs accumulate through shared nodes") {
  auto x = ad::leaf(Tensor<double>({1}, {3.0}));
  auto z = ad::mul(x, x);
  auto w = ad::add(z, z);  // w = 2 x^2, dw/dx = 4x = 12
  ad::backward(w);
  CHECK(x->grad[0] == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("repeated backward calls accumulate independently per graph") {
  auto x = ad::leaf(Tensor<double>({1}, {2.0}));
  auto y1 = ad::mul(x, x);
  ad::backward(y1);
  CHECK(x->grad[0] == doctest::Approx(4.0));
  ad::zero_grad(x);
  auto y2 = ad::mul(ad::mul(x, x), x);
  ad::backward(y2);
  CHECK(x->grad[0] == doctest::Approx(12.0));
}

TEST_CASE("NoGradGuard drops the tape") {
  auto x = ad::leaf(Tensor<double>({2}, {1.0, 2.0}));
  {
    ad::NoGradGuard ng;
    auto y = ad::sum_all(ad::mul(x, x));
    CHECK_FALSE(y->requires_grad);
    CHECK(y->parents.empty());
    ad::backward(y);  // no-op
    CHECK_FALSE(x->grad.defined());
  }
  // grads flow again after the guard is gone
  auto y = ad::sum_all(ad::mul(x, x));
  CHECK(y->requires_grad);
}

TEST_CASE("deep chains do not overflow the stack") {
  auto x = ad::leaf(Tensor<double>({1}, {1.0}));
  Var<double> y = x;
  for (int i = 0; i < 200000; ++i) y = ad::scale(y, 1.0);
  ad::backward(y);
  CHECK(x->grad[0] == doctest::Approx(1.0));
}

TEST_CASE("shape errors are raised eagerly") {
  auto a = ad::leaf(Tensor<double>({2, 3}));
  auto b = ad::leaf(Tensor<double>({3, 2}));
  CHECK_THROWS_AS(ad::add(a, b), pdm::ShapeError);
  CHECK_THROWS_AS(ad::standardize_blocks(a, 4), pdm::ShapeError);
  auto m = ad::leaf(Tensor<double>({4, 3}));
  CHECK_THROWS_AS(ad::gather_rows(m, {4}), pdm::IndexError);
}

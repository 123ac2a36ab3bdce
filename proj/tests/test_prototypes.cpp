// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fd_check.hpp"
#include "pdm/prototypes.hpp"

using namespace pdm;

namespace {
PrototypeBank<double> bank_from(std::vector<std::vector<double>> rows) {
  PrototypeBank<double> b;
  b.K = rows.size();
  b.D = rows[0].size();
  b.e = Tensor<double>({b.K, b.D});
  for (size_t k = 0; k < b.K; ++k)
    std::copy(rows[k].begin(), rows[k].end(), b.e.data() + k * b.D);
  return b;
}
}  // namespace

TEST_CASE("assign: membership, nearest, and tie-break to lowest index") {
  auto b = bank_from({{0, 0}, {2, 0}});

  Tensor<double> at_e2({2}, {2.0, 0.0});
  auto a2 = assign(at_e2, b);
  CHECK(a2.index == 2);
  CHECK(a2.distance_sq == doctest::Approx(0.0));

  Tensor<double> x({2}, {1.2, 0.0});
  auto a = assign(x, b);
  CHECK(a.index == 2);
  CHECK(a.distance_sq == doctest::Approx(0.64));

  Tensor<double> tie({2}, {1.0, 0.0});
  auto at = assign(tie, b);
  CHECK(at.index == 1);  // equal distances resolve to the lowest index
  CHECK(at.distance_sq == doctest::Approx(1.0));
}

TEST_CASE("assign: permutation of non-selected prototypes cannot change the winner") {
  Rng rng(21);
  auto e = Tensor<double>::randn({5, 3}, rng);
  PrototypeBank<double> b{5, 3, e, std::nullopt};
  Tensor<double> x = Tensor<double>::randn({3}, rng);
  const auto base = assign(x, b);

  // swap two non-selected rows; selected row index follows the swap
  PrototypeBank<double> p = b;
  size_t i = base.index == 1 ? 2 : 1, j = base.index == 3 ? 4 : 3;
  i -= 1;
  j -= 1;  // to 0-based rows distinct from the winner
  for (size_t d = 0; d < 3; ++d)
    std::swap(p.e[i * 3 + d], p.e[j * 3 + d]);
  const auto after = assign(x, p);
  CHECK(after.distance_sq == doctest::Approx(base.distance_sq));
  // winner's row moved only if the winner was i or j; it wasn't:
  CHECK(after.index == base.index);
}

TEST_CASE("assign: dimension mismatch and call counting") {
  auto b = bank_from({{0, 0}});
  Tensor<double> bad({3});
  CHECK_THROWS_AS(assign(bad, b), pdm::ShapeError);
  const uint64_t before = g_assign_calls.load();
  Tensor<double> ok({2});
  assign(ok, b);
  assign(ok, b);
  CHECK(g_assign_calls.load() == before + 2);
}

TEST_CASE("contrastive: K=1 gives exactly zero") {
  auto b = bank_from({{1.0, -2.0}});
  Tensor<double> x({2}, {0.3, 0.4});
  auto lg = contrastive_loss(x.data(), 2, b, 1, 1.0);
  CHECK(lg.value == 0.0);
  for (size_t i = 0; i < 2; ++i) CHECK(lg.d_x[i] == doctest::Approx(0.0));
}

TEST_CASE("contrastive: equal distances give ln K (1e-9)") {
  for (size_t K : {size_t(2), size_t(4), size_t(10)}) {
    // prototypes on a ring equidistant from the origin query
    std::vector<std::vector<double>> rows;
    for (size_t k = 0; k < K; ++k) {
      const double th = 2 * M_PI * k / K;
      rows.push_back({2 * std::cos(th), 2 * std::sin(th)});
    }
    auto b = bank_from(rows);
    Tensor<double> x({2}, {0.0, 0.0});
    auto lg = contrastive_loss(x.data(), 2, b, 1, 0.7);
    CHECK(std::abs(lg.value - std::log(double(K))) < 1e-9);
  }
}

TEST_CASE("contrastive: distances [0,1] at tau=1 give ln(1+e^-1)") {
  auto b = bank_from({{0.0}, {1.0}});
  Tensor<double> x({1}, {0.0});
  auto lg = contrastive_loss(x.data(), 1, b, 1, 1.0);
  CHECK(lg.value == doctest::Approx(0.31326).epsilon(1e-4));
}

TEST_CASE("contrastive: nonnegative, zero iff assigned softmax prob is one") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t K = 1 + rng.uniform_int(1, 5), D = 2 + rng.uniform_int(0, 6);
    PrototypeBank<double> b{K, D, Tensor<double>::randn({K, D}, rng), std::nullopt};
    Tensor<double> x = Tensor<double>::randn({D}, rng);
    auto a = assign(x, b);
    auto lg = contrastive_loss(x.data(), D, b, a.index, 0.5 + rng.uniform());
    CHECK(lg.value >= 0.0);
  }
  // far-away negatives push the assigned probability to 1 and the loss to 0
  auto b = bank_from({{0.0, 0.0}, {1e4, 0.0}});
  Tensor<double> x({2}, {0.0, 0.0});
  CHECK(contrastive_loss(x.data(), 2, b, 1, 1.0).value == doctest::Approx(0.0));
}

TEST_CASE("contrastive: tau rescales values but never the softmax argmax") {
  Rng rng(32);
  const size_t K = 4, D = 3;
  PrototypeBank<double> b{K, D, Tensor<double>::randn({K, D}, rng), std::nullopt};
  Tensor<double> x = Tensor<double>::randn({D}, rng);
  const auto a = assign(x, b);
  // the assigned prototype (smallest distance) has maximal probability at any tau;
  // equivalently its loss is the smallest over choices of the "positive" index.
  for (double tau : {0.1, 1.0, 3.0, 17.0}) {
    double best = 1e300;
    size_t best_k = 0;
    for (size_t k = 1; k <= K; ++k) {
      const double v = contrastive_loss(x.data(), D, b, k, tau).value;
      if (v < best) {
        best = v;
        best_k = k;
      }
    }
    CHECK(best_k == a.index);
  }
}

TEST_CASE("contrastive: invalid arguments") {
  auto b = bank_from({{0.0, 0.0}});
  Tensor<double> x({2});
  CHECK_THROWS_AS(contrastive_loss(x.data(), 2, b, 1, 0.0), pdm::ConfigError);
  CHECK_THROWS_AS(contrastive_loss(x.data(), 2, b, 2, 1.0), pdm::IndexError);
  CHECK_THROWS_AS(contrastive_loss(x.data(), 1, b, 1, 1.0), pdm::ShapeError);
}

TEST_CASE("align: hand values and analytic gradient") {
  Tensor<double> x({2}, {1.0, 2.0}), e({2}, {0.0, 0.0});
  auto lg = align_loss(x.data(), e.data(), 2);
  CHECK(lg.value == doctest::Approx(5.0));
  CHECK(lg.d_x[0] == doctest::Approx(2.0));
  CHECK(lg.d_x[1] == doctest::Approx(4.0));
  CHECK(lg.d_e[0] == doctest::Approx(-2.0));
  CHECK(lg.d_e[1] == doctest::Approx(-4.0));
  auto zero = align_loss(x.data(), x.data(), 2);
  CHECK(zero.value == 0.0);
}

TEST_CASE("compact: orthogonal zero, identical pair 2.0, K=1 zero") {
  auto ortho = bank_from({{1.0, 0.0}, {0.0, 1.0}});
  CHECK(compact_loss(ortho, 1.0).value == doctest::Approx(0.0));

  auto same = bank_from({{1.0, 0.0}, {1.0, 0.0}});
  CHECK(compact_loss(same, 1.0).value == doctest::Approx(2.0));  // ordered pairs

  auto solo = bank_from({{3.0, 4.0}});
  CHECK(compact_loss(solo, 1.0).value == 0.0);

  // beta scales linearly
  CHECK(compact_loss(same, 2.5).value == doctest::Approx(5.0));
}

TEST_CASE("compact: permuting the bank leaves the value unchanged") {
  Rng rng(41);
  PrototypeBank<double> b{4, 3, Tensor<double>::randn({4, 3}, rng), std::nullopt};
  const double v0 = compact_loss(b, 1.3).value;
  PrototypeBank<double> p = b;
  // rotate rows by one
  for (size_t k = 0; k < 4; ++k)
    for (size_t d = 0; d < 3; ++d) p.e[k * 3 + d] = b.e[((k + 1) % 4) * 3 + d];
  CHECK(compact_loss(p, 1.3).value == doctest::Approx(v0).epsilon(1e-12));
}

TEST_CASE("compact: zero-norm prototype is rejected; eval counter ticks") {
  auto b = bank_from({{0.0, 0.0}, {1.0, 0.0}});
  CHECK_THROWS_AS(compact_loss(b, 1.0), pdm::NumericError);
  auto ok = bank_from({{1.0, 0.0}, {0.0, 1.0}});
  const uint64_t before = g_compact_evals.load();
  compact_loss(ok, 1.0);
  CHECK(g_compact_evals.load() >= before + 1);
}

TEST_CASE("all three loss gradients match central differences (K in {1,2,5}, D in {2,8})") {
  Rng rng(51);
  for (size_t K : {size_t(1), size_t(2), size_t(5)}) {
    for (size_t D : {size_t(2), size_t(8)}) {
      for (int rep = 0; rep < 3; ++rep) {
        Tensor<double> e = Tensor<double>::randn({K, D}, rng);
        Tensor<double> x = Tensor<double>::randn({D}, rng);
        PrototypeBank<double> b{K, D, e, std::nullopt};
        const auto a = assign(x, b);
        const double tau = 0.3 + 2.0 * rng.uniform();
        const double h = 1e-5;

        // contrastive w.r.t. x and every prototype
        {
          auto lg = contrastive_loss(x.data(), D, b, a.index, tau);
          for (size_t j = 0; j < D; ++j) {
            Tensor<double> xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const double fd = (contrastive_loss(xp.data(), D, b, a.index, tau).value -
                               contrastive_loss(xm.data(), D, b, a.index, tau).value) /
                              (2 * h);
            CHECK(std::abs(lg.d_x[j] - fd) /
                      std::max({std::abs(lg.d_x[j]), std::abs(fd), 1e-4}) <
                  1e-5);
          }
          for (size_t k = 0; k < K; ++k)
            for (size_t j = 0; j < D; ++j) {
              PrototypeBank<double> bp = b, bm = b;
              bp.e[k * D + j] += h;
              bm.e[k * D + j] -= h;
              const double fd =
                  (contrastive_loss(x.data(), D, bp, a.index, tau).value -
                   contrastive_loss(x.data(), D, bm, a.index, tau).value) /
                  (2 * h);
              const double an = lg.d_e[k * D + j];
              CHECK(std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-4}) <
                    1e-5);
            }
        }

        // align w.r.t. x and the selected prototype
        {
          const size_t k0 = a.index - 1;
          auto lg = align_loss(x.data(), b.row(k0), D);
          for (size_t j = 0; j < D; ++j) {
            Tensor<double> xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const double fd = (align_loss(xp.data(), b.row(k0), D).value -
                               align_loss(xm.data(), b.row(k0), D).value) /
                              (2 * h);
            CHECK(std::abs(lg.d_x[j] - fd) /
                      std::max({std::abs(lg.d_x[j]), std::abs(fd), 1e-4}) <
                  1e-5);
          }
        }

        // compact w.r.t. every prototype
        {
          const double beta = 0.5 + rng.uniform();
          auto lg = compact_loss(b, beta);
          for (size_t k = 0; k < K; ++k)
            for (size_t j = 0; j < D; ++j) {
              PrototypeBank<double> bp = b, bm = b;
              bp.e[k * D + j] += h;
              bm.e[k * D + j] -= h;
              const double fd =
                  (compact_loss(bp, beta).value - compact_loss(bm, beta).value) /
                  (2 * h);
              const double an = lg.d_e[k * D + j];
              CHECK(std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-4}) <
                    1e-5);
            }
        }
      }
    }
  }
}

TEST_CASE("autodiff bridges agree with the analytic losses and finite differences") {
  Rng rng(61);
  const size_t B = 3, K = 4, D = 5;
  auto xhat = ad::leaf(Tensor<double>::randn({B, D}, rng));
  auto protos = ad::leaf(Tensor<double>::randn({K, D}, rng));
  std::vector<size_t> idx0;
  PrototypeBank<double> view{K, D, protos->value, std::nullopt};
  for (size_t i = 0; i < B; ++i)
    idx0.push_back(assign(xhat->value.data() + i * D, D, view).index - 1);
  const double tau = 1.3, beta = 0.8;

  // values equal the batch means of the analytic losses
  double cexp = 0, aexp = 0;
  for (size_t i = 0; i < B; ++i) {
    cexp += contrastive_loss(xhat->value.data() + i * D, D, view, idx0[i] + 1, tau).value;
    aexp += align_loss(xhat->value.data() + i * D, view.row(idx0[i]), D).value;
  }
  CHECK(contrastive_mean(xhat, protos, idx0, tau)->value.item() ==
        doctest::Approx(cexp / B).epsilon(1e-12));
  CHECK(align_mean(xhat, protos, idx0)->value.item() ==
        doctest::Approx(aexp / B).epsilon(1e-12));
  CHECK(compact_mean(protos, beta)->value.item() ==
        doctest::Approx(compact_loss(view, beta).value).epsilon(1e-12));

  using pdm::testing::fd_max_rel_err;
  CHECK(fd_max_rel_err({xhat, protos}, [&] {
          return contrastive_mean(xhat, protos, idx0, tau);
        }) < 1e-5);
  CHECK(fd_max_rel_err({xhat, protos}, [&] {
          return align_mean(xhat, protos, idx0);
        }) < 1e-5);
  CHECK(fd_max_rel_err({protos}, [&] { return compact_mean(protos, beta); }) < 1e-5);
}

TEST_CASE("supervised bindings: bijection enforced, lookup by class") {
  Rng rng(71);
  auto b = PrototypeBank<double>::init_random(3, 4, rng);
  b.bind_labels({2, 0, 1});
  CHECK(b.row_for_label(2) == 0);
  CHECK(b.row_for_label(0) == 1);
  CHECK(b.row_for_label(1) == 2);
  CHECK_THROWS_AS(b.row_for_label(3), pdm::IndexError);

  auto bad = PrototypeBank<double>::init_random(3, 4, rng);
  CHECK_THROWS_AS(bad.bind_labels({0, 0, 1}), pdm::ConfigError);
  CHECK_THROWS_AS(bad.bind_labels({0, 1}), pdm::ConfigError);
  CHECK_THROWS_AS(bad.row_for_label(0), pdm::ConfigError);
}

TEST_CASE("init_random is seeded and respects K, D preconditions") {
  Rng a(81), b(81);
  auto p1 = PrototypeBank<float>::init_random(4, 8, a);
  auto p2 = PrototypeBank<float>::init_random(4, 8, b);
  for (size_t i = 0; i < p1.e.numel(); ++i) CHECK(p1.e[i] == p2.e[i]);
  Rng c(82);
  CHECK_THROWS_AS(PrototypeBank<float>::init_random(0, 8, c), pdm::ConfigError);
}

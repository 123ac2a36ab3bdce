// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pdm/data.hpp"
#include "pdm/metrics.hpp"

using namespace pdm;

TEST_CASE("inception score: closed-form cases") {
  // Uniform rows: conditional == marginal, KL = 0, IS = 1 exactly.
  Tensor<double> uni({4, 3}, std::vector<double>(12, 1.0 / 3.0));
  CHECK(inception_score(uni) == 1.0);

  // One one-hot row per class: marginal is uniform, KL = ln C, IS = C.
  for (size_t C : {2, 3, 5}) {
    Tensor<double> onehot = Tensor<double>::zeros({C, C});
    for (size_t i = 0; i < C; ++i) onehot[i * C + i] = 1.0;
    CHECK(inception_score(onehot) == doctest::Approx(double(C)).epsilon(1e-12));
  }

  // Two opposing one-hot rows in a 2-class problem: IS = 2.
  Tensor<double> two({2, 2}, {1, 0, 0, 1});
  CHECK(inception_score(two) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("inception score: validation and range invariant") {
  Tensor<double> bad({1, 2}, {0.7, 0.7});
  CHECK_THROWS_AS(inception_score(bad), DataError);
  Tensor<double> neg({1, 2}, {1.5, -0.5});
  CHECK_THROWS_AS(inception_score(neg), DataError);

  // IS ∈ [1, C] for arbitrary normalized rows.
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const size_t N = 8, C = 4;
    Tensor<double> p({N, C});
    for (size_t i = 0; i < N; ++i) {
      double z = 0;
      for (size_t c = 0; c < C; ++c) {
        p[i * C + c] = std::exp(rng.normal());
        z += p[i * C + c];
      }
      for (size_t c = 0; c < C; ++c) p[i * C + c] /= z;
    }
    const double is = inception_score(p);
    CHECK(is >= 1.0 - 1e-12);
    CHECK(is <= double(C) + 1e-12);
  }
}

TEST_CASE("gaussian_stats: hand-checked mean and n-1 covariance") {
  // Rows (0,0), (2,0), (0,2), (2,2): mean (1,1), cov = diag(4/3, 4/3).
  Tensor<double> X({4, 2}, {0, 0, 2, 0, 0, 2, 2, 2});
  GaussianStats s = gaussian_stats(X);
  CHECK(s.n == 4);
  CHECK(s.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.mean[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.cov(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(s.cov(1, 1) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(s.cov(0, 1)) < 1e-12);
  Tensor<double> one({1, 2}, {0, 0});
  CHECK_THROWS_AS(gaussian_stats(one), DataError);
}

static GaussianStats make_stats(std::vector<double> mean,
                                std::vector<double> cov_rowmajor) {
  GaussianStats s;
  const size_t F = mean.size();
  s.mean = Eigen::VectorXd(F);
  s.cov = Eigen::MatrixXd(F, F);
  for (size_t i = 0; i < F; ++i) s.mean[i] = mean[i];
  for (size_t i = 0; i < F; ++i)
    for (size_t j = 0; j < F; ++j) s.cov(i, j) = cov_rowmajor[i * F + j];
  s.n = 100;
  return s;
}

TEST_CASE("fid: closed-form Gaussian cases") {
  // Self-distance vanishes.
  Rng rng(9);
  Tensor<double> X = Tensor<double>::randn({40, 5}, rng);
  GaussianStats sx = gaussian_stats(X);
  CHECK(std::abs(fid(sx, sx)) < 1e-6);

  // 1-D, unit variances, means 0 and 1: squared mean gap only -> 1.0.
  CHECK(fid(make_stats({0}, {1}), make_stats({1}, {1})) ==
        doctest::Approx(1.0).epsilon(1e-9));

  // Commuting diagonal case diag(1,1) vs diag(4,4), equal means:
  // 2 * (1 + 4 - 2*2) = 2.0.
  CHECK(fid(make_stats({0, 0}, {1, 0, 0, 1}),
            make_stats({0, 0}, {4, 0, 0, 4})) ==
        doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("fid: symmetry, dimension mismatch, PSD rejection") {
  Rng rng(10);
  Tensor<double> A = Tensor<double>::randn({50, 4}, rng);
  Tensor<double> B = Tensor<double>::randn({50, 4}, rng, 1.7);
  for (size_t i = 0; i < B.numel(); ++i) B[i] += 0.3;
  GaussianStats sa = gaussian_stats(A), sb = gaussian_stats(B);
  CHECK(std::abs(fid(sa, sb) - fid(sb, sa)) < 1e-6);
  CHECK(fid(sa, sb) > 0);

  CHECK_THROWS_AS(fid(make_stats({0}, {1}), make_stats({0, 0}, {1, 0, 0, 1})),
                  ShapeError);
  // A covariance with eigenvalue -1 is far beyond the -1e-6 tolerance.
  CHECK_THROWS_AS(fid(make_stats({0, 0}, {-1, 0, 0, 1}),
                      make_stats({0, 0}, {1, 0, 0, 1})),
                  NumericError);
  // Asymmetric covariance input is rejected.
  CHECK_THROWS_AS(fid(make_stats({0, 0}, {1, 0.5, -0.5, 1}),
                      make_stats({0, 0}, {1, 0, 0, 1})),
                  NumericError);
}

TEST_CASE("fid agrees with the general non-commuting closed form") {
  // For Gaussians the Frechet distance with correlated covariances must
  // reproduce the trace formula computed through an independent 2x2 hand
  // eigendecomposition: Sr = [[2,1],[1,2]] (eigs 1,3), Sg = I.
  // sqrt(Sr * I) has eigs 1, sqrt(3); FID = 0 + (2+2) + 2 - 2(1+sqrt(3)).
  const double expect = 4.0 + 2.0 - 2.0 * (1.0 + std::sqrt(3.0));
  CHECK(fid(make_stats({0, 0}, {2, 1, 1, 2}), make_stats({0, 0}, {1, 0, 0, 1})) ==
        doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("kid: point-mass hand arithmetic") {
  // Two duplicated points x and y: unbiased estimator reduces to
  // k(x,x) + k(y,y) - 2 k(x,y).
  const size_t F = 3;
  Tensor<double> X({2, F}, {1, 2, 3, 1, 2, 3});
  Tensor<double> Y({2, F}, {0, 1, -1, 0, 1, -1});
  const auto k = [&](const double* a, const double* b) {
    double d = 0;
    for (size_t j = 0; j < F; ++j) d += a[j] * b[j];
    const double base = d / double(F) + 1.0;
    return base * base * base;
  };
  const double expect =
      k(X.data(), X.data()) + k(Y.data(), Y.data()) - 2 * k(X.data(), Y.data());
  CHECK(kid(X, Y) == doctest::Approx(expect).epsilon(1e-12));

  Tensor<double> single({1, F}, {0, 0, 0});
  CHECK_THROWS_AS(kid(single, Y), DataError);
  CHECK_THROWS_AS(kid(X, single), DataError);
}

TEST_CASE("kid: near zero on i.i.d. splits of one distribution") {
  // 1000 standard-normal feature rows split in half: KID within 0.01 of 0.
  Rng rng(77);
  const size_t N = 1000, F = 8;
  Tensor<double> A = Tensor<double>::randn({N / 2, F}, rng);
  Tensor<double> B = Tensor<double>::randn({N / 2, F}, rng);
  CHECK(std::abs(kid(A, B)) < 0.01);
}

TEST_CASE("kid: unbiasedness over resampled splits") {
  // Mean of the estimator over many independent i.i.d. splits should sit
  // within Monte-Carlo error of zero; a biased estimator (e.g. keeping the
  // diagonal) would show up as a systematic positive offset here.
  Rng rng(78);
  const size_t half = 64, F = 6, reps = 60;
  double acc = 0, acc2 = 0;
  for (size_t r = 0; r < reps; ++r) {
    Tensor<double> A = Tensor<double>::randn({half, F}, rng);
    Tensor<double> B = Tensor<double>::randn({half, F}, rng);
    const double v = kid(A, B);
    acc += v;
    acc2 += v * v;
  }
  const double mean = acc / reps;
  const double se = std::sqrt((acc2 / reps - mean * mean) / reps);
  CHECK(std::abs(mean) < 4 * se + 1e-4);
}

TEST_CASE("pca: axis-aligned 2-D data is a fixed point up to sign") {
  // Variance 9 along x, 1 along y. PC1 = +x, PC2 = +y after sign fixing.
  Tensor<double> X({4, 2}, {3, 1, -3, -1, 3, -1, -3, 1});
  PcaResult r = pca_project(X, 2);
  CHECK(r.eigenvalues[0] == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(r.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t i = 0; i < 4; ++i) {
    CHECK(r.projected[i * 2 + 0] == doctest::Approx(X[i * 2 + 0]).epsilon(1e-9));
    CHECK(r.projected[i * 2 + 1] == doctest::Approx(X[i * 2 + 1]).epsilon(1e-9));
  }
}

TEST_CASE("pca: eigenvalue ordering and reconstruction identity") {
  Rng rng(31);
  const size_t N = 40, D = 6;
  Tensor<double> X = Tensor<double>::randn({N, D}, rng);
  // Stretch some directions so the spectrum is well separated.
  for (size_t i = 0; i < N; ++i) {
    X[i * D + 0] *= 5.0;
    X[i * D + 1] *= 2.0;
  }
  PcaResult r = pca_project(X, 2);
  for (size_t j = 1; j < r.eigenvalues.size(); ++j)
    CHECK(r.eigenvalues[j - 1] >= r.eigenvalues[j] - 1e-12);

  // ||X_centered||^2 - ||projection||^2 = N * sum of discarded eigenvalues.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      Xm(X.data(), N, D);
  Eigen::MatrixXd centered = Xm.rowwise() - Xm.colwise().mean();
  double total = centered.squaredNorm(), kept = 0;
  for (size_t i = 0; i < N * 2; ++i) kept += r.projected[i] * r.projected[i];
  double discarded = 0;
  for (size_t j = 2; j < D; ++j) discarded += r.eigenvalues[j];
  CHECK(total - kept == doctest::Approx(N * discarded).epsilon(1e-6));
}

TEST_CASE("pca: degenerate input rejected") {
  Tensor<double> Z = Tensor<double>::zeros({5, 3});
  CHECK_THROWS_AS(pca_project(Z, 2), DataError);
  Tensor<double> tiny({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(pca_project(tiny, 2), DataError);
}

TEST_CASE("feature extractor: trains on the two-mode set and behaves") {
  Dataset data = synth_two_mode(64, 8, 3);
  FeatureExtractor fe(1, 2, /*seed=*/5);
  fe.fit(data, /*steps=*/80, /*batch=*/8, /*lr=*/3e-3, /*seed=*/5);

  Tensor<double> probs = fe.probabilities(data.images);
  REQUIRE(probs.size(0) == 64);
  REQUIRE(probs.size(1) == 2);
  size_t correct = 0;
  for (size_t i = 0; i < 64; ++i) {
    const double row = probs[i * 2] + probs[i * 2 + 1];
    CHECK(std::abs(row - 1.0) < 1e-6);
    const int pred = probs[i * 2] >= probs[i * 2 + 1] ? 0 : 1;
    correct += pred == (*data.labels)[i];
  }
  // The two modes are linearly separable with a wide margin; the proxy
  // classifier must do far better than chance for the metrics to mean much.
  CHECK(correct >= 56);  // >= 87.5%

  Tensor<double> feats = fe.features(data.images);
  CHECK(feats.size(0) == 64);
  CHECK(feats.size(1) == fe.F);
  CHECK(feats.all_finite());

  // Unlabeled data refuses to train.
  Dataset unl = data;
  unl.labels.reset();
  FeatureExtractor fe2(1, 2, 6);
  CHECK_THROWS_AS(fe2.fit(unl, 1, 4, 1e-3, 6), DataError);
}

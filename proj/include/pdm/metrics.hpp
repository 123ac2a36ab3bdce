// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "pdm/data.hpp"
#include "pdm/errors.hpp"
#include "pdm/networks.hpp"
#include "pdm/optimizer.hpp"
#include "pdm/tensor.hpp"

namespace pdm {

// exp( mean_i KL(p(y|x_i) || mean_j p(y|x_j)) ) over probability rows [N,C].
// Bounded by [1, C]; uniform rows give exactly 1.
inline double inception_score(const Tensor<double>& probs) {
  if (probs.ndim() != 2 || probs.size(0) == 0)
    throw ShapeError("inception_score expects a non-empty [N,C] matrix");
  const size_t N = probs.size(0), C = probs.size(1);
  std::vector<double> marginal(C, 0.0);
  for (size_t i = 0; i < N; ++i) {
    double row = 0;
    for (size_t c = 0; c < C; ++c) {
      const double p = probs[i * C + c];
      if (p < 0) throw DataError("inception_score: negative probability");
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-6)
      throw DataError("inception_score: row " + std::to_string(i) +
                      " sums to " + std::to_string(row));
    for (size_t c = 0; c < C; ++c) marginal[c] += probs[i * C + c] / N;
  }
  double mean_kl = 0;
  for (size_t i = 0; i < N; ++i)
    for (size_t c = 0; c < C; ++c) {
      const double p = probs[i * C + c];
      if (p > 0) mean_kl += p * std::log(p / marginal[c]) / N;
    }
  return std::exp(mean_kl);
}

// Sample mean and covariance (n-1 denominator) of feature rows.
struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  size_t n = 0;
};

inline GaussianStats gaussian_stats(const Tensor<double>& feats) {
  if (feats.ndim() != 2 || feats.size(0) < 2)
    throw DataError("gaussian_stats needs at least 2 samples");
  const size_t N = feats.size(0), F = feats.size(1);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      X(feats.data(), N, F);
  GaussianStats s;
  s.n = N;
  s.mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * centered / double(N - 1);
  return s;
}

namespace detail {
// PSD square root by eigendecomposition. Eigenvalues below -tol (relative to
// the largest magnitude) are a hard error; small negatives clamp to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M, double tol,
                                const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success)
    throw NumericError(std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, std::abs(ev.cwiseAbs().maxCoeff()));
  Eigen::VectorXd root(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -tol * scale)
      throw NumericError(std::string(what) + ": negative eigenvalue " +
                         std::to_string(ev[i]) + " beyond tolerance");
    root[i] = std::sqrt(std::max(0.0, ev[i]));
  }
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}
}  // namespace detail

// Frechet distance between Gaussians:
//   ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}).
// The cross term uses the symmetric form sqrt(S_r)*S_g*sqrt(S_r), whose
// eigenvalues match those of S_r*S_g, keeping everything in real symmetric
// eigensolvers (the usual trick from FID reference implementations).
inline double fid(const GaussianStats& real, const GaussianStats& gen) {
  if (real.mean.size() != gen.mean.size())
    throw ShapeError("fid: feature dimensions differ");
  const auto check_sym = [](const Eigen::MatrixXd& S, const char* what) {
    const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if (asym > 1e-8 * scale)
      throw NumericError(std::string(what) + ": covariance not symmetric");
  };
  check_sym(real.cov, "fid(real)");
  check_sym(gen.cov, "fid(gen)");
  const Eigen::MatrixXd Sr = 0.5 * (real.cov + real.cov.transpose());
  const Eigen::MatrixXd Sg = 0.5 * (gen.cov + gen.cov.transpose());

  const Eigen::MatrixXd root_r = detail::psd_sqrt(Sr, 1e-6, "fid(real)");
  Eigen::MatrixXd inner = root_r * Sg * root_r;
  inner = 0.5 * (inner + inner.transpose());
  const Eigen::MatrixXd cross = detail::psd_sqrt(inner, 1e-6, "fid(cross)");

  const double mean_term = (real.mean - gen.mean).squaredNorm();
  return mean_term + Sr.trace() + Sg.trace() - 2.0 * cross.trace();
}

// Unbiased squared MMD with the cubic polynomial kernel (x.y/F + 1)^3,
// diagonal excluded from the within-set sums.
inline double kid(const Tensor<double>& real, const Tensor<double>& gen) {
  if (real.ndim() != 2 || gen.ndim() != 2 || real.size(1) != gen.size(1))
    throw ShapeError("kid expects [N,F] and [M,F]");
  const size_t N = real.size(0), M = gen.size(0), F = real.size(1);
  if (N < 2 || M < 2) throw DataError("kid needs at least 2 samples per side");
  const auto k = [F](const double* x, const double* y) {
    double dot = 0;
    for (size_t j = 0; j < F; ++j) dot += x[j] * y[j];
    const double b = dot / double(F) + 1.0;
    return b * b * b;
  };
  double xx = 0, yy = 0, xy = 0;
  for (size_t i = 0; i < N; ++i)
    for (size_t j = 0; j < N; ++j)
      if (i != j) xx += k(real.data() + i * F, real.data() + j * F);
  for (size_t i = 0; i < M; ++i)
    for (size_t j = 0; j < M; ++j)
      if (i != j) yy += k(gen.data() + i * F, gen.data() + j * F);
  for (size_t i = 0; i < N; ++i)
    for (size_t j = 0; j < M; ++j) xy += k(real.data() + i * F, gen.data() + j * F);
  return xx / (double(N) * (N - 1)) + yy / (double(M) * (M - 1)) -
         2.0 * xy / (double(N) * M);
}

// Projection of centered rows onto the top principal axes (descending
// eigenvalue, sign fixed so each axis' first nonzero loading is positive).
// eigenvalues uses the 1/N covariance convention, making
//   sum_i ||x_i - reconstruction_i||^2 = N * (discarded eigenvalue sum).
struct PcaResult {
  Tensor<double> projected;          // [N, dims]
  std::vector<double> eigenvalues;   // all D, descending
  Eigen::MatrixXd components;        // [D, dims]
};

inline PcaResult pca_project(const Tensor<double>& feats, size_t dims = 2) {
  if (feats.ndim() != 2) throw ShapeError("pca_project expects [N,D]");
  const size_t N = feats.size(0), D = feats.size(1);
  if (N <= 2) throw DataError("pca_project needs more than 2 samples");
  if (dims < 1 || dims > D) throw ConfigError("pca_project: bad target dims");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      X(feats.data(), N, D);
  const Eigen::VectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd C = [&] {
    Eigen::MatrixXd centered = X.rowwise() - mean.transpose();
    return Eigen::MatrixXd(centered.transpose() * centered / double(N));
  }();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success)
    throw NumericError("pca_project: eigendecomposition failed");

  PcaResult out;
  out.eigenvalues.resize(D);
  for (size_t j = 0; j < D; ++j) out.eigenvalues[j] = es.eigenvalues()[D - 1 - j];
  if (out.eigenvalues[0] <= 1e-12)
    throw DataError("pca_project: degenerate (rank-0) input");

  out.components = Eigen::MatrixXd(D, dims);
  for (size_t j = 0; j < dims; ++j) {
    Eigen::VectorXd v = es.eigenvectors().col(D - 1 - j);
    for (Eigen::Index r = 0; r < v.size(); ++r) {
      if (v[r] != 0.0) {
        if (v[r] < 0) v = -v;
        break;
      }
    }
    out.components.col(j) = v;
  }
  Eigen::MatrixXd centered = X.rowwise() - mean.transpose();
  Eigen::MatrixXd proj = centered * out.components;
  out.projected = Tensor<double>({N, dims});
  for (size_t i = 0; i < N; ++i)
    for (size_t j = 0; j < dims; ++j) out.projected[i * dims + j] = proj(i, j);
  return out;
}

// ---- Proxy feature extractor -------------------------------------------------
// Desk-scale stand-in for a pretrained vision backbone: a small CNN
// classifier trained on the evaluation dataset. Probabilities feed the proxy
// inception score; penultimate pooled features feed proxy FID/KID. Metrics
// computed with it are labeled proxy_* everywhere.
struct FeatureExtractor {
  size_t in_ch = 0, classes = 0, F = 0;
  Conv2dLayer<float> conv1, conv2;
  LinearLayer<float> head;

  FeatureExtractor(size_t in_channels, size_t num_classes, uint64_t seed,
                   size_t width = 16)
      : in_ch(in_channels), classes(num_classes), F(width) {
    if (num_classes < 2) throw ConfigError("feature extractor needs >= 2 classes");
    Rng rng = Rng(seed).derive("feature_extractor");
    conv1 = Conv2dLayer<float>(in_ch, width / 2, 3, 2, 1, rng);
    conv2 = Conv2dLayer<float>(width / 2, width, 3, 2, 1, rng);
    head = LinearLayer<float>(width, classes, rng);
  }

  ad::Var<float> features_graph(const ad::Var<float>& x) const {
    return ad::global_avg_pool(ad::silu(conv2(ad::silu(conv1(x)))));
  }

  ParamMap<float> params() {
    ParamMap<float> pm;
    conv1.params(pm, "fe.conv1");
    conv2.params(pm, "fe.conv2");
    head.params(pm, "fe.head");
    return pm;
  }

  // Supervised training on the (labeled) evaluation dataset.
  void fit(const Dataset& data, size_t steps, size_t batch, double lr, uint64_t seed) {
    if (!data.labels) throw DataError("feature extractor needs a labeled dataset");
    Adam<float> opt;
    opt.lr = lr;
    Rng rng = Rng(seed).derive("fe_train");
    ParamMap<float> pm = params();
    const size_t n = data.size();
    for (size_t s = 0; s < steps; ++s) {
      Tensor<float> xb({batch, data.C, data.H, data.W});
      std::vector<int> yb(batch);
      for (size_t i = 0; i < batch; ++i) {
        const size_t pick = rng.uniform_int(0, n - 1);
        std::copy_n(data.images[pick].data(), data.images[pick].numel(),
                    xb.data() + i * data.C * data.H * data.W);
        yb[i] = (*data.labels)[pick];
      }
      auto logits = head(features_graph(ad::constant(std::move(xb))));
      auto loss = ad::softmax_ce_mean(logits, yb);
      if (!loss->value.all_finite()) throw NumericError("feature extractor diverged");
      ad::backward(loss);
      opt.step(pm);
    }
  }

  // Penultimate features, one row per image. [N, F] in double for metrics.
  Tensor<double> features(const std::vector<Tensor<float>>& images) const {
    ad::NoGradGuard ng;
    Tensor<double> out({images.size(), F});
    for (size_t i = 0; i < images.size(); ++i) {
      Tensor<float> x({1, images[i].size(0), images[i].size(1), images[i].size(2)},
                      images[i].vec());
      auto f = features_graph(ad::constant(std::move(x)));
      for (size_t j = 0; j < F; ++j) out[i * F + j] = f->value[j];
    }
    return out;
  }

  // Class probabilities (softmax over the head), one row per image. [N, C].
  Tensor<double> probabilities(const std::vector<Tensor<float>>& images) const {
    ad::NoGradGuard ng;
    Tensor<double> out({images.size(), classes});
    for (size_t i = 0; i < images.size(); ++i) {
      Tensor<float> x({1, images[i].size(0), images[i].size(1), images[i].size(2)},
                      images[i].vec());
      auto logits = head(features_graph(ad::constant(std::move(x))));
      double m = logits->value[0];
      for (size_t c = 1; c < classes; ++c) m = std::max(m, double(logits->value[c]));
      double z = 0;
      for (size_t c = 0; c < classes; ++c) {
        out[i * classes + c] = std::exp(double(logits->value[c]) - m);
        z += out[i * classes + c];
      }
      for (size_t c = 0; c < classes; ++c) out[i * classes + c] /= z;
    }
    return out;
  }
};

}  // namespace pdm

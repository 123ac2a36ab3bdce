// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#include "pdm/cli_commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "pdm/checkpoint.hpp"
#include "pdm/config.hpp"
#include "pdm/image_io.hpp"

namespace pdm {
namespace fs = std::filesystem;

namespace {

// Fixed-width float formatting so identical runs emit byte-identical CSVs.
std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "'");
}

// Samples [count, C, H, W] -> one row-major grid image, square-ish layout
// (cols = ceil(sqrt(count))), unused cells black.
Tensor<float> compose_grid(const Tensor<float>& batch) {
  const size_t n = batch.size(0), C = batch.size(1), H = batch.size(2),
               W = batch.size(3);
  const size_t cols = size_t(std::ceil(std::sqrt(double(n))));
  const size_t rows = (n + cols - 1) / cols;
  Tensor<float> grid = Tensor<float>::full({C, rows * H, cols * W}, -1.0f);
  for (size_t i = 0; i < n; ++i) {
    const size_t r = i / cols, c = i % cols;
    for (size_t ch = 0; ch < C; ++ch)
      for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x)
          grid[(ch * rows * H + r * H + y) * cols * W + c * W + x] =
              batch[((i * C + ch) * H + y) * W + x];
  }
  return grid;
}

std::vector<Tensor<float>> split_batch(const Tensor<float>& batch) {
  const size_t n = batch.size(0), px = batch.numel() / n;
  std::vector<Tensor<float>> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i)
    out.emplace_back(
        std::vector<size_t>{batch.size(1), batch.size(2), batch.size(3)},
        std::vector<float>(batch.data() + i * px, batch.data() + (i + 1) * px));
  return out;
}

// Model feature rows (f_phi output) for a labeled-or-not image list.
Tensor<double> model_features(const ModelState& s,
                              const std::vector<Tensor<float>>& images) {
  ad::NoGradGuard ng;
  Tensor<double> out({images.size(), s.cfg.D});
  for (size_t i = 0; i < images.size(); ++i) {
    Tensor<float> x({1, s.cfg.img_c, s.cfg.img_h, s.cfg.img_w}, images[i].vec());
    auto f = s.encoder(ad::constant(std::move(x)));
    for (size_t j = 0; j < s.cfg.D; ++j) out[i * s.cfg.D + j] = f->value[j];
  }
  return out;
}

}  // namespace

std::string resolve_out_dir(const std::string& flag_value,
                            const std::string& config_value) {
  if (const char* env = std::getenv("PDM_OUT"); env && *env) return env;
  if (!flag_value.empty()) return flag_value;
  return config_value;
}

void cmd_train(const std::string& config_file,
               const std::vector<std::string>& overrides,
               const std::string& out_flag) {
  KvConfig kv = KvConfig::parse_file(config_file);
  kv.apply_overrides(overrides);
  RunConfig cfg = run_config_from(kv);
  cfg.out_dir = resolve_out_dir(out_flag, cfg.out_dir);
  cfg.validate();

  Dataset data = load_dataset(cfg.dataset, cfg.labels_file, cfg.seed);
  ensure_dir(cfg.out_dir);
  const fs::path out(cfg.out_dir);

  std::ofstream loss_csv = open_out(out / "loss.csv");
  loss_csv << "step,diff,contrastive,align,compact,total\n";

  ModelState final_state = train(
      data, cfg,
      [&](const LossReport& r) {
        loss_csv << r.step << ',' << fmt(r.diff) << ',' << fmt(r.contrastive)
                 << ',' << fmt(r.align) << ',' << fmt(r.compact) << ','
                 << fmt(r.total) << '\n';
      },
      [&](ModelState& s, size_t step) {
        save_checkpoint(s, (out / ("ckpt_" + std::to_string(step) + ".bin")).string());
      });
  loss_csv.flush();
  if (!loss_csv) throw DataError("write failure on loss.csv");

  // Echo the effective configuration (post-overrides, post-dataset geometry).
  open_out(out / "resolved.cfg") << run_config_text(final_state.cfg);
  std::printf("trained %zu steps; outputs in %s\n", final_state.step,
              cfg.out_dir.c_str());
}

void cmd_sample(const std::string& ckpt_path, const SampleFlags& flags,
                const std::string& out_flag) {
  ModelState s = load_checkpoint(ckpt_path);
  const std::string out_dir = resolve_out_dir(out_flag, s.cfg.out_dir);
  ensure_dir(out_dir);
  const fs::path out(out_dir);

  const int mode_flags = int(!flags.ref_image.empty()) + int(flags.label >= 0) +
                         int(flags.proto_index > 0);
  if (mode_flags > 1)
    throw ConfigError("choose at most one of --ref-image, --label, --proto-index");

  SampleRequest req;
  req.count = flags.count;
  req.seed = flags.seed;
  req.T_override = flags.T_override;
  if (!flags.ref_image.empty()) {
    req.mode = SampleRequest::Mode::RefImage;
    req.ref_image = image_to_tensor(read_png(flags.ref_image));
  } else if (flags.label >= 0) {
    req.mode = SampleRequest::Mode::Label;
    req.label = flags.label;
  } else if (flags.proto_index > 0) {
    req.mode = SampleRequest::Mode::ProtoIndex;
    req.proto_index = flags.proto_index;
  } else {
    req.mode = SampleRequest::Mode::Random;
  }

  SampleBatch batch = generate(req, s);
  const std::vector<Tensor<float>> imgs = split_batch(batch.images);
  for (size_t i = 0; i < imgs.size(); ++i)
    write_png((out / ("sample_" + std::to_string(flags.seed) + "_" +
                      std::to_string(i) + ".png"))
                  .string(),
              tensor_to_image(imgs[i]));
  write_png((out / "grid.png").string(), tensor_to_image(compose_grid(batch.images)));
  std::printf("wrote %zu samples and grid.png to %s\n", batch.images.size(0),
              out_dir.c_str());
}

FeatureExtractor fit_feature_extractor(const Dataset& data, uint64_t seed) {
  if (!data.labels)
    throw DataError("proxy metrics need a labeled dataset for the extractor");
  FeatureExtractor fe(data.C, data.num_classes, seed);
  const size_t batch = std::min<size_t>(16, data.size());
  fe.fit(data, /*steps=*/300, batch, /*lr=*/2e-3, seed);
  return fe;
}

EvalResult evaluate_sets(const FeatureExtractor& fe,
                         const std::vector<Tensor<float>>& real,
                         const std::vector<Tensor<float>>& gen) {
  EvalResult r;
  r.n_real = real.size();
  r.n_gen = gen.size();
  const Tensor<double> freal = fe.features(real);
  const Tensor<double> fgen = fe.features(gen);
  r.proxy_is = inception_score(fe.probabilities(gen));
  r.proxy_fid = fid(gaussian_stats(freal), gaussian_stats(fgen));
  r.proxy_kid = kid(freal, fgen);
  return r;
}

void cmd_eval(const std::string& ckpt_path, const EvalFlags& flags,
              const std::string& out_flag) {
  if (flags.n_gen < 2 && flags.gen_dir.empty())
    throw ConfigError("--n-gen must be at least 2 (KID needs two samples)");
  ModelState s = load_checkpoint(ckpt_path);
  const std::string out_dir = resolve_out_dir(out_flag, s.cfg.out_dir);
  ensure_dir(out_dir);
  const fs::path out(out_dir);

  const std::string dataset_spec =
      flags.dataset.empty() ? s.cfg.dataset : flags.dataset;
  const std::string labels_file =
      flags.dataset.empty() ? s.cfg.labels_file : flags.labels_file;
  Dataset data = load_dataset(dataset_spec, labels_file, s.cfg.seed);
  if (data.C != s.cfg.img_c || data.H != s.cfg.img_h || data.W != s.cfg.img_w)
    throw DataError("evaluation dataset geometry differs from the checkpoint");

  // Generated set: either sampled from the checkpoint or loaded from disk
  // (the latter lets external sample sets — or the real set itself — be
  // scored with the same pipeline).
  std::vector<Tensor<float>> gen;
  if (!flags.gen_dir.empty()) {
    Dataset g = load_image_dir(flags.gen_dir, "");
    if (g.C != data.C || g.H != data.H || g.W != data.W)
      throw DataError("--gen-dir image geometry differs from the dataset");
    gen = g.images;
  } else {
    SampleRequest req;
    req.count = flags.n_gen;
    req.seed = flags.seed;
    req.mode = SampleRequest::Mode::Random;
    gen = split_batch(generate(req, s).images);
  }
  if (gen.size() < 2) throw DataError("need at least 2 generated images");

  FeatureExtractor fe = fit_feature_extractor(data, flags.seed);
  EvalResult r = evaluate_sets(fe, data.images, gen);

  std::ofstream metrics = open_out(out / "metrics.csv");
  metrics << "variant,dataset,K,proxy_is,proxy_fid,proxy_kid,n_real,n_gen\n";
  metrics << variant_name(s.cfg.variant) << ',' << dataset_spec << ','
          << (s.has_prototypes() ? s.cfg.K : 0) << ',' << fmt(r.proxy_is) << ','
          << fmt(r.proxy_fid) << ',' << fmt(r.proxy_kid) << ',' << r.n_real
          << ',' << r.n_gen << '\n';

  // Cluster view: the model's own feature space, projected to 2-D, tagged
  // with each item's nearest prototype (and label when known). The ablation
  // variant has no feature encoder, so there is nothing to project.
  if (s.has_prototypes()) {
    const Tensor<double> feats = model_features(s, data.images);
    PcaResult pca = pca_project(feats, 2);
    PrototypeBank<float> bank = s.bank_view();
    std::ofstream pcsv = open_out(out / "pca.csv");
    pcsv << "x,y,assigned_prototype" << (data.labels ? ",label" : "") << "\n";
    for (size_t i = 0; i < data.size(); ++i) {
      Tensor<float> row({s.cfg.D});
      for (size_t j = 0; j < s.cfg.D; ++j)
        row[j] = float(feats[i * s.cfg.D + j]);
      const size_t proto = assign(row, bank).index;
      pcsv << fmt(pca.projected[i * 2]) << ',' << fmt(pca.projected[i * 2 + 1])
           << ',' << proto;
      if (data.labels) pcsv << ',' << (*data.labels)[i];
      pcsv << '\n';
    }
  } else {
    std::printf("note: no feature encoder in this checkpoint; skipping pca.csv\n");
  }
  std::printf("proxy_is=%s proxy_fid=%s proxy_kid=%s (n_real=%zu n_gen=%zu)\n",
              fmt(r.proxy_is).c_str(), fmt(r.proxy_fid).c_str(),
              fmt(r.proxy_kid).c_str(), r.n_real, r.n_gen);
}

void cmd_ablate(const std::string& config_file, const std::vector<size_t>& k_list,
                const std::vector<std::string>& overrides,
                const std::string& out_flag, size_t n_gen, uint64_t eval_seed) {
  if (k_list.empty()) throw ConfigError("--k-list must not be empty");
  std::set<size_t> uniq(k_list.begin(), k_list.end());
  if (uniq.size() != k_list.size())
    throw ConfigError("--k-list contains duplicate K values");
  for (size_t k : k_list)
    if (k < 1) throw ConfigError("--k-list entries must be positive");
  if (n_gen < 2) throw ConfigError("--n-gen must be at least 2");

  KvConfig kv = KvConfig::parse_file(config_file);
  kv.apply_overrides(overrides);
  RunConfig base = run_config_from(kv);
  base.out_dir = resolve_out_dir(out_flag, base.out_dir);
  base.validate();

  Dataset data = load_dataset(base.dataset, base.labels_file, base.seed);
  ensure_dir(base.out_dir);

  // One extractor scores every K so rows are comparable.
  FeatureExtractor fe = fit_feature_extractor(data, eval_seed);

  std::ofstream csv = open_out(fs::path(base.out_dir) / "ablation.csv");
  csv << "K,proxy_is,proxy_fid,proxy_kid\n";
  for (size_t k : k_list) {
    RunConfig cfg = base;
    cfg.K = k;
    ModelState s = train(data, cfg);
    SampleRequest req;
    req.count = n_gen;
    req.seed = eval_seed;
    req.mode = SampleRequest::Mode::Random;
    const std::vector<Tensor<float>> gen = split_batch(generate(req, s).images);
    EvalResult r = evaluate_sets(fe, data.images, gen);
    csv << k << ',' << fmt(r.proxy_is) << ',' << fmt(r.proxy_fid) << ','
        << fmt(r.proxy_kid) << '\n';
    csv.flush();
    std::printf("K=%zu: proxy_is=%s proxy_fid=%s proxy_kid=%s\n", k,
                fmt(r.proxy_is).c_str(), fmt(r.proxy_fid).c_str(),
                fmt(r.proxy_kid).c_str());
  }
}

}  // namespace pdm

// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdm/metrics.hpp"
#include "pdm/sampler.hpp"
#include "pdm/training.hpp"

namespace pdm {

// Proxy-metric bundle for one real-vs-generated comparison.
struct EvalResult {
  double proxy_is = 0, proxy_fid = 0, proxy_kid = 0;
  size_t n_real = 0, n_gen = 0;
};

// Shared metric core: probabilities/features come from one extractor so the
// numbers are comparable across calls within a process.
EvalResult evaluate_sets(const FeatureExtractor& fe,
                         const std::vector<Tensor<float>>& real,
                         const std::vector<Tensor<float>>& gen);

// Deterministic desk-scale budget for the proxy extractor.
FeatureExtractor fit_feature_extractor(const Dataset& data, uint64_t seed);

// Output-directory resolution: the PDM_OUT environment variable wins over
// the --out flag, which wins over the config's out_dir.
std::string resolve_out_dir(const std::string& flag_value,
                            const std::string& config_value);

// Subcommand bodies. Each throws ConfigError/DataError/NumericError; the
// entry point maps those to exit codes 2/3/4.
void cmd_train(const std::string& config_file,
               const std::vector<std::string>& overrides,
               const std::string& out_flag);

struct SampleFlags {
  size_t count = 16;
  uint64_t seed = 0;
  std::string ref_image;   // path; empty = unset
  int label = -1;          // -1 = unset
  size_t proto_index = 0;  // 0 = unset (1-based otherwise)
  size_t T_override = 0;
};
void cmd_sample(const std::string& ckpt_path, const SampleFlags& flags,
                const std::string& out_flag);

struct EvalFlags {
  std::string dataset;      // empty = use the checkpoint's dataset spec
  std::string labels_file;  // optional CSV when dataset is a directory
  std::string gen_dir;      // evaluate PNGs from here instead of sampling
  size_t n_gen = 64;
  uint64_t seed = 0;
};
void cmd_eval(const std::string& ckpt_path, const EvalFlags& flags,
              const std::string& out_flag);

void cmd_ablate(const std::string& config_file, const std::vector<size_t>& k_list,
                const std::vector<std::string>& overrides,
                const std::string& out_flag, size_t n_gen, uint64_t eval_seed);

}  // namespace pdm

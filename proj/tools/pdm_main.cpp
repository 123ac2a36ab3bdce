// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
//
// pdm — train, sample, and evaluate prototype-conditioned diffusion models.
//
//   pdm train  --config run.cfg [--set key=value ...] [--out DIR]
//   pdm sample --ckpt ckpt_500.bin --count 16 --seed 7 [--out DIR]
//   pdm eval   --ckpt ckpt_500.bin [--data SPEC] [--n-gen 64] [--out DIR]
//   pdm ablate --config run.cfg --k-list 1,2,4 [--out DIR]
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.
#include <CLI11.hpp>

#include <cstdio>

#include "pdm/cli_commands.hpp"
#include "pdm/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"prototype-conditioned diffusion: train / sample / eval / ablate"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a model from a config file");
  std::string train_config, train_out;
  std::vector<std::string> train_sets;
  train->add_option("--config", train_config, "key=value config file")->required();
  train->add_option("--set", train_sets, "override config keys (key=value)");
  train->add_option("--out", train_out, "output directory (PDM_OUT wins)");

  // sample
  auto* sample = app.add_subcommand("sample", "generate images from a checkpoint");
  std::string sample_ckpt, sample_out;
  pdm::SampleFlags sf;
  sample->add_option("--ckpt", sample_ckpt, "checkpoint file")->required();
  sample->add_option("--count", sf.count, "number of images");
  sample->add_option("--seed", sf.seed, "sampling seed");
  sample->add_option("--ref-image", sf.ref_image, "condition on this image's prototype");
  sample->add_option("--label", sf.label, "condition on a class label (supervised)");
  sample->add_option("--proto-index", sf.proto_index, "condition on prototype k (1-based)");
  sample->add_option("--steps", sf.T_override, "override step count (smoke runs)");
  sample->add_option("--out", sample_out, "output directory (PDM_OUT wins)");

  // eval
  auto* eval = app.add_subcommand("eval", "proxy metrics and cluster projection");
  std::string eval_ckpt, eval_out;
  pdm::EvalFlags ef;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", ef.dataset, "dataset spec (default: checkpoint's)");
  eval->add_option("--labels", ef.labels_file, "labels CSV for --data directories");
  eval->add_option("--gen-dir", ef.gen_dir, "score PNGs from here instead of sampling");
  eval->add_option("--n-gen", ef.n_gen, "number of images to generate");
  eval->add_option("--seed", ef.seed, "sampling / extractor seed");
  eval->add_option("--out", eval_out, "output directory (PDM_OUT wins)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and score one model per K");
  std::string ablate_config, ablate_out;
  std::vector<size_t> k_list;
  std::vector<std::string> ablate_sets;
  size_t ablate_ngen = 64;
  uint64_t ablate_seed = 0;
  ablate->add_option("--config", ablate_config, "key=value config file")->required();
  ablate->add_option("--k-list", k_list, "prototype counts to sweep")
      ->required()
      ->delimiter(',');
  ablate->add_option("--set", ablate_sets, "override config keys (key=value)");
  ablate->add_option("--n-gen", ablate_ngen, "generated images per K");
  ablate->add_option("--seed", ablate_seed, "evaluation seed");
  ablate->add_option("--out", ablate_out, "output directory (PDM_OUT wins)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help prints and exits 0; real parse errors exit as config errors.
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*train) pdm::cmd_train(train_config, train_sets, train_out);
    if (*sample) pdm::cmd_sample(sample_ckpt, sf, sample_out);
    if (*eval) pdm::cmd_eval(eval_ckpt, ef, eval_out);
    if (*ablate)
      pdm::cmd_ablate(ablate_config, k_list, ablate_sets, ablate_out,
                      ablate_ngen, ablate_seed);
  } catch (const pdm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const pdm::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const pdm::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

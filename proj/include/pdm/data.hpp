// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pdm/image_io.hpp"
#include "pdm/rng.hpp"
#include "pdm/tensor.hpp"

namespace pdm {

// In-memory dataset: channel-first float images in [-1,1], optional integer
// labels in [0, num_classes). Read-only after construction.
struct Dataset {
  std::vector<Tensor<float>> images;  // each [C,H,W]
  std::optional<std::vector<int>> labels;
  std::string name;
  size_t num_classes = 0;
  size_t C = 0, H = 0, W = 0;

  size_t size() const { return images.size(); }
};

// uint8 -> [-1,1] with 0 -> -1 and 255 -> +1 exactly.
inline float u8_to_unit(uint8_t v) { return float(v) / 127.5f - 1.0f; }

// [-1,1] -> uint8 (round, clamp).
inline uint8_t unit_to_u8(float x) {
  const float v = std::round((std::min(1.0f, std::max(-1.0f, x)) + 1.0f) * 127.5f);
  return static_cast<uint8_t>(std::min(255.0f, std::max(0.0f, v)));
}

inline Tensor<float> image_to_tensor(const ImageU8& img) {
  Tensor<float> t({img.channels, img.height, img.width});
  for (size_t c = 0; c < img.channels; ++c)
    for (size_t y = 0; y < img.height; ++y)
      for (size_t x = 0; x < img.width; ++x)
        t[(c * img.height + y) * img.width + x] =
            u8_to_unit(img.pixels[(y * img.width + x) * img.channels + c]);
  return t;
}

inline ImageU8 tensor_to_image(const Tensor<float>& t) {
  if (t.ndim() != 3) throw ShapeError("tensor_to_image expects [C,H,W]");
  ImageU8 img;
  img.channels = t.size(0);
  img.height = t.size(1);
  img.width = t.size(2);
  img.pixels.resize(t.numel());
  for (size_t c = 0; c < img.channels; ++c)
    for (size_t y = 0; y < img.height; ++y)
      for (size_t x = 0; x < img.width; ++x)
        img.pixels[(y * img.width + x) * img.channels + c] =
            unit_to_u8(t[(c * img.height + y) * img.width + x]);
  return img;
}

// Two-mode synthetic set: class 0 lights the left half, class 1 the right,
// base levels +/-0.6 plus N(0, 0.1^2) texture noise, clamped to [-1,1]. The
// halves differ by 1.2 in expectation, so a half-mean comparison classifies
// clean mode templates perfectly.
inline Dataset synth_two_mode(size_t n, size_t size, uint64_t seed) {
  if (size < 8) throw ConfigError("synth_two_mode needs size >= 8");
  if (n == 0 || n % 2 != 0)
    throw ConfigError("synth_two_mode needs a positive even n");
  Dataset d;
  d.name = "synth_two_mode";
  d.num_classes = 2;
  d.C = 1;
  d.H = size;
  d.W = size;
  d.labels = std::vector<int>();
  Rng rng = Rng(seed).derive("synth_two_mode");
  for (size_t i = 0; i < n; ++i) {
    const int label = i < n / 2 ? 0 : 1;
    Tensor<float> img({1, size, size});
    for (size_t y = 0; y < size; ++y)
      for (size_t x = 0; x < size; ++x) {
        const bool bright = (label == 0) ? (x < size / 2) : (x >= size / 2);
        const float base = bright ? 0.6f : -0.6f;
        const float v = base + 0.1f * float(rng.normal());
        img[y * size + x] = std::min(1.0f, std::max(-1.0f, v));
      }
    d.images.push_back(std::move(img));
    d.labels->push_back(label);
  }
  return d;
}

// Brute-force mode classifier for the two-mode set: brighter left half -> 0.
inline int two_mode_oracle(const Tensor<float>& img) {
  const size_t H = img.size(1), W = img.size(2);
  double left = 0, right = 0;
  for (size_t y = 0; y < H; ++y)
    for (size_t x = 0; x < W; ++x)
      (x < W / 2 ? left : right) += img[y * W + x];
  return left > right ? 0 : 1;
}

// Seeded Fisher-Yates permutation of 0..n-1.
inline std::vector<size_t> shuffle_indices(size_t n, Rng& rng) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(0, i - 1)]);
  return idx;
}

// Loads a directory of same-resolution PNGs (optionally joined with a
// "filename,label" CSV). Declared here, implemented with std::filesystem in
// the compiled core.
Dataset load_image_dir(const std::string& path, const std::string& labels_csv = "");

// Parses a dataset spec: "synth:<n>:<size>" or a directory path.
Dataset load_dataset(const std::string& spec, const std::string& labels_csv,
                     uint64_t seed);

}  // namespace pdm

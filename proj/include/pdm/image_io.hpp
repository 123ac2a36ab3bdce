// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pdm {

// Decoded 8-bit image, channels interleaved (row-major, C = 1 or 3).
struct ImageU8 {
  size_t width = 0;
  size_t height = 0;
  size_t channels = 0;
  std::vector<uint8_t> pixels;  // height * width * channels
};

// Reads a PNG file. Palette/alpha/16-bit inputs are folded to 8-bit gray or
// RGB. Throws DataError on unreadable or undecodable files.
ImageU8 read_png(const std::string& path);

// Writes an 8-bit grayscale (channels=1) or RGB (channels=3) PNG.
void write_png(const std::string& path, const ImageU8& img);

}  // namespace pdm

// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#include "pdm/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pdm/errors.hpp"

namespace fs = std::filesystem;

namespace pdm {

namespace {

// Parses "filename,label" CSV (header required) into a filename -> class map.
std::map<std::string, int> read_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty labels file: " + path);
  // tolerate a UTF-8 BOM and trailing CR
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line = line.substr(3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "filename,label")
    throw DataError(path + ":1: expected header 'filename,label'");
  std::map<std::string, int> out;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t comma = line.rfind(',');
    if (comma == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": missing comma");
    const std::string name = line.substr(0, comma);
    try {
      out[name] = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad label value");
    }
  }
  return out;
}

}  // namespace

Dataset load_image_dir(const std::string& path, const std::string& labels_csv) {
  if (!fs::is_directory(path)) throw DataError("not a directory: " + path);

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png") files.push_back(entry.path().filename().string());
  }
  if (files.empty()) throw DataError("no PNG images in " + path);
  std::sort(files.begin(), files.end());

  std::map<std::string, int> label_map;
  const bool labeled = !labels_csv.empty();
  if (labeled) label_map = read_labels_csv(labels_csv);

  Dataset d;
  d.name = fs::path(path).filename().string();
  if (d.name.empty()) d.name = path;
  if (labeled) d.labels = std::vector<int>();

  for (const std::string& f : files) {
    ImageU8 img = read_png((fs::path(path) / f).string());
    if (d.images.empty()) {
      d.C = img.channels;
      d.H = img.height;
      d.W = img.width;
    } else if (img.channels != d.C || img.height != d.H || img.width != d.W) {
      throw DataError("mixed resolutions: " + f + " is " + std::to_string(img.width) +
                      "x" + std::to_string(img.height) + "x" +
                      std::to_string(img.channels) + ", expected " +
                      std::to_string(d.W) + "x" + std::to_string(d.H) + "x" +
                      std::to_string(d.C));
    }
    d.images.push_back(image_to_tensor(img));
    if (labeled) {
      auto it = label_map.find(f);
      if (it == label_map.end()) throw DataError("no label row for " + f);
      d.labels->push_back(it->second);
    }
  }

  if (labeled) {
    int maxl = 0;
    for (int l : *d.labels) {
      if (l < 0) throw DataError("negative class label in " + labels_csv);
      maxl = std::max(maxl, l);
    }
    d.num_classes = size_t(maxl) + 1;
    std::vector<size_t> count(d.num_classes, 0);
    for (int l : *d.labels) ++count[l];
    for (size_t c = 0; c < d.num_classes; ++c)
      if (count[c] == 0)
        throw DataError("class " + std::to_string(c) + " has no examples");
  }
  return d;
}

Dataset load_dataset(const std::string& spec, const std::string& labels_csv,
                     uint64_t seed) {
  if (spec.rfind("synth:", 0) == 0) {
    // synth:<n>:<size>
    const size_t c1 = spec.find(':', 6);
    if (c1 == std::string::npos)
      throw ConfigError("bad synthetic dataset spec '" + spec +
                      "' (want synth:<n>:<size>)");
    size_t n = 0, size = 0;
    try {
      n = std::stoul(spec.substr(6, c1 - 6));
      size = std::stoul(spec.substr(c1 + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad synthetic dataset spec '" + spec + "'");
    }
    return synth_two_mode(n, size, seed);
  }
  return load_image_dir(spec, labels_csv);
}

}  // namespace pdm

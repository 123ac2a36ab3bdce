// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pdm/errors.hpp"
#include "pdm/training.hpp"

namespace pdm {

// Flat key=value store with '#' comments. Parse errors carry line numbers.
struct KvConfig {
  std::map<std::string, std::string> kv;

  static KvConfig parse_text(const std::string& text, const std::string& origin) {
    KvConfig c;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto notspace = [](unsigned char ch) { return !std::isspace(ch); };
      line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
      line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(),
                 line.end());
      if (line.empty()) continue;
      const size_t eq = line.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected key=value, got '" + line + "'");
      std::string key = line.substr(0, eq), val = line.substr(eq + 1);
      key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
      val.erase(val.begin(), std::find_if(val.begin(), val.end(), notspace));
      if (c.kv.count(key))
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
      c.kv[key] = val;
    }
    return c;
  }

  static KvConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
  }

  // "key=value" pairs from the command line; later entries win.
  void apply_overrides(const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
      const size_t eq = s.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + s + "' is not key=value");
      kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
  }
};

namespace detail {

inline uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a non-negative integer");
  }
}

inline double parse_f64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
}

template <size_t N>
std::array<size_t, N> parse_size_list(const std::string& key, const std::string& v) {
  std::array<size_t, N> out{};
  std::istringstream in(v);
  std::string tok;
  size_t i = 0;
  while (std::getline(in, tok, ',')) {
    if (i >= N)
      throw ConfigError("key '" + key + "': expected " + std::to_string(N) +
                        " comma-separated values");
    out[i++] = size_t(parse_u64(key, tok));
  }
  if (i != N)
    throw ConfigError("key '" + key + "': expected " + std::to_string(N) +
                      " comma-separated values, got " + std::to_string(i));
  return out;
}

// Shortest decimal form that round-trips a double exactly.
inline std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  double back = 0;
  std::sscanf(buf, "%lg", &back);
  for (int prec = 1; prec <= 16; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, x);
    std::sscanf(shorter, "%lg", &back);
    if (back == x) return shorter;
  }
  return buf;
}

}  // namespace detail

// Builds a RunConfig from parsed keys. Unknown keys are hard errors so typos
// never silently fall back to defaults.
inline RunConfig run_config_from(const KvConfig& c) {
  static const std::vector<std::string> known = {
      "variant", "T", "K", "D", "tau", "beta_compact", "batch", "epochs",
      "lr", "seed", "dataset", "labels_file", "widths", "enc_widths",
      "heads", "beta_start", "beta_end", "ckpt_every", "out_dir",
      "img_c", "img_h", "img_w"};
  for (const auto& [k, v] : c.kv)
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError("unknown config key '" + k + "'");

  RunConfig r;
  const auto get = [&](const char* k) -> const std::string* {
    auto it = c.kv.find(k);
    return it == c.kv.end() ? nullptr : &it->second;
  };
  if (auto* v = get("variant")) r.variant = parse_variant(*v);
  if (auto* v = get("T")) r.T = size_t(detail::parse_u64("T", *v));
  if (auto* v = get("K")) r.K = size_t(detail::parse_u64("K", *v));
  if (auto* v = get("D")) r.D = size_t(detail::parse_u64("D", *v));
  if (auto* v = get("tau")) r.tau = detail::parse_f64("tau", *v);
  if (auto* v = get("beta_compact")) r.beta_compact = detail::parse_f64("beta_compact", *v);
  if (auto* v = get("batch")) r.batch = size_t(detail::parse_u64("batch", *v));
  if (auto* v = get("epochs")) r.epochs = size_t(detail::parse_u64("epochs", *v));
  if (auto* v = get("lr")) r.lr = detail::parse_f64("lr", *v);
  if (auto* v = get("seed")) r.seed = detail::parse_u64("seed", *v);
  if (auto* v = get("dataset")) r.dataset = *v;
  if (auto* v = get("labels_file")) r.labels_file = *v;
  if (auto* v = get("widths")) r.widths = detail::parse_size_list<4>("widths", *v);
  if (auto* v = get("enc_widths"))
    r.enc_widths = detail::parse_size_list<3>("enc_widths", *v);
  if (auto* v = get("heads")) r.heads = size_t(detail::parse_u64("heads", *v));
  if (auto* v = get("beta_start")) r.beta_start = detail::parse_f64("beta_start", *v);
  if (auto* v = get("beta_end")) r.beta_end = detail::parse_f64("beta_end", *v);
  if (auto* v = get("ckpt_every")) r.ckpt_every = size_t(detail::parse_u64("ckpt_every", *v));
  if (auto* v = get("out_dir")) r.out_dir = *v;
  if (auto* v = get("img_c")) r.img_c = size_t(detail::parse_u64("img_c", *v));
  if (auto* v = get("img_h")) r.img_h = size_t(detail::parse_u64("img_h", *v));
  if (auto* v = get("img_w")) r.img_w = size_t(detail::parse_u64("img_w", *v));
  return r;
}

// Canonical text form: stable key order, exact float round-trip. This is
// what resolved.cfg and checkpoints store.
inline std::string run_config_text(const RunConfig& r) {
  std::ostringstream out;
  out << "variant=" << variant_name(r.variant) << "\n";
  out << "T=" << r.T << "\n";
  out << "K=" << r.K << "\n";
  out << "D=" << r.D << "\n";
  out << "tau=" << detail::fmt_double(r.tau) << "\n";
  out << "beta_compact=" << detail::fmt_double(r.beta_compact) << "\n";
  out << "batch=" << r.batch << "\n";
  out << "epochs=" << r.epochs << "\n";
  out << "lr=" << detail::fmt_double(r.lr) << "\n";
  out << "seed=" << r.seed << "\n";
  out << "dataset=" << r.dataset << "\n";
  out << "labels_file=" << r.labels_file << "\n";
  out << "widths=" << r.widths[0] << "," << r.widths[1] << "," << r.widths[2]
      << "," << r.widths[3] << "\n";
  out << "enc_widths=" << r.enc_widths[0] << "," << r.enc_widths[1] << ","
      << r.enc_widths[2] << "\n";
  out << "heads=" << r.heads << "\n";
  out << "beta_start=" << detail::fmt_double(r.beta_start) << "\n";
  out << "beta_end=" << detail::fmt_double(r.beta_end) << "\n";
  out << "ckpt_every=" << r.ckpt_every << "\n";
  out << "out_dir=" << r.out_dir << "\n";
  out << "img_c=" << r.img_c << "\n";
  out << "img_h=" << r.img_h << "\n";
  out << "img_w=" << r.img_w << "\n";
  return out.str();
}

}  // namespace pdm

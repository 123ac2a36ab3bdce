// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace pdm {

// Counter-based generator: every draw is a pure function of (key, counter),
// splitmix64-style. The complete state is two u64 words, which is what
// checkpoints persist and what makes a seeded run replayable from any step.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0, uint64_t counter = 0)
      : key_(seed), ctr_(counter) {}

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++ctr_); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    const auto wide =
        static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(range);
    return lo + static_cast<int64_t>(static_cast<uint64_t>(wide >> 64));
  }

  // Standard normal via Box-Muller. Consumes exactly two draws per value so
  // the (key, counter) pair fully determines the stream with no cached state.
  double normal() {
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  template <typename T>
  void fill_normal(T* dst, size_t n, double scale = 1.0) {
    for (size_t i = 0; i < n; ++i) dst[i] = static_cast<T>(normal() * scale);
  }

  // Independent sub-stream; label keeps the streams for init / shuffling /
  // per-step noise from colliding.
  Rng derive(uint64_t label) const { return Rng(mix(key_ ^ mix(label)), 0); }

  Rng derive(std::string_view label) const {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (const char c : label) {
      h ^= static_cast<uint8_t>(c);
      h *= 0x100000001b3ull;
    }
    return derive(h);
  }

  uint64_t key() const { return key_; }
  uint64_t counter() const { return ctr_; }

 private:
  uint64_t key_;
  uint64_t ctr_;
};

}  // namespace pdm

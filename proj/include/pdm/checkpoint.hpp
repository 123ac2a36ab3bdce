// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "pdm/training.hpp"

namespace pdm {

// Binary checkpoint container: magic "PDMC", u32 format version, then
// length-prefixed named entries (f32/f64/i64 tensors or raw bytes). Stores
// the resolved config, schedule betas, every named parameter, optimizer
// moments, global step, and the training rng state — everything needed for
// a bit-identical resume. Version mismatches are rejected, never coerced.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace pdm

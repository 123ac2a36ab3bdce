// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace pdm {

// Config file / flag problems. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset and file-system problems. CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf escapes or violated numeric preconditions. CLI exit code 4.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape / dimension contract violations.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Out-of-range timestep, prototype index, or label.
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

}  // namespace pdm

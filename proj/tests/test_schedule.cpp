// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "pdm/schedule.hpp"

using pdm::linear_schedule;
using pdm::NoiseSchedule;
using pdm::sigma;

TEST_CASE("two-step schedule: beta [0.1,0.2] -> alpha and products") {
  NoiseSchedule s = linear_schedule(2, 0.1, 0.2);
  CHECK(s.beta_at(1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.beta_at(2) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(s.alpha_at(1) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(s.alpha_at(2) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(s.alpha_bar_at(1) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(s.alpha_bar_at(2) == doctest::Approx(0.72).epsilon(1e-12));
}

TEST_CASE("single step collapses interpolation") {
  NoiseSchedule s = linear_schedule(1, 0.5, 0.5);
  CHECK(s.alpha_bar_at(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("vanishing beta gives alpha_bar near one") {
  NoiseSchedule s = linear_schedule(100, 1e-12, 1e-12);
  for (size_t t = 1; t <= 100; ++t)
    CHECK(s.alpha_bar_at(t) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("alpha_bar equals the running alpha product (rel 1e-12)") {
  NoiseSchedule s = linear_schedule(1000);  // default DDPM-style endpoints
  double prod = 1.0;
  for (size_t t = 1; t <= s.T; ++t) {
    prod *= s.alpha_at(t);
    CHECK(std::abs(s.alpha_bar_at(t) - prod) <= 1e-12 * std::abs(prod));
  }
}

TEST_CASE("alpha_bar is strictly decreasing and in (0,1]") {
  NoiseSchedule s = linear_schedule(1000);
  double prev = 1.0 + 1e-18;
  for (size_t t = 1; t <= s.T; ++t) {
    CHECK(s.alpha_bar_at(t) < prev);
    CHECK(s.alpha_bar_at(t) > 0.0);
    CHECK(s.alpha_bar_at(t) <= 1.0);
    prev = s.alpha_bar_at(t);
  }
}

TEST_CASE("sigma hand values") {
  NoiseSchedule a = linear_schedule(1, 0.2, 0.2);  // alpha = 0.8
  CHECK(sigma(a, 1) == doctest::Approx(0.44721).epsilon(1e-4));
  NoiseSchedule b = linear_schedule(1, 0.01, 0.01);  // alpha = 0.99
  CHECK(sigma(b, 1) == doctest::Approx(0.1).epsilon(1e-12));
  NoiseSchedule c = linear_schedule(1, 1e-300, 1e-300);  // alpha -> 1
  CHECK(sigma(c, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sigma^2 + alpha == 1 exactly, and sigma == sqrt(beta)") {
  for (const NoiseSchedule& s :
       {linear_schedule(1000), linear_schedule(200, 5e-4, 0.1)}) {
    for (size_t t = 1; t <= s.T; ++t) {
      const double sg = sigma(s, t);
      CHECK(sg * sg + s.alpha_at(t) == 1.0);  // bitwise, not approximate
      CHECK(sg == doctest::Approx(std::sqrt(s.beta_at(t))).epsilon(1e-12));
    }
  }
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(linear_schedule(0, 0.1, 0.2), pdm::ConfigError);
  CHECK_THROWS_AS(linear_schedule(10, 0.0, 0.2), pdm::ConfigError);
  CHECK_THROWS_AS(linear_schedule(10, 0.3, 0.2), pdm::ConfigError);
  CHECK_THROWS_AS(linear_schedule(10, 0.1, 1.0), pdm::ConfigError);
  NoiseSchedule s = linear_schedule(10, 0.1, 0.2);
  CHECK_THROWS_AS(s.alpha_at(0), pdm::IndexError);
  CHECK_THROWS_AS(s.alpha_at(11), pdm::IndexError);
}

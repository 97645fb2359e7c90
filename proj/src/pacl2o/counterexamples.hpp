// Copyright 2026 The pacl2o Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Two closed-form sequences that satisfy sufficient descent but do not
// converge to a critical point.
//
//   example-1: f(x) = exp(-x), x^1 = 1, x^t = x^{t-1} + 1/t  (unbounded)
//   example-2: f(x) = |x|^2 / 2, x1 <- 0.9 x1, x2 fixed      (limit not critical)

#pragma once

#include <array>
#include <string>
#include <vector>

#include "pacl2o/conditions.hpp"

namespace pacl2o {

// States x^1..x^T, so T-1 steps.
Trajectory example1_prefix(std::size_t T);

// States x^0..x^T.
Trajectory example2_prefix(std::size_t T, std::array<double, 2> x0 = {1.0, 1.0});

std::array<double, 2> example2_limit_point(std::array<double, 2> x0);
// ||grad f|| at the limit point.
double example2_limit_grad_norm(std::array<double, 2> x0);

struct CounterexampleRow {
  std::string example;
  std::size_t T = 0;
  ConditionReport report;
  std::string violated;  // names of the failing conditions, "none" if in A
};

struct DemoOptions {
  std::size_t T1 = 100000;
  std::size_t T2 = 100;
  std::array<double, 2> x0 = {1.0, 1.0};
  Thresholds thresholds{1e-12, 1e4, 10.0};
};

std::vector<CounterexampleRow> counterexample_table(const DemoOptions& opts = {});

std::string format_counterexample_table(const std::vector<CounterexampleRow>& rows);

}  // namespace pacl2o

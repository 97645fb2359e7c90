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

// Finite-horizon checks of the sufficient-decrease, relative-error and
// boundedness conditions, and the convergence events they are compared with.
//
// Zero-length steps: a step with ||dx|| = 0 is admissible for the descent
// check only if the loss did not increase, and for the relative-error check
// only if the (sub)gradient at the new point vanishes (0/0 is skipped).

#pragma once

#include <optional>
#include <string>

#include "pacl2o/trajectory.hpp"

namespace pacl2o {

struct Thresholds {
  double a_min = 1e-12;
  double b_max = 1e12;
  double c_max = 1e8;
};

struct ConditionReport {
  std::optional<double> a_star;  // may hold +inf
  std::optional<double> b_star;
  double c_star = 0.0;           // +inf for diverged runs
  bool in_A_desc = false;
  bool in_A_err = false;
  bool in_A_bound = false;
  bool in_A = false;
  bool converged = false;
  std::string criterion;         // how `converged` was decided, empty if not
};

// Largest a with loss[t+1] + a ||dx_t||^2 <= loss[t] for every step, or
// nullopt if no positive a works. +inf when every step has zero length.
std::optional<double> descent_constant(const Trajectory& traj);

// Smallest b with ||v(x^{t+1})|| <= b ||dx_t|| for every step.
std::optional<double> relative_error_constant(const Trajectory& traj);

// max_t ||x^t||; +inf for a diverged run.
double bound_constant(const Trajectory& traj);

ConditionReport event_A(const Trajectory& traj, const Thresholds& th);

// min_t loss[t] < tol.
bool convergence_event_quadratic(const Trajectory& traj, double tol);

struct CriticalPointEstimate {
  Vec x;
  double loss = 0.0;
  double grad_norm = 0.0;
};

// Plain gradient descent from x_last.
CriticalPointEstimate approximate_critical_point(const Problem& problem,
                                                 std::span<const double> x_last,
                                                 std::size_t iters, double step);

// ||x^T - x_hat|| <= radius.
bool convergence_event_nn(const Trajectory& traj, std::span<const double> x_hat,
                          double radius);

}  // namespace pacl2o

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

#include "pacl2o/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pacl2o/error.hpp"

namespace pacl2o {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_losses(const Trajectory& traj, const char* what) {
  if (traj.losses.empty()) {
    fail(ErrorCode::InvalidArgument, std::string(what) + ": empty trajectory");
  }
  if (traj.losses.size() != traj.step_norms.size() + 1) {
    fail(ErrorCode::InvalidArgument,
         std::string(what) + ": losses/step_norms lengths are inconsistent");
  }
}

}  // namespace

std::optional<double> descent_constant(const Trajectory& traj) {
  require_losses(traj, "descent_constant");
  double a = kInf;
  for (std::size_t t = 0; t < traj.step_norms.size(); ++t) {
    const double decrease = traj.losses[t] - traj.losses[t + 1];
    const double s = traj.step_norms[t];
    if (s > 0.0) {
      a = std::min(a, decrease / (s * s));
    } else if (decrease < 0.0) {
      return std::nullopt;
    }
  }
  if (!(a > 0.0)) return std::nullopt;
  return a;
}

std::optional<double> relative_error_constant(const Trajectory& traj) {
  require_losses(traj, "relative_error_constant");
  if (traj.grad_norms.size() != traj.losses.size()) {
    fail(ErrorCode::InvalidArgument,
         "relative_error_constant: trajectory has no gradient selection recorded");
  }
  double b = 0.0;
  for (std::size_t t = 0; t < traj.step_norms.size(); ++t) {
    const double v = traj.grad_norms[t + 1];
    const double s = traj.step_norms[t];
    if (s > 0.0) {
      b = std::max(b, v / s);
    } else if (v > 0.0) {
      return std::nullopt;
    }
  }
  if (!std::isfinite(b)) return std::nullopt;
  return b;
}

double bound_constant(const Trajectory& traj) {
  if (traj.diverged) return kInf;
  if (traj.state_norms.empty()) {
    fail(ErrorCode::InvalidArgument, "bound_constant: no state norms recorded");
  }
  return *std::max_element(traj.state_norms.begin(), traj.state_norms.end());
}

ConditionReport event_A(const Trajectory& traj, const Thresholds& th) {
  ConditionReport r;
  r.a_star = descent_constant(traj);
  r.b_star = relative_error_constant(traj);
  r.c_star = bound_constant(traj);
  r.in_A_desc = r.a_star.has_value() && *r.a_star >= th.a_min;
  r.in_A_err = r.b_star.has_value() && *r.b_star <= th.b_max;
  r.in_A_bound = r.c_star <= th.c_max;
  r.in_A = r.in_A_desc && r.in_A_err && r.in_A_bound;
  return r;
}

bool convergence_event_quadratic(const Trajectory& traj, double tol) {
  return std::any_of(traj.losses.begin(), traj.losses.end(),
                     [tol](double l) { return l < tol; });
}

CriticalPointEstimate approximate_critical_point(const Problem& problem,
                                                 std::span<const double> x_last,
                                                 std::size_t iters, double step) {
  if (!all_finite(x_last)) {
    fail(ErrorCode::InvalidArgument, "approximate_critical_point: start point is not finite");
  }
  CriticalPointEstimate out;
  out.x.assign(x_last.begin(), x_last.end());
  LossGrad e = problem.loss_grad(out.x);
  for (std::size_t k = 0; k < iters; ++k) {
    if (norm(e.grad) == 0.0) break;
    for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] -= step * e.grad[i];
    e = problem.loss_grad(out.x);
    if (!std::isfinite(e.loss) || !all_finite(e.grad) || !all_finite(out.x)) {
      throw Error(ErrorCode::Numeric,
                  "approximate_critical_point: non-finite value at iteration " +
                      std::to_string(k));
    }
  }
  out.loss = e.loss;
  out.grad_norm = norm(e.grad);
  return out;
}

bool convergence_event_nn(const Trajectory& traj, std::span<const double> x_hat,
                          double radius) {
  if (traj.x_last.size() != x_hat.size()) {
    fail(ErrorCode::InvalidArgument, "convergence_event_nn: dimension mismatch");
  }
  return distance(traj.x_last, x_hat) <= radius;
}

}  // namespace pacl2o

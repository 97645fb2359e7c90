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

#include "pacl2o/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "pacl2o/error.hpp"

namespace pacl2o {

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::Horizon: return "horizon";
    case StopReason::StopRule: return "stop_rule";
    case StopReason::Diverged: return "diverged";
  }
  return "?";
}

Trajectory Trajectory::prefix(std::size_t T) const {
  if (T >= horizon()) return *this;
  Trajectory p;
  p.family = family;
  p.algorithm = algorithm;
  p.instance_id = instance_id;
  p.seed = seed;
  auto cut = [](const Vec& v, std::size_t n) {
    return v.size() <= n ? v : Vec(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
  };
  p.losses = cut(losses, T + 1);
  p.grad_norms = cut(grad_norms, T + 1);
  p.step_norms = cut(step_norms, T);
  p.state_norms = cut(state_norms, T + 1);
  p.distances = cut(distances, T + 1);
  if (!states.empty()) {
    p.states.assign(states.begin(), states.begin() + static_cast<std::ptrdiff_t>(T + 1));
    p.x_last = p.states.back();
  } else {
    // The final state of a prefix is only known when states were recorded.
    p.x_last.clear();
  }
  p.diverged = false;
  p.stop = StopReason::Horizon;
  return p;
}

StopRule stop_below(double tol, std::size_t not_before) {
  return [tol, not_before](std::size_t t, double loss) {
    return t >= not_before && loss < tol;
  };
}

namespace {

bool finite_eval(const LossGrad& e) {
  return std::isfinite(e.loss) && all_finite(e.grad);
}

}  // namespace

Trajectory rollout(const Algorithm& algo, const Problem& problem,
                   std::span<const double> x0, const RolloutOptions& opts) {
  if (x0.size() != problem.dim()) {
    fail(ErrorCode::InvalidArgument, "rollout: x0 dimension does not match the problem");
  }
  Trajectory tr;
  tr.family = std::string(to_string(problem.family()));
  tr.algorithm = algo.tag();
  tr.instance_id = problem.id();
  tr.seed = opts.seed;
  tr.losses.reserve(opts.T + 1);
  tr.grad_norms.reserve(opts.T + 1);
  tr.state_norms.reserve(opts.T + 1);
  tr.step_norms.reserve(opts.T);

  auto record = [&](std::span<const double> x, const LossGrad& e) {
    tr.losses.push_back(e.loss);
    tr.grad_norms.push_back(norm(e.grad));
    tr.state_norms.push_back(norm(x));
    if (opts.reference) tr.distances.push_back(distance(x, *opts.reference));
    if (opts.record_states) tr.states.emplace_back(x.begin(), x.end());
    tr.x_last.assign(x.begin(), x.end());
  };

  auto safe_eval = [&](std::span<const double> x, LossGrad& out) {
    if (!all_finite(x)) return false;
    try {
      out = problem.loss_grad(x);
    } catch (const ad::GraphError&) {
      return false;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Numeric) return false;
      throw;
    }
    return finite_eval(out);
  };

  LossGrad e;
  if (!safe_eval(x0, e)) {
    tr.diverged = true;
    tr.stop = StopReason::Diverged;
    return tr;
  }
  record(x0, e);
  AlgoState state = algo.init(x0, e);

  for (std::size_t t = 0; t < opts.T; ++t) {
    if (opts.stop_rule && opts.stop_rule(t, e.loss)) {
      tr.stop = StopReason::StopRule;
      break;
    }
    try {
      algo.step(state, e);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::Numeric) throw;
      tr.diverged = true;
      break;
    }
    LossGrad next;
    if (!safe_eval(state.x_curr, next)) {
      tr.diverged = true;
      break;
    }
    const double step = distance(state.x_curr, state.x_prev);
    if (!std::isfinite(step)) {
      tr.diverged = true;
      break;
    }
    tr.step_norms.push_back(step);
    e = std::move(next);
    record(state.x_curr, e);
  }
  if (tr.diverged) tr.stop = StopReason::Diverged;
  return tr;
}

}  // namespace pacl2o

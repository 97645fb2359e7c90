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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "pacl2o/optimizers.hpp"
#include "pacl2o/problems.hpp"

namespace pacl2o {

enum class StopReason { Horizon, StopRule, Diverged };

std::string_view to_string(StopReason r);

// States x^0..x^T of one run. Per-state arrays have T+1 entries, per-step
// arrays T. grad_norms holds ||v(x^t)|| for the selected (sub)gradient v.
struct Trajectory {
  std::string family;
  std::string algorithm;
  std::uint64_t instance_id = 0;
  std::uint64_t seed = 0;

  Vec losses;
  Vec grad_norms;
  Vec step_norms;
  Vec state_norms;
  Vec distances;             // to a reference point, when one was given
  std::vector<Vec> states;   // optional
  Vec x_last;

  bool diverged = false;
  StopReason stop = StopReason::Horizon;

  std::size_t horizon() const { return step_norms.size(); }

  // First T steps (or the whole run if it is shorter).
  Trajectory prefix(std::size_t T) const;
};

// Called with the index and loss of the state just reached; returning true
// ends the rollout there.
using StopRule = std::function<bool(std::size_t t, double loss)>;

StopRule stop_below(double tol, std::size_t not_before = 0);

struct RolloutOptions {
  std::size_t T = 0;
  StopRule stop_rule;
  bool record_states = false;
  const Vec* reference = nullptr;
  std::uint64_t seed = 0;
};

// Never throws on non-finite iterates: the run is cut at the last finite
// state and flagged diverged.
Trajectory rollout(const Algorithm& algo, const Problem& problem,
                   std::span<const double> x0, const RolloutOptions& opts);

}  // namespace pacl2o

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

// File formats: problem-set JSON, hyperparameter checkpoints, trajectory dumps.
//
// Checkpoint (.bin), all integers and floats little-endian:
//   char[8] "L2OCKPT1" | u32 version | u32 arch | u64 dim | u32 n_blocks
//   n_blocks x { u32 name_len | name | u64 rows | u64 cols }
//   u64 n | n x f64

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacl2o/optimizers.hpp"
#include "pacl2o/problems.hpp"
#include "pacl2o/trajectory.hpp"

namespace pacl2o {

// Shortest round-trip decimal form; "inf", "-inf", "nan" for the rest.
std::string fmt_double(double v);

struct ProblemSet {
  Family family = Family::Quadratic;
  NetLayout layout;  // regression only
  std::vector<Problem> problems;
};

nlohmann::json problem_set_to_json(const ProblemSet& set);
ProblemSet problem_set_from_json(const nlohmann::json& j);

void save_problem_set(const std::filesystem::path& path, const ProblemSet& set);
ProblemSet load_problem_set(const std::filesystem::path& path);

struct Checkpoint {
  ArchKind arch = ArchKind::Quad;
  std::size_t dim = 0;
  Hyperparameters hyper;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// CSV with '#' header lines; states go to `<path>.states.bin` when recorded.
void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);

nlohmann::json read_json(const std::filesystem::path& path);
// Pretty-printed, trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace pacl2o

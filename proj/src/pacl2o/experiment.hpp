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

// End-to-end experiment runner. A run directory holds:
//
//   config.json              resolved spec
//   problems/{prior,val,train,test}.json
//   checkpoints/alpha0.bin, atom_NNN.bin, final.bin
//   acceptance_log.csv, training_loss.csv
//   certificate.json, risks.csv
//   report.csv               one condition row per test trajectory
//   test_sets.csv            per-set P_hat{A}, P_hat{A_conv}, bound
//   loss_quantiles.csv, distance_quantiles.csv
//   trajectories/            a few raw trajectory dumps
//   summary.json, summary.txt
//
// Seeds: problem `id` is drawn from derive_seed(seed, kProblems, id); the
// four datasets use disjoint id ranges.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacl2o/io.hpp"
#include "pacl2o/training.hpp"

namespace pacl2o {

struct TestSpec {
  std::size_t n_test_sets = 20;
  std::size_t set_size = 50;
  std::size_t T_eval = 100;
  std::size_t conv_factor = 10;  // convergence is checked at conv_factor * T_eval
};

struct NnEvalSpec {
  std::size_t critical_iters = 50000;
  double critical_step = 1e-6;
  double radius = 1e-1;
};

struct ExperimentSpec {
  Family family = Family::Quadratic;
  std::uint64_t seed = 0;
  QuadraticConfig quadratic;
  RegressionConfig regression;
  PipelineConfig pipeline;
  std::vector<std::string> baselines;  // "hbf", "adam", "gd"
  AdamConfig adam;
  double gd_step = 1e-3;
  TestSpec test;
  NnEvalSpec nn;
  std::size_t threads = 1;
  std::size_t dump_trajectories = 3;  // per algorithm

  ArchKind arch() const {
    return family == Family::Quadratic ? ArchKind::Quad : ArchKind::Nn;
  }
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentSpec from_json(const nlohmann::json& j);
};

ExperimentSpec load_spec(const std::filesystem::path& path);

// Id ranges of the four datasets.
inline constexpr std::uint64_t kPriorIdBase = 0;
inline constexpr std::uint64_t kValIdBase = 1'000'000;
inline constexpr std::uint64_t kTrainIdBase = 2'000'000;
inline constexpr std::uint64_t kTestIdBase = 3'000'000;

Problem sample_problem(const ExperimentSpec& spec, std::uint64_t id);
ProblemSet sample_problem_set(const ExperimentSpec& spec, std::uint64_t id_base,
                              std::size_t n);

// Stages. Each throws Error tagged with its stage name.
void stage_gen_problems(const ExperimentSpec& spec, const std::filesystem::path& out);
void stage_train(const ExperimentSpec& spec, const std::filesystem::path& out,
                 const LogFn& log = {});
void stage_certify(const ExperimentSpec& spec, const std::filesystem::path& out,
                   const LogFn& log = {});
void stage_evaluate(const ExperimentSpec& spec, const std::filesystem::path& out,
                    const LogFn& log = {});

struct Summary {
  nlohmann::json json;
  std::string text;
};

// Recomputes the summary from the CSV and JSON files in `dir`.
Summary emit_report(const std::filesystem::path& dir);

void run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out,
                    const LogFn& log = {});

// Linear-interpolation quantile of unsorted data, q in [0, 1]. NaNs are
// not allowed; +inf sorts last.
double quantile(std::vector<double> v, double q);

}  // namespace pacl2o

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

// Training of the learned update: performance training on a ratio loss,
// accept/reject refinement on the empirical frequency of A, a sampled
// discrete prior around the result, and the posterior step.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacl2o/conditions.hpp"
#include "pacl2o/optimizers.hpp"
#include "pacl2o/pac_bayes.hpp"

namespace pacl2o {

enum class HyperOptimizer { Sgd, Adam };

struct PipelineConfig {
  std::size_t n_iter_perf = 5000;
  std::size_t check_every = 1000;
  std::size_t max_windows = 5;
  double target_pA = 0.9;
  std::size_t n_sample = 10;
  std::size_t N_prior = 100;
  std::size_t N_val = 100;
  std::size_t N_train = 50;
  std::size_t T_train = 100;
  double tol = 1e-16;

  HyperOptimizer hyper_optimizer = HyperOptimizer::Adam;
  double lr = 1e-4;
  double clip_norm = 0.0;  // 0 disables clipping
  HyperInit init = HyperInit::Uniform;

  // Prior atoms: alpha_0 + N(0, sd^2 I) with sd = perturb_rel * RMS(alpha_0)
  // unless perturb_sd is set.
  double perturb_rel = 0.01;
  std::optional<double> perturb_sd;

  Thresholds thresholds;
  double epsilon = 0.05;
  std::vector<double> lambda_grid;  // empty: {N/4, N/2, N, 2N, 4N}

  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

// 1{l_t > 0} * l_{t+1} / l_t * 1{l_t >= tol}
double per_step_training_loss(double loss_t, double loss_next, double tol);

struct AcceptanceEntry {
  std::size_t window = 0;
  std::size_t iteration = 0;
  double incumbent_pA = 0.0;
  double candidate_pA = 0.0;
  bool accepted = false;
};

struct TrainState {
  Hyperparameters hyper;
  Vec moment1;
  Vec moment2;
  std::size_t opt_steps = 0;
  std::size_t iteration = 0;
  std::size_t skipped = 0;  // updates dropped for non-finite values
  double pA = -1.0;         // incumbent P_hat{A} on the validation set, -1 if unknown
  std::vector<AcceptanceEntry> log;
  std::vector<double> loss_trace;  // mean training loss per outer problem

  static TrainState fresh(Hyperparameters hyper);
};

using LogFn = std::function<void(const std::string&)>;

// Runs n_iters inner iterations from the current state. rng drives the
// choice of training problem.
void train_performance(TrainState& state, const StepModel& model,
                       const std::vector<Problem>& problems,
                       const PipelineConfig& cfg, Rng& rng, std::size_t n_iters,
                       const LogFn& log = {});

// in_A indicator per problem for one hyperparameter vector, over full-length
// rollouts of T steps.
std::vector<bool> event_A_indicators(const std::shared_ptr<const StepModel>& model,
                                     const Hyperparameters& hyper,
                                     const std::vector<Problem>& problems,
                                     std::size_t T, const Thresholds& th,
                                     std::size_t threads);

double p_hat(const std::vector<bool>& in_A);

void constrained_refinement(TrainState& state, const std::shared_ptr<const StepModel>& model,
                            const std::vector<Problem>& train_problems,
                            const std::vector<Problem>& val_problems,
                            const PipelineConfig& cfg, Rng& rng, const LogFn& log = {});

struct Prior {
  DiscreteMeasure measure;
  std::vector<Hyperparameters> atoms;
};

// Atom 0 is alpha_0 itself.
Prior build_prior(const Hyperparameters& alpha0, std::size_t n_sample,
                  double perturb_sd, Rng& rng);

double rms(std::span<const double> v);

// Throws if any instance id appears in more than one set.
void check_disjoint(const std::vector<const std::vector<Problem>*>& sets);

// Performance training on prior_set, then refinement against val_set.
TrainState train_stage(const PipelineConfig& cfg, ArchKind arch,
                       const std::vector<Problem>& prior_set,
                       const std::vector<Problem>& val_set, const LogFn& log = {});

struct CertifyResult {
  Prior prior;
  std::vector<std::vector<bool>> atom_in_A;  // [atom][problem]
  std::vector<double> risks;
  Certificate certificate;
  std::size_t final_index = 0;
};

// Prior around alpha0, per-atom risks on train_set, posterior and bound.
CertifyResult certify_stage(const PipelineConfig& cfg, ArchKind arch,
                            const Hyperparameters& alpha0,
                            const std::vector<Problem>& train_set, const LogFn& log = {});

struct PipelineResult {
  TrainState state;
  CertifyResult cert;
  Hyperparameters final_hyper;
};

PipelineResult run_pipeline(const PipelineConfig& cfg, ArchKind arch,
                            const std::vector<Problem>& prior_set,
                            const std::vector<Problem>& val_set,
                            const std::vector<Problem>& train_set,
                            const LogFn& log = {});

// Posterior step on given per-atom risks.
Certificate certify_risks(const Prior& prior, std::span<const double> risks,
                          const PipelineConfig& cfg, std::size_t N);

}  // namespace pacl2o

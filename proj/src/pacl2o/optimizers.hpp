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

// Update rules: heavy-ball, full-batch Adam and the two learned
// architectures. Every rule advances an AlgoState given the loss and
// gradient at its current iterate.

#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pacl2o/autodiff.hpp"
#include "pacl2o/problems.hpp"

namespace pacl2o {

struct AlgoState {
  Vec x_curr;
  Vec x_prev;
  std::size_t t = 1;
  double loss_prev = 0.0;
  std::vector<Vec> scratch;
};

// x_prev := x0 so momentum features vanish at t = 1.
AlgoState init_state(std::span<const double> x0, double loss0);

// x_prev := x_curr, x_curr := x_next, loss_prev := loss_curr, t += 1.
void advance(AlgoState& state, Vec x_next, double loss_curr);

// --- heavy-ball with friction ------------------------------------------------

struct HbfCoeffs {
  double beta1 = 0.0;
  double beta2 = 0.0;
};

// Worst-case optimal coefficients for m_lower-strongly convex, L_upper-smooth
// quadratics.
HbfCoeffs hbf_optimal_coeffs(double m_lower, double L_upper);

// x+ = x - beta1 grad + beta2 (x - x_prev)
void hbf_step(AlgoState& state, const LossGrad& at_curr, double beta1,
              double beta2);

// --- Adam ----------------------------------------------------------------------

struct AdamConfig {
  double lr = 0.008;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam; moments live in state.scratch[0..1].
void adam_step(AlgoState& state, const LossGrad& at_curr, const AdamConfig& cfg);

// --- learned architectures -----------------------------------------------------

enum class ArchKind { Quad, Nn };

std::string_view to_string(ArchKind a);

struct HyperBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return rows * cols; }
};

class HyperLayout {
 public:
  HyperLayout() = default;
  explicit HyperLayout(std::vector<HyperBlock> blocks);

  const std::vector<HyperBlock>& blocks() const { return blocks_; }
  const HyperBlock& block(std::string_view name) const;
  std::size_t size() const { return size_; }

  friend bool operator==(const HyperLayout& a, const HyperLayout& b);

 private:
  std::vector<HyperBlock> blocks_;
  std::size_t size_ = 0;
};

struct Hyperparameters {
  HyperLayout layout;
  Vec flat;
};

// Direction block: 1x1 convolutions 3-30-30-20-10-10-1, ReLU after layers
// 2, 3, 4. Step block: linear 4-30-30-20-10-10-1, same activations.
HyperLayout quad_arch_layout();

// Weight block: linear 6-30-20-10-4, ReLU after layers 1, 2, 3. Direction
// block: 1x1 convolutions 4-20-20-20-1, same pattern. Preconditioners g, m.
HyperLayout nn_arch_layout(std::size_t dim);

HyperLayout arch_layout(ArchKind arch, std::size_t dim);

enum class HyperInit { Zero, Uniform };

// Uniform: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per weight block,
// preconditioners set to one.
Hyperparameters init_hyper(const HyperLayout& layout, HyperInit init, Rng& rng);

struct QuadFeatures {
  Vec d1, d2, d3;
  std::array<double, 4> s{};
};

struct NnFeatures {
  std::array<double, 6> s{};
  Vec d1, d2;
  Vec g_d1, m_d2;
};

QuadFeatures quad_features(const AlgoState& state, const LossGrad& at_curr);
NnFeatures nn_features(const AlgoState& state, const LossGrad& at_curr,
                       const Hyperparameters& hyper);

// Compiled one-step update of a learned architecture at a fixed dimension.
// Immutable; shared across threads and hyperparameter atoms.
class StepModel {
 public:
  static std::shared_ptr<const StepModel> make(ArchKind arch, std::size_t dim);

  ArchKind arch() const { return arch_; }
  std::size_t dim() const { return dim_; }
  const HyperLayout& layout() const { return layout_; }

  Vec next_point(const AlgoState& state, const LossGrad& at_curr,
                 const Hyperparameters& hyper) const;

  // Graph of loss(x_next) / loss(x_curr) for one problem family, with x_next
  // produced by this update. Gradient slot 0 is the hyperparameter vector.
  std::shared_ptr<const ad::CompGraph> training_graph(const Problem& shape_of) const;

  // Inputs for training_graph; x_next is differentiated, everything derived
  // from the current state is held fixed.
  ad::GradResult training_loss_grad(const ad::CompGraph& graph,
                                    const AlgoState& state,
                                    const LossGrad& at_curr,
                                    const Hyperparameters& hyper,
                                    const Problem& problem) const;

 private:
  StepModel(ArchKind arch, std::size_t dim);

  struct Features {
    Vec channels;
    Vec scalars;
    double inv_sqrt_t = 1.0;
  };
  Features features(const AlgoState& state, const LossGrad& at_curr) const;
  void check(const Hyperparameters& hyper) const;

  ArchKind arch_;
  std::size_t dim_;
  HyperLayout layout_;
  ad::CompGraph step_graph_;
};

void learned_quad_step(AlgoState& state, const LossGrad& at_curr,
                       const Hyperparameters& hyper, const StepModel& model);
void learned_nn_step(AlgoState& state, const LossGrad& at_curr,
                     const Hyperparameters& hyper, const StepModel& model);

// --- polymorphic front end used by rollouts -------------------------------------

class Algorithm {
 public:
  virtual ~Algorithm() = default;
  virtual std::string tag() const = 0;
  virtual AlgoState init(std::span<const double> x0, const LossGrad& at_x0) const;
  virtual void step(AlgoState& state, const LossGrad& at_curr) const = 0;
};

class HeavyBall final : public Algorithm {
 public:
  explicit HeavyBall(HbfCoeffs c) : c_(c) {}
  std::string tag() const override { return "hbf"; }
  void step(AlgoState& state, const LossGrad& at_curr) const override;

 private:
  HbfCoeffs c_;
};

class Adam final : public Algorithm {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  std::string tag() const override { return "adam"; }
  void step(AlgoState& state, const LossGrad& at_curr) const override;

 private:
  AdamConfig cfg_;
};

class GradientDescent final : public Algorithm {
 public:
  explicit GradientDescent(double step_size) : step_size_(step_size) {}
  std::string tag() const override { return "gd"; }
  void step(AlgoState& state, const LossGrad& at_curr) const override;

 private:
  double step_size_;
};

class LearnedAlgorithm final : public Algorithm {
 public:
  LearnedAlgorithm(std::shared_ptr<const StepModel> model, Hyperparameters hyper,
                   std::string tag = "learned");
  std::string tag() const override { return tag_; }
  void step(AlgoState& state, const LossGrad& at_curr) const override;
  const Hyperparameters& hyper() const { return hyper_; }

 private:
  std::shared_ptr<const StepModel> model_;
  Hyperparameters hyper_;
  std::string tag_;
};

}  // namespace pacl2o

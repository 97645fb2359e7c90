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
// Parametric problem families: diagonal least-squares quadratics and
// polynomial regression with a two-layer ReLU network.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <variant>

#include "pacl2o/autodiff.hpp"
#include "pacl2o/linalg.hpp"
#include "pacl2o/random.hpp"

namespace pacl2o {

enum class Family { Quadratic, NnRegression };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

struct LossGrad {
  double loss = 0.0;
  Vec grad;
};

// ---------------------------------------------------------------------------
// Quadratics: min 1/2 ||A x - b||^2 with A diagonal.

struct QuadraticConfig {
  std::size_t dim = 20;
  double m_lo = 0.05;
  double m_hi = 0.5;
  double L_lo = 50.0;
  double L_hi = 500.0;
  double rhs_scale = 1.0;
  // Initial iterate ~ Normal(0, x0_scale^2 I); zero gives the origin.
  double x0_scale = 0.0;

  void validate() const;
};

struct QuadraticInstance {
  std::uint64_t id = 0;
  double m = 0.0;
  double L = 0.0;
  Vec diag;  // strictly increasing for L > m
  Vec rhs;
  Vec minimizer;
  Vec x0;
};

// a_ii = sqrt(m) + i (sqrt(L) - sqrt(m)) / d, i = 1..d.
Vec quadratic_diagonal(std::size_t dim, double m, double L);

QuadraticInstance make_quadratic(std::uint64_t id, double m, double L, Vec rhs,
                                 Vec x0 = {});
QuadraticInstance sample_quadratic(const QuadraticConfig& cfg, std::uint64_t id,
                                   Rng& rng);
LossGrad quadratic_loss_grad(const QuadraticInstance& inst,
                             std::span<const double> x);

// ---------------------------------------------------------------------------
// Regression: MSE of a degree-5 feature, 50-unit ReLU network.

// Flat parameter layout: A1 (hidden x degree), b1 (hidden), A2 (1 x hidden), b2.
struct NetLayout {
  std::size_t degree = 5;
  std::size_t hidden = 50;

  std::size_t param_dim() const { return hidden * degree + hidden + hidden + 1; }
  std::size_t a1_offset() const { return 0; }
  std::size_t b1_offset() const { return hidden * degree; }
  std::size_t a2_offset() const { return hidden * degree + hidden; }
  std::size_t b2_offset() const { return hidden * degree + 2 * hidden; }
};

struct RegressionConfig {
  std::size_t K = 50;
  double coeff_bound = 5.0;
  double x_bound = 2.0;
  double noise_sd = 1.0;
  NetLayout layout;

  void validate() const;
};

struct RegressionInstance {
  std::uint64_t id = 0;
  Vec xs;
  Vec ys;
  Vec coeffs;  // ground truth g, diagnostics only
  Vec x0;      // initial network weights
};

RegressionInstance sample_regression(const RegressionConfig& cfg,
                                     std::uint64_t id, Rng& rng);

// degree x K row-major matrix with row p holding x^(p+1).
Vec regression_features(std::span<const double> xs, std::size_t degree);

LossGrad regression_loss_grad(const RegressionInstance& inst,
                              const NetLayout& layout,
                              std::span<const double> beta);

// Network output at every abscissa.
Vec regression_predict(const NetLayout& layout, std::span<const double> beta,
                       std::span<const double> xs);

// Graph fragments shared by the loss evaluators and the training graphs.
ad::NodeId append_quadratic_loss(ad::GraphBuilder& g, ad::NodeId x,
                                 ad::NodeId diag, ad::NodeId rhs);
ad::NodeId append_regression_loss(ad::GraphBuilder& g, ad::NodeId beta,
                                  ad::NodeId features, ad::NodeId targets,
                                  const NetLayout& layout, std::size_t K);

// ---------------------------------------------------------------------------

// One member of a problem family, with loss and gradient oracles.
class Problem {
 public:
  explicit Problem(QuadraticInstance inst);
  Problem(RegressionInstance inst, NetLayout layout);

  Family family() const;
  std::uint64_t id() const;
  std::size_t dim() const;
  const Vec& x0() const;

  LossGrad loss_grad(std::span<const double> x) const;
  double loss(std::span<const double> x) const;

  // Known minimizer (quadratics only).
  const Vec* minimizer() const;

  const QuadraticInstance* quadratic() const;
  const RegressionInstance* regression() const;
  const NetLayout& layout() const { return layout_; }
  // Cached degree x K feature matrix for the regression family.
  const Vec& features() const { return features_; }

 private:
  std::variant<QuadraticInstance, RegressionInstance> inst_;
  NetLayout layout_;
  Vec features_;
  std::shared_ptr<const ad::CompGraph> graph_;
};

}  // namespace pacl2o

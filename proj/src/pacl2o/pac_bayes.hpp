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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pacl2o {

struct DiscreteMeasure {
  std::vector<std::uint64_t> atoms;  // hyperparameter ids
  std::vector<double> weights;

  std::size_t size() const { return atoms.size(); }
  // Throws unless sizes agree, weights are >= 0 and sum to 1 within 1e-12.
  void validate() const;

  static DiscreteMeasure uniform(std::vector<std::uint64_t> atoms);
};

// (1 - exp(-a p)) / (1 - exp(-a)), a > 0.
double phi_inverse(double a, double p);

// KL(rho || prior), matched by position. +inf when rho is not absolutely
// continuous with respect to prior.
double kl_discrete(const DiscreteMeasure& rho, const DiscreteMeasure& prior);

// Fraction of false entries.
double empirical_risk(std::span<const bool> in_A);
double empirical_risk(const std::vector<bool>& in_A);

// rho_i proportional to prior_i * exp(-lambda * risk_i).
DiscreteMeasure gibbs_posterior(const DiscreteMeasure& prior,
                                std::span<const double> risks, double lambda);

std::vector<double> default_lambda_grid(std::size_t N);

struct Certificate {
  DiscreteMeasure prior;
  DiscreteMeasure posterior;
  std::vector<double> risks;
  std::vector<double> lambda_grid;
  double lambda = 0.0;
  double epsilon = 0.0;
  double epsilon_per_lambda = 0.0;
  std::size_t N = 0;
  double kl = 0.0;
  double posterior_risk = 0.0;  // sum_i rho_i r_i
  double raw_bound = 0.0;
  double bound = 0.0;           // raw_bound clamped to [0, 1]
  std::string posterior_form = "gibbs";

  nlohmann::json to_json() const;
  static Certificate from_json(const nlohmann::json& j);
};

// Bound for one fixed lambda at confidence eps.
double certificate_bound(double posterior_risk, double kl, double lambda,
                         double eps, std::size_t N, double* raw = nullptr);

// Tries every lambda in the grid with budget eps / |grid| each and keeps the
// largest bound (first one on ties).
Certificate certify(const DiscreteMeasure& prior, std::span<const double> risks,
                    std::span<const double> lambda_grid, double eps, std::size_t N);

// Index of the heaviest atom, lowest index on ties.
std::size_t select_final_hyper(const DiscreteMeasure& posterior);

}  // namespace pacl2o

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

#include "pacl2o/pac_bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pacl2o/error.hpp"

namespace pacl2o {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json measure_json(const DiscreteMeasure& m) {
  return {{"atoms", m.atoms}, {"weights", m.weights}};
}

DiscreteMeasure measure_from_json(const nlohmann::json& j) {
  DiscreteMeasure m;
  m.atoms = j.at("atoms").get<std::vector<std::uint64_t>>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.validate();
  return m;
}

// JSON has no infinity; store it as a string.
nlohmann::json num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

double denum(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

}  // namespace

void DiscreteMeasure::validate() const {
  if (atoms.size() != weights.size()) {
    fail(ErrorCode::InvalidArgument, "DiscreteMeasure: atoms and weights differ in length");
  }
  if (atoms.empty()) fail(ErrorCode::InvalidArgument, "DiscreteMeasure: no atoms");
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      fail(ErrorCode::InvalidArgument, "DiscreteMeasure: negative or non-finite weight");
    }
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-12) {
    fail(ErrorCode::InvalidArgument, "DiscreteMeasure: weights do not sum to 1");
  }
}

DiscreteMeasure DiscreteMeasure::uniform(std::vector<std::uint64_t> atoms) {
  if (atoms.empty()) fail(ErrorCode::InvalidArgument, "DiscreteMeasure::uniform: no atoms");
  DiscreteMeasure m;
  m.weights.assign(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
  m.atoms = std::move(atoms);
  return m;
}

double phi_inverse(double a, double p) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    fail(ErrorCode::InvalidArgument, "phi_inverse: a must be positive and finite");
  }
  if (a < 1e-8) return p * (1.0 + 0.5 * a * (1.0 - p));
  // expm1 keeps both numerator and denominator accurate for small a.
  return std::expm1(-a * p) / std::expm1(-a);
}

double kl_discrete(const DiscreteMeasure& rho, const DiscreteMeasure& prior) {
  if (rho.size() != prior.size()) {
    fail(ErrorCode::InvalidArgument, "kl_discrete: measures have different supports");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double r = rho.weights[i];
    if (r <= 0.0) continue;
    const double p = prior.weights[i];
    if (p <= 0.0) return kInf;
    kl += r * std::log(r / p);
  }
  // Rounding can leave a tiny negative value when rho == prior.
  return std::max(kl, 0.0);
}

double empirical_risk(std::span<const bool> in_A) {
  if (in_A.empty()) fail(ErrorCode::InvalidArgument, "empirical_risk: no reports");
  const auto bad = std::count(in_A.begin(), in_A.end(), false);
  return static_cast<double>(bad) / static_cast<double>(in_A.size());
}

double empirical_risk(const std::vector<bool>& in_A) {
  if (in_A.empty()) fail(ErrorCode::InvalidArgument, "empirical_risk: no reports");
  const auto bad = std::count(in_A.begin(), in_A.end(), false);
  return static_cast<double>(bad) / static_cast<double>(in_A.size());
}

DiscreteMeasure gibbs_posterior(const DiscreteMeasure& prior,
                                std::span<const double> risks, double lambda) {
  if (risks.size() != prior.size()) {
    fail(ErrorCode::InvalidArgument, "gibbs_posterior: one risk per atom required");
  }
  if (!(lambda >= 0.0)) fail(ErrorCode::InvalidArgument, "gibbs_posterior: lambda < 0");
  if (lambda == 0.0) return prior;  // exactly, without renormalizing
  // Work in log space, shifted by the smallest risk on the support.
  double r_min = kInf;
  for (std::size_t i = 0; i < risks.size(); ++i) {
    if (prior.weights[i] > 0.0) r_min = std::min(r_min, risks[i]);
  }
  if (!std::isfinite(r_min)) {
    fail(ErrorCode::InvalidArgument, "gibbs_posterior: all prior weights are zero");
  }
  DiscreteMeasure post;
  post.atoms = prior.atoms;
  post.weights.resize(prior.size());
  double z = 0.0;
  for (std::size_t i = 0; i < risks.size(); ++i) {
    const double w = prior.weights[i] > 0.0
                         ? prior.weights[i] * std::exp(-lambda * (risks[i] - r_min))
                         : 0.0;
    post.weights[i] = w;
    z += w;
  }
  for (double& w : post.weights) w /= z;
  return post;
}

std::vector<double> default_lambda_grid(std::size_t N) {
  const double n = static_cast<double>(N);
  return {n / 4.0, n / 2.0, n, 2.0 * n, 4.0 * n};
}

double certificate_bound(double posterior_risk, double kl, double lambda,
                         double eps, std::size_t N, double* raw) {
  if (!(eps > 0.0 && eps < 1.0)) fail(ErrorCode::InvalidArgument, "certify: eps not in (0,1)");
  if (N == 0) fail(ErrorCode::InvalidArgument, "certify: N must be positive");
  if (!(lambda > 0.0)) fail(ErrorCode::InvalidArgument, "certify: lambda must be positive");
  const double arg = posterior_risk + (kl + std::log(1.0 / eps)) / lambda;
  const double b = std::isfinite(arg)
                       ? 1.0 - phi_inverse(lambda / static_cast<double>(N), arg)
                       : -kInf;
  if (raw) *raw = b;
  return std::clamp(b, 0.0, 1.0);
}

Certificate certify(const DiscreteMeasure& prior, std::span<const double> risks,
                    std::span<const double> lambda_grid, double eps, std::size_t N) {
  if (!(eps > 0.0 && eps < 1.0)) fail(ErrorCode::InvalidArgument, "certify: eps not in (0,1)");
  if (N == 0) fail(ErrorCode::InvalidArgument, "certify: N must be positive");
  if (lambda_grid.empty()) fail(ErrorCode::InvalidArgument, "certify: empty lambda grid");
  prior.validate();
  for (double r : risks) {
    if (!(r >= 0.0 && r <= 1.0)) fail(ErrorCode::InvalidArgument, "certify: risk outside [0,1]");
  }

  Certificate best;
  bool have = false;
  const double eps_each = eps / static_cast<double>(lambda_grid.size());
  for (double lambda : lambda_grid) {
    Certificate c;
    c.prior = prior;
    c.risks.assign(risks.begin(), risks.end());
    c.posterior = gibbs_posterior(prior, risks, lambda);
    c.lambda = lambda;
    c.epsilon = eps;
    c.epsilon_per_lambda = eps_each;
    c.N = N;
    c.kl = kl_discrete(c.posterior, prior);
    c.posterior_risk = 0.0;
    for (std::size_t i = 0; i < risks.size(); ++i) {
      c.posterior_risk += c.posterior.weights[i] * risks[i];
    }
    c.bound = certificate_bound(c.posterior_risk, c.kl, lambda, eps_each, N, &c.raw_bound);
    if (!have || c.raw_bound > best.raw_bound) {
      best = std::move(c);
      have = true;
    }
  }
  best.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  return best;
}

std::size_t select_final_hyper(const DiscreteMeasure& posterior) {
  if (posterior.weights.empty()) {
    fail(ErrorCode::InvalidArgument, "select_final_hyper: empty posterior");
  }
  // max_element returns the first maximum.
  return static_cast<std::size_t>(
      std::max_element(posterior.weights.begin(), posterior.weights.end()) -
      posterior.weights.begin());
}

nlohmann::json Certificate::to_json() const {
  return {
      {"prior", measure_json(prior)},
      {"posterior", measure_json(posterior)},
      {"posterior_form", posterior_form},
      {"risks", risks},
      {"lambda_grid", lambda_grid},
      {"lambda", lambda},
      {"epsilon", epsilon},
      {"epsilon_per_lambda", epsilon_per_lambda},
      {"N", N},
      {"kl", num(kl)},
      {"posterior_risk", posterior_risk},
      {"raw_bound", num(raw_bound)},
      {"bound", bound},
  };
}

Certificate Certificate::from_json(const nlohmann::json& j) {
  Certificate c;
  try {
    c.prior = measure_from_json(j.at("prior"));
    c.posterior = measure_from_json(j.at("posterior"));
    c.posterior_form = j.value("posterior_form", std::string("gibbs"));
    c.risks = j.at("risks").get<std::vector<double>>();
    c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    c.lambda = j.at("lambda").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.epsilon_per_lambda = j.at("epsilon_per_lambda").get<double>();
    c.N = j.at("N").get<std::size_t>();
    c.kl = denum(j.at("kl"));
    c.posterior_risk = j.at("posterior_risk").get<double>();
    c.raw_bound = denum(j.at("raw_bound"));
    c.bound = j.at("bound").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("certificate: ") + e.what());
  }
  return c;
}

}  // namespace pacl2o

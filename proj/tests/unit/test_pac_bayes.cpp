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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "pacl2o/error.hpp"
#include "pacl2o/pac_bayes.hpp"
#include "pacl2o/random.hpp"

using namespace pacl2o;

namespace {

DiscreteMeasure measure(std::vector<double> w) {
  DiscreteMeasure m;
  for (std::size_t i = 0; i < w.size(); ++i) m.atoms.push_back(i);
  m.weights = std::move(w);
  return m;
}

DiscreteMeasure random_measure(Rng& rng, std::size_t n) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = g(rng);
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= s;
  // Exact normalization is not guaranteed; push the residue into the last atom.
  w.back() = std::max(0.0, 1.0 - std::accumulate(w.begin(), w.end() - 1, 0.0));
  return measure(std::move(w));
}

}  // namespace

TEST(PhiInverse, EndpointsAndValue) {
  for (double a : {1e-12, 1e-3, 0.5, 1.0, 7.0, 100.0}) {
    EXPECT_NEAR(phi_inverse(a, 0.0), 0.0, 1e-15) << a;
    EXPECT_NEAR(phi_inverse(a, 1.0), 1.0, 1e-12) << a;
  }
  EXPECT_NEAR(phi_inverse(1.0, 0.5), 0.6224593312018546, 1e-12);
  EXPECT_THROW(phi_inverse(0.0, 0.5), Error);
  EXPECT_THROW(phi_inverse(-1.0, 0.5), Error);
  EXPECT_GT(phi_inverse(1.0, 1.5), 1.0);
}

TEST(PhiInverse, MonotoneAndInUnitInterval) {
  for (double a : {1e-9, 0.01, 1.0, 10.0, 250.0}) {
    double prev = -1.0;
    for (int k = 0; k <= 200; ++k) {
      const double v = phi_inverse(a, k / 200.0);
      // For large a the curve saturates at 1.0 in double precision.
      if (a <= 10.0) {
        EXPECT_GT(v, prev);
      } else {
        EXPECT_GE(v, prev);
      }
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-15);
      prev = v;
    }
  }
}

TEST(PhiInverse, SeriesFallbackIsContinuous) {
  for (double a = 1e-10; a <= 1e-6; a *= 1.7) {
    for (double p : {0.0, 0.03, 0.4, 0.9, 1.0}) {
      const double closed = std::expm1(-a * p) / std::expm1(-a);
      EXPECT_LT(std::abs(phi_inverse(a, p) - closed), 1e-10);
    }
  }
  // Either side of the switch.
  EXPECT_NEAR(phi_inverse(0.99e-8, 0.3), phi_inverse(1.01e-8, 0.3), 1e-10);
}

TEST(Kl, Examples) {
  const auto u = measure({0.25, 0.25, 0.25, 0.25});
  EXPECT_EQ(kl_discrete(u, u), 0.0);
  EXPECT_NEAR(kl_discrete(measure({0, 0, 1, 0}), u), std::log(4.0), 1e-15);
  EXPECT_EQ(kl_discrete(measure({0.5, 0.5}), measure({1.0, 0.0})),
            std::numeric_limits<double>::infinity());
  EXPECT_THROW(kl_discrete(u, measure({1.0})), Error);
}

TEST(Kl, NonnegativeOnRandomMeasures) {
  Rng rng(11);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 1 + rep % 12;
    const auto p = random_measure(rng, n), q = random_measure(rng, n);
    EXPECT_GE(kl_discrete(p, q), 0.0);
    EXPECT_LE(kl_discrete(p, p), 1e-15);
  }
}

TEST(EmpiricalRisk, Fractions) {
  EXPECT_EQ(empirical_risk(std::vector<bool>{true, true}), 0.0);
  EXPECT_EQ(empirical_risk(std::vector<bool>{false, false}), 1.0);
  EXPECT_EQ(empirical_risk(std::vector<bool>{true, false, true, true}), 0.25);
  EXPECT_THROW(empirical_risk(std::vector<bool>{}), Error);
}

TEST(Gibbs, Examples) {
  const auto prior = measure({0.2, 0.3, 0.5});
  const std::vector<double> risks{0.4, 0.1, 0.9};
  EXPECT_EQ(gibbs_posterior(prior, risks, 0.0).weights, prior.weights);

  const auto two = gibbs_posterior(measure({0.5, 0.5}), std::vector<double>{0.0, 1.0}, 1.0);
  const double e = std::exp(-1.0);
  EXPECT_NEAR(two.weights[0], 1.0 / (1.0 + e), 1e-15);
  EXPECT_NEAR(two.weights[1], e / (1.0 + e), 1e-15);

  const auto sharp = gibbs_posterior(prior, risks, 1e5);
  EXPECT_NEAR(sharp.weights[1], 1.0, 1e-12);
  EXPECT_EQ(select_final_hyper(sharp), 1u);

  EXPECT_THROW(gibbs_posterior(prior, risks, -1.0), Error);
  EXPECT_THROW(gibbs_posterior(prior, std::vector<double>{0.1}, 1.0), Error);
  DiscreteMeasure zero = measure({0.0, 0.0});
  EXPECT_THROW(gibbs_posterior(zero, std::vector<double>{0.1, 0.2}, 1.0), Error);
}

TEST(Gibbs, ArgmaxFollowsArgminRiskAndIgnoresShift) {
  Rng rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + rep % 8;
    const auto prior = DiscreteMeasure::uniform([&] {
      std::vector<std::uint64_t> a(n);
      std::iota(a.begin(), a.end(), 0);
      return a;
    }());
    std::vector<double> risks(n);
    for (auto& r : risks) r = std::round(u(rng) * 50.0) / 50.0;
    auto sorted = risks;
    std::sort(sorted.begin(), sorted.end());
    double gap = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
      if (sorted[i] > sorted[i - 1]) gap = std::min(gap, sorted[i] - sorted[i - 1]);
    }
    const double lambda = 60.0 / gap;
    const auto post = gibbs_posterior(prior, risks, lambda);
    const std::size_t argmin =
        static_cast<std::size_t>(std::min_element(risks.begin(), risks.end()) - risks.begin());
    EXPECT_EQ(select_final_hyper(post), argmin);

    auto shifted = risks;
    for (auto& r : shifted) r += 0.37;
    EXPECT_EQ(select_final_hyper(gibbs_posterior(prior, shifted, 3.0)),
              select_final_hyper(gibbs_posterior(prior, risks, 3.0)));
  }
}

TEST(Certify, Examples) {
  const auto point = measure({1.0});
  const std::vector<double> zero{0.0};
  const std::vector<double> grid{100.0};
  const auto c = certify(point, zero, grid, 0.05, 100);
  EXPECT_EQ(c.kl, 0.0);
  EXPECT_NEAR(c.bound, 1.0 - phi_inverse(1.0, std::log(20.0) / 100.0), 1e-15);
  EXPECT_NEAR(c.bound, 0.9533, 5e-5);

  const std::vector<double> ones{1.0, 1.0};
  const auto vac = certify(measure({0.5, 0.5}), ones, default_lambda_grid(50), 0.05, 50);
  EXPECT_LE(vac.raw_bound, 0.0);
  EXPECT_EQ(vac.bound, 0.0);

  EXPECT_THROW(certify(point, zero, grid, 0.0, 100), Error);
  EXPECT_THROW(certify(point, zero, grid, 1.0, 100), Error);
  EXPECT_THROW(certify(point, zero, std::vector<double>{}, 0.05, 100), Error);
}

TEST(Certify, GridSplitsEpsilonAndKeepsBest) {
  const auto prior = measure({0.25, 0.25, 0.25, 0.25});
  const std::vector<double> risks{0.05, 0.1, 0.3, 0.6};
  const auto grid = default_lambda_grid(80);
  ASSERT_EQ(grid, (std::vector<double>{20, 40, 80, 160, 320}));
  const auto c = certify(prior, risks, grid, 0.05, 80);
  EXPECT_DOUBLE_EQ(c.epsilon_per_lambda, 0.01);
  EXPECT_EQ(c.lambda_grid, grid);
  for (double l : grid) {
    const auto one = certify(prior, risks, std::vector<double>{l}, 0.01, 80);
    EXPECT_LE(one.raw_bound, c.raw_bound);
  }
  EXPECT_GE(c.bound, 0.0);
  EXPECT_LE(c.bound, 1.0);
}

TEST(Certify, MoreDataNeverHurts) {
  const auto prior = measure({0.5, 0.5});
  const std::vector<double> risks{0.1, 0.2};
  double prev = -1.0;
  for (std::size_t N : {10u, 20u, 50u, 100u, 500u, 2000u}) {
    const std::vector<double> grid{static_cast<double>(N)};
    const double b = certify(prior, risks, grid, 0.05, N).bound;
    EXPECT_GE(b, prev) << N;
    prev = b;
  }
}

// Bernoulli events with known success probabilities: the certificate must
// under-estimate the rho-averaged truth in at least 1 - eps of the redraws.
TEST(Certify, MonteCarloSoundness) {
  const std::vector<double> p_true{0.95, 0.9, 0.8, 0.97, 0.6};
  const std::size_t N = 50, draws = 200;
  const double eps = 0.05;
  const auto prior = measure({0.2, 0.2, 0.2, 0.2, 0.2});
  Rng rng(derive_seed(7, stream::kSynthetic));
  std::size_t ok = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    std::vector<double> risks;
    for (double p : p_true) {
      std::binomial_distribution<int> bin(static_cast<int>(N), 1.0 - p);
      risks.push_back(bin(rng) / static_cast<double>(N));
    }
    const auto c = certify(prior, risks, default_lambda_grid(N), eps, N);
    double truth = 0.0;
    for (std::size_t i = 0; i < p_true.size(); ++i) truth += c.posterior.weights[i] * p_true[i];
    ok += c.bound <= truth;
  }
  const double se = std::sqrt(eps * (1 - eps) / draws);
  EXPECT_GE(static_cast<double>(ok) / draws, 1.0 - eps - 3 * se);
}

TEST(SelectFinal, TieRule) {
  EXPECT_EQ(select_final_hyper(measure({0.0, 1.0, 0.0})), 1u);
  EXPECT_EQ(select_final_hyper(measure({1.0 / 3, 1.0 / 3, 1.0 / 3})), 0u);
  EXPECT_EQ(select_final_hyper(measure({0.2, 0.5, 0.3})), 1u);
}

TEST(CertificateJson, RoundTrip) {
  const auto prior = measure({0.25, 0.25, 0.5});
  const std::vector<double> risks{1.0, 1.0, 1.0};
  const auto c = certify(prior, risks, default_lambda_grid(10), 0.1, 10);
  const auto back = Certificate::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.posterior_form, "gibbs");
  EXPECT_THROW(Certificate::from_json(nlohmann::json{{"prior", 1}}), Error);
}

TEST(Measure, Validate) {
  EXPECT_NO_THROW(measure({0.5, 0.5}).validate());
  EXPECT_THROW(measure({0.5, 0.6}).validate(), Error);
  EXPECT_THROW(measure({-0.5, 1.5}).validate(), Error);
  EXPECT_THROW(measure({}).validate(), Error);
}

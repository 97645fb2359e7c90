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
#include <random>

#include <gtest/gtest.h>

#include "pacl2o/error.hpp"
#include "pacl2o/linalg.hpp"
#include "pacl2o/problems.hpp"
#include "pacl2o/random.hpp"

using namespace pacl2o;

namespace {

Vec randn(Rng& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Vec v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Hidden-layer pre-activations of the regression net.
Vec preactivations(const RegressionInstance& r, const NetLayout& lay, const Vec& beta) {
  Vec out;
  for (double x : r.xs) {
    for (std::size_t h = 0; h < lay.hidden; ++h) {
      double s = beta[lay.b1_offset() + h];
      double p = 1.0;
      for (std::size_t k = 0; k < lay.degree; ++k) {
        p *= x;
        s += beta[lay.a1_offset() + h * lay.degree + k] * p;
      }
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace

TEST(Quadratic, DiagonalFormula) {
  EXPECT_EQ(quadratic_diagonal(2, 1.0, 4.0), (Vec{1.5, 2.0}));
  EXPECT_EQ(quadratic_diagonal(1, 1.0, 1.0), (Vec{1.0}));
}

TEST(Quadratic, OneDimensionalLossAndGradient) {
  // A = (2) needs sqrt(m) + (sqrt(L) - sqrt(m)) = 2, i.e. L = 4.
  const auto q = make_quadratic(0, 4.0, 4.0, {4.0}, {1.0});
  const auto lg = quadratic_loss_grad(q, Vec{1.0});
  EXPECT_EQ(lg.loss, 2.0);
  EXPECT_EQ(lg.grad, (Vec{-4.0}));
}

TEST(Quadratic, SampledInstancesSatisfyInvariants) {
  QuadraticConfig cfg;
  Rng rng(1);
  for (std::uint64_t id = 0; id < 200; ++id) {
    const auto q = sample_quadratic(cfg, id, rng);
    ASSERT_EQ(q.diag.size(), cfg.dim);
    EXPECT_GE(q.m, cfg.m_lo);
    EXPECT_LE(q.m, cfg.m_hi);
    EXPECT_GE(q.L, cfg.L_lo);
    EXPECT_LE(q.L, cfg.L_hi);
    for (std::size_t i = 0; i < q.diag.size(); ++i) {
      EXPECT_GE(q.diag[i], std::sqrt(q.m));
      EXPECT_LE(q.diag[i], std::sqrt(q.L) * (1 + 1e-15));
      if (i > 0) {
        EXPECT_GT(q.diag[i], q.diag[i - 1]);
      }
    }
    const auto at_min = quadratic_loss_grad(q, q.minimizer);
    EXPECT_LE(at_min.loss, 1e-20);
    EXPECT_LE(norm(at_min.grad), 1e-12);
  }
}

TEST(Quadratic, InvalidIntervalsAreConfigErrors) {
  QuadraticConfig cfg;
  cfg.m_hi = 60.0;  // overlaps [L_lo, L_hi]
  Rng rng(0);
  try {
    sample_quadratic(cfg, 0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
}

TEST(Quadratic, DimensionMismatch) {
  const auto q = make_quadratic(0, 1.0, 4.0, {1.0, 1.0});
  EXPECT_THROW(quadratic_loss_grad(q, Vec{1.0}), Error);
}

TEST(Quadratic, StrongConvexityAndSmoothness) {
  QuadraticConfig cfg;
  Rng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const auto q = sample_quadratic(cfg, rep, rng);
    const Vec x = randn(rng, cfg.dim, 3.0);
    const Vec y = randn(rng, cfg.dim, 3.0);
    const auto fx = quadratic_loss_grad(q, x);
    const auto fy = quadratic_loss_grad(q, y);
    const double mu = q.diag.front() * q.diag.front();
    const double Lc = q.diag.back() * q.diag.back();
    Vec d(cfg.dim), dg(cfg.dim);
    for (std::size_t i = 0; i < cfg.dim; ++i) {
      d[i] = y[i] - x[i];
      dg[i] = fy.grad[i] - fx.grad[i];
    }
    const double lower = fx.loss + dot(fx.grad, d) + 0.5 * mu * dot(d, d);
    EXPECT_GE(fy.loss, lower - 1e-8 * std::max(1.0, std::abs(lower)));
    EXPECT_LE(norm(dg), Lc * norm(d) * (1 + 1e-12));
  }
}

TEST(Quadratic, GradientMatchesAutodiffProblem) {
  QuadraticConfig cfg;
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Problem p(sample_quadratic(cfg, rep, rng));
    const Vec x = randn(rng, cfg.dim);
    const auto direct = quadratic_loss_grad(*p.quadratic(), x);
    const auto via = p.loss_grad(x);
    EXPECT_NEAR(via.loss, direct.loss, 1e-10 * std::max(1.0, direct.loss));
    for (std::size_t i = 0; i < cfg.dim; ++i) EXPECT_NEAR(via.grad[i], direct.grad[i], 1e-10);
  }
}

TEST(Regression, LayoutDimension) {
  EXPECT_EQ(NetLayout{}.param_dim(), 351u);
}

TEST(Regression, SamplesRespectBoundsAndAreSeeded) {
  RegressionConfig cfg;
  Rng a(9), b(9);
  const auto r1 = sample_regression(cfg, 4, a);
  const auto r2 = sample_regression(cfg, 4, b);
  EXPECT_EQ(r1.xs, r2.xs);
  EXPECT_EQ(r1.ys, r2.ys);
  EXPECT_EQ(r1.x0, r2.x0);
  ASSERT_EQ(r1.xs.size(), cfg.K);
  ASSERT_EQ(r1.coeffs.size(), 6u);
  for (double x : r1.xs) EXPECT_LE(std::abs(x), 2.0);
  for (double c : r1.coeffs) EXPECT_LE(std::abs(c), 5.0);
  EXPECT_EQ(r1.x0.size(), 351u);
}

TEST(Regression, NoiselessZeroPolynomialGivesZeroTargets) {
  RegressionConfig cfg;
  cfg.noise_sd = 0.0;
  cfg.coeff_bound = 0.0;
  Rng rng(1);
  const auto r = sample_regression(cfg, 0, rng);
  for (double y : r.ys) EXPECT_EQ(y, 0.0);
}

TEST(Regression, ZeroWeightsHandDerivation) {
  RegressionInstance r;
  r.xs = {0.5, -1.0};
  r.ys = {1.0, 3.0};
  const NetLayout lay;
  const Vec beta(lay.param_dim(), 0.0);
  const auto lg = regression_loss_grad(r, lay, beta);
  EXPECT_DOUBLE_EQ(lg.loss, (1.0 + 9.0) / 2.0);
  EXPECT_DOUBLE_EQ(lg.grad[lay.b2_offset()], -(2.0 / 2.0) * (1.0 + 3.0));
}

TEST(Regression, OutputBiasShiftsWithTargets) {
  RegressionConfig cfg;
  Rng rng(4);
  auto r = sample_regression(cfg, 0, rng);
  Vec beta = r.x0;
  const double before = regression_loss_grad(r, cfg.layout, beta).loss;
  for (double& y : r.ys) y += 2.5;
  beta[cfg.layout.b2_offset()] += 2.5;
  EXPECT_NEAR(regression_loss_grad(r, cfg.layout, beta).loss, before, 1e-12);
}

TEST(Regression, GradientMatchesFiniteDifferences) {
  RegressionConfig cfg;
  cfg.K = 10;
  Rng rng(5);
  const double h = 1e-5;
  for (int rep = 0; rep < 10; ++rep) {
    const auto r = sample_regression(cfg, rep, rng);
    Vec beta = r.x0;
    bool near = false;
    for (double s : preactivations(r, cfg.layout, beta)) near |= std::abs(s) < 1e-3;
    if (near) continue;
    const auto lg = regression_loss_grad(r, cfg.layout, beta);
    for (std::size_t i = 0; i < beta.size(); i += 7) {
      const double keep = beta[i];
      beta[i] = keep + h;
      const double fp = regression_loss_grad(r, cfg.layout, beta).loss;
      beta[i] = keep - h;
      const double fm = regression_loss_grad(r, cfg.layout, beta).loss;
      beta[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      EXPECT_LT(std::abs(fd - lg.grad[i]) / std::max({1.0, std::abs(fd), std::abs(lg.grad[i])}),
                1e-4);
    }
  }
}

TEST(Regression, LossIsNonnegativeAndZeroWhenInterpolating) {
  RegressionConfig cfg;
  Rng rng(6);
  auto r = sample_regression(cfg, 0, rng);
  EXPECT_GE(regression_loss_grad(r, cfg.layout, r.x0).loss, 0.0);
  r.ys = regression_predict(cfg.layout, r.x0, r.xs);
  EXPECT_EQ(regression_loss_grad(r, cfg.layout, r.x0).loss, 0.0);
}

TEST(ProblemFacade, DimensionsAndMinimizer) {
  Rng rng(7);
  const Problem q(sample_quadratic(QuadraticConfig{}, 3, rng));
  EXPECT_EQ(q.family(), Family::Quadratic);
  EXPECT_EQ(q.id(), 3u);
  ASSERT_NE(q.minimizer(), nullptr);
  const Problem r(sample_regression(RegressionConfig{}, 8, rng), NetLayout{});
  EXPECT_EQ(r.dim(), 351u);
  EXPECT_EQ(r.minimizer(), nullptr);
  EXPECT_THROW(r.loss_grad(Vec(3)), Error);
}

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
#include "pacl2o/linalg.hpp"
#include "pacl2o/optimizers.hpp"
#include "pacl2o/random.hpp"
#include "pacl2o/trajectory.hpp"

using namespace pacl2o;

namespace {

Vec randn(Rng& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Vec v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Vec permute(const Vec& v, const std::vector<std::size_t>& p) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[p[i]];
  return out;
}

// A state after a few plain gradient steps, so momentum features are live.
AlgoState warm_state(const Problem& p, Rng& rng) {
  AlgoState s = init_state(randn(rng, p.dim()), 0.0);
  s.loss_prev = p.loss(s.x_curr);
  for (int k = 0; k < 2; ++k) {
    const auto lg = p.loss_grad(s.x_curr);
    hbf_step(s, lg, 1e-3, 0.5);
  }
  return s;
}

// Textbook Adam, written out independently of the library.
struct RefAdam {
  double lr, b1, b2, eps;
  Vec m, v;
  int t = 0;
  void step(Vec& x, const Vec& g) {
    if (m.empty()) {
      m.assign(x.size(), 0.0);
      v.assign(x.size(), 0.0);
    }
    ++t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      x[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

}  // namespace

TEST(Hbf, OptimalCoefficients) {
  const auto c = hbf_optimal_coeffs(1.0, 9.0);
  EXPECT_DOUBLE_EQ(c.beta1, 0.25);
  EXPECT_DOUBLE_EQ(c.beta2, 0.25);
  const auto e = hbf_optimal_coeffs(4.0, 4.0);
  EXPECT_DOUBLE_EQ(e.beta1, 0.25);
  EXPECT_EQ(e.beta2, 0.0);
  Rng rng(1);
  std::uniform_real_distribution<double> u(1e-3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    const auto r = hbf_optimal_coeffs(a, b);
    EXPECT_GE(r.beta2, 0.0);
    EXPECT_LT(r.beta2, 1.0);
  }
}

TEST(Hbf, GradientStepLandsOnIsotropicMinimizer) {
  // d = 1, A = (sqrt L): one step with beta1 = 1/L reaches b / A.
  const double L = 9.0;
  const Problem p(make_quadratic(0, L, L, {6.0}, {0.0}));
  AlgoState s = init_state(Vec{5.0}, p.loss(Vec{5.0}));
  hbf_step(s, p.loss_grad(s.x_curr), 1.0 / L, 0.0);
  EXPECT_NEAR(s.x_curr[0], 2.0, 1e-15);
  EXPECT_EQ(s.x_prev[0], 5.0);
  EXPECT_EQ(s.t, 2u);
}

TEST(Hbf, ZeroStepSizeAtRestIsIdentity) {
  AlgoState s = init_state(Vec{1.0, -2.0}, 3.0);
  hbf_step(s, LossGrad{3.0, {4.0, 4.0}}, 0.0, 0.7);
  EXPECT_EQ(s.x_curr, (Vec{1.0, -2.0}));
}

TEST(Hbf, ConvergesOnDeskQuadratics) {
  QuadraticConfig cfg;
  const auto c = hbf_optimal_coeffs(cfg.m_lo, cfg.L_hi);
  const HeavyBall hbf(c);
  Rng rng(2);
  for (int i = 0; i < 30; ++i) {
    cfg.x0_scale = 1.0;
    const Problem p(sample_quadratic(cfg, i, rng));
    RolloutOptions o;
    o.T = 2000;
    o.reference = p.minimizer();
    const auto tr = rollout(hbf, p, p.x0(), o);
    EXPECT_LT(tr.losses.back(), 1e-12);
    EXPECT_LT(tr.distances.back(), tr.distances.front());
  }
}

TEST(AdamStep, ZeroGradientLeavesIterate) {
  AlgoState s = init_state(Vec{1.0, 2.0}, 0.0);
  adam_step(s, LossGrad{0.0, {0.0, 0.0}}, AdamConfig{});
  EXPECT_EQ(s.x_curr, (Vec{1.0, 2.0}));
}

TEST(AdamStep, FirstStepIsSignTimesLr) {
  AdamConfig cfg;
  AlgoState s = init_state(Vec{0.0}, 0.0);
  adam_step(s, LossGrad{0.0, {3.7}}, cfg);
  EXPECT_NEAR(s.x_curr[0], -cfg.lr, 1e-9);
}

TEST(AdamStep, MatchesIndependentOracle) {
  const Problem p(make_quadratic(0, 1.0, 16.0, {1.0, -2.0}, {0.3, 0.4}));
  AdamConfig cfg;
  cfg.lr = 0.05;
  AlgoState s = init_state(p.x0(), p.loss(p.x0()));
  RefAdam ref{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, {}, {}, 0};
  Vec x = p.x0();
  for (int k = 0; k < 3; ++k) {
    adam_step(s, p.loss_grad(s.x_curr), cfg);
    ref.step(x, p.loss_grad(x).grad);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(s.x_curr[i], x[i], 1e-12);
  }
}

TEST(QuadFeaturesTest, ZeroConventions) {
  AlgoState s = init_state(Vec{1.0, 2.0, 3.0}, 5.0);
  const auto f = quad_features(s, LossGrad{5.0, {0.0, 0.0, 0.0}});
  EXPECT_EQ(f.d1, (Vec{0, 0, 0}));
  EXPECT_EQ(f.d2, (Vec{0, 0, 0}));
  EXPECT_EQ(f.d3, (Vec{0, 0, 0}));
  EXPECT_EQ(f.s[0], 0.0);
  EXPECT_EQ(f.s[1], 0.0);
  EXPECT_DOUBLE_EQ(f.s[2], std::log1p(5.0));
}

TEST(QuadFeaturesTest, UnitOrZeroDirections) {
  QuadraticConfig cfg;
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Problem p(sample_quadratic(cfg, i, rng));
    const auto s = warm_state(p, rng);
    const auto f = quad_features(s, p.loss_grad(s.x_curr));
    for (const Vec* d : {&f.d1, &f.d2}) {
      const double n = norm(*d);
      EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) < 1e-12);
    }
  }
}

TEST(NnFeaturesTest, FirstStepAndBounds) {
  const auto layout = nn_arch_layout(4);
  Rng rng(4);
  const auto hyper = init_hyper(layout, HyperInit::Uniform, rng);
  AlgoState s = init_state(Vec{1, 2, 3, 4}, 2.0);
  auto f = nn_features(s, LossGrad{2.0, {0.5, -1.0, 0.0, 0.25}}, hyper);
  EXPECT_EQ(f.s[1], 0.0);
  EXPECT_EQ(f.s[2], 0.0);
  EXPECT_EQ(f.s[3], 0.0);
  EXPECT_DOUBLE_EQ(f.s[4], 1.0);
  f = nn_features(s, LossGrad{2.0, {0, 0, 0, 0}}, hyper);
  EXPECT_EQ(f.s[0], 0.0);
  EXPECT_EQ(f.s[4], 0.0);
  EXPECT_EQ(f.d1, (Vec{0, 0, 0, 0}));
  for (int k = 0; k < 200; ++k) {
    AlgoState w = init_state(randn(rng, 4), 1.0);
    advance(w, randn(rng, 4), 1.5);
    const auto g = nn_features(w, LossGrad{1.0, randn(rng, 4)}, hyper);
    EXPECT_LE(std::abs(g.s[3]), 1.0 + 1e-15);
  }
}

TEST(LearnedQuad, ZeroWeightsDoNotMove) {
  auto model = StepModel::make(ArchKind::Quad, 5);
  Rng rng(5);
  const auto zero = init_hyper(model->layout(), HyperInit::Zero, rng);
  const Problem p(sample_quadratic(QuadraticConfig{.dim = 5}, 0, rng));
  const auto s = warm_state(p, rng);
  EXPECT_EQ(model->next_point(s, p.loss_grad(s.x_curr), zero), s.x_curr);
}

TEST(LearnedQuad, PermutationEquivariance) {
  const std::size_t d = 12;
  auto model = StepModel::make(ArchKind::Quad, d);
  Rng rng(6);
  QuadraticConfig cfg;
  cfg.dim = d;
  for (int rep = 0; rep < 20; ++rep) {
    const auto hyper = init_hyper(model->layout(), HyperInit::Uniform, rng);
    const Problem p(sample_quadratic(cfg, rep, rng));
    const auto s = warm_state(p, rng);
    const auto lg = p.loss_grad(s.x_curr);
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    AlgoState ps = s;
    ps.x_curr = permute(s.x_curr, perm);
    ps.x_prev = permute(s.x_prev, perm);
    const LossGrad plg{lg.loss, permute(lg.grad, perm)};
    const auto want = permute(model->next_point(s, lg, hyper), perm);
    const auto got = model->next_point(ps, plg, hyper);
    for (std::size_t i = 0; i < d; ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-12 * std::max(1.0, std::abs(want[i])));
    }
  }
}

TEST(LearnedQuad, RolloutIsDeterministic) {
  auto model = StepModel::make(ArchKind::Quad, 20);
  Rng r1(7), r2(7);
  const auto h = init_hyper(model->layout(), HyperInit::Uniform, r1);
  const Problem p(sample_quadratic(QuadraticConfig{}, 0, r2));
  const LearnedAlgorithm algo(model, h);
  RolloutOptions o;
  o.T = 5;
  o.record_states = true;
  const auto a = rollout(algo, p, p.x0(), o);
  const auto b = rollout(algo, p, p.x0(), o);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.losses, b.losses);
}

TEST(LearnedQuad, LayoutMismatchIsRejected) {
  auto model = StepModel::make(ArchKind::Quad, 4);
  Rng rng(8);
  const auto wrong = init_hyper(nn_arch_layout(4), HyperInit::Uniform, rng);
  EXPECT_THROW(LearnedAlgorithm(model, wrong), Error);
}

TEST(LearnedNn, ZeroWeightsDoNotMove) {
  auto model = StepModel::make(ArchKind::Nn, 6);
  Rng rng(9);
  const auto zero = init_hyper(model->layout(), HyperInit::Zero, rng);
  AlgoState s = init_state(randn(rng, 6), 1.0);
  advance(s, randn(rng, 6), 1.0);
  EXPECT_EQ(model->next_point(s, LossGrad{0.5, randn(rng, 6)}, zero), s.x_curr);
}

TEST(LearnedNn, StepShrinksWithSqrtT) {
  auto model = StepModel::make(ArchKind::Nn, 6);
  Rng rng(10);
  auto h = init_hyper(model->layout(), HyperInit::Uniform, rng);
  // Cut the weight block off from the s6 = t feature so d_out does not
  // depend on t; only the 1/sqrt(t) factor remains.
  const auto& w0 = h.layout.block("weight0");
  for (std::size_t r = 0; r < w0.rows; ++r) h.flat[w0.offset + r * w0.cols + 5] = 0.0;
  AlgoState s = init_state(randn(rng, 6), 1.0);
  advance(s, randn(rng, 6), 2.0);
  const LossGrad lg{0.5, randn(rng, 6)};
  s.t = 1;
  const auto x1 = model->next_point(s, lg, h);
  AlgoState s4 = s;
  s4.t = 4;
  const auto x4 = model->next_point(s4, lg, h);
  double moved = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double d1 = x1[i] - s.x_curr[i];
    const double d4 = x4[i] - s.x_curr[i];
    EXPECT_NEAR(d4, 0.5 * d1, 1e-12 * std::max(1.0, std::abs(d1)));
    moved += std::abs(d1);
  }
  EXPECT_GT(moved, 0.0);
}

TEST(LearnedNn, PermutationEquivariance) {
  const std::size_t d = 10;
  auto model = StepModel::make(ArchKind::Nn, d);
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    auto h = init_hyper(model->layout(), HyperInit::Uniform, rng);
    // Non-trivial preconditioners.
    const auto& gb = h.layout.block("g");
    const auto& mb = h.layout.block("m");
    for (std::size_t i = 0; i < d; ++i) {
      h.flat[gb.offset + i] = 0.5 + 0.1 * static_cast<double>(i);
      h.flat[mb.offset + i] = 1.5 - 0.05 * static_cast<double>(i);
    }
    AlgoState s = init_state(randn(rng, d), 1.0);
    advance(s, randn(rng, d), 0.7);
    const LossGrad lg{0.6, randn(rng, d)};
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto ph = h;
    for (std::size_t i = 0; i < d; ++i) {
      ph.flat[gb.offset + i] = h.flat[gb.offset + perm[i]];
      ph.flat[mb.offset + i] = h.flat[mb.offset + perm[i]];
    }
    AlgoState ps = s;
    ps.x_curr = permute(s.x_curr, perm);
    ps.x_prev = permute(s.x_prev, perm);
    const auto want = permute(model->next_point(s, lg, h), perm);
    const auto got = model->next_point(ps, LossGrad{lg.loss, permute(lg.grad, perm)}, ph);
    for (std::size_t i = 0; i < d; ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-12 * std::max(1.0, std::abs(want[i])));
    }
  }
}

TEST(AlgoStateTest, AdvanceBookkeeping) {
  AlgoState s = init_state(Vec{1.0}, 4.0);
  EXPECT_EQ(s.t, 1u);
  EXPECT_EQ(s.x_prev, s.x_curr);
  for (std::size_t k = 0; k < 5; ++k) {
    const Vec before = s.x_curr;
    advance(s, Vec{before[0] * 0.5}, 1.0);
    EXPECT_EQ(s.x_prev, before);
    EXPECT_EQ(s.t, k + 2);
  }
}

TEST(Rollout, HorizonZero) {
  const Problem p(make_quadratic(0, 1.0, 4.0, {1.0, 1.0}, {0.5, 0.5}));
  RolloutOptions o;
  const auto tr = rollout(GradientDescent(0.1), p, p.x0(), o);
  ASSERT_EQ(tr.losses.size(), 1u);
  EXPECT_EQ(tr.step_norms.size(), 0u);
  EXPECT_EQ(tr.losses[0], p.loss(p.x0()));
  EXPECT_EQ(tr.stop, StopReason::Horizon);
}

TEST(Rollout, StopRuleRecordsReasonAndLength) {
  const Problem p(make_quadratic(0, 1.0, 4.0, {1.0, 1.0}));
  RolloutOptions o;
  o.T = 10000;
  o.stop_rule = stop_below(1e-16);
  const auto tr = rollout(GradientDescent(0.2), p, p.x0(), o);
  EXPECT_EQ(tr.stop, StopReason::StopRule);
  const std::size_t k = tr.horizon();
  EXPECT_EQ(tr.losses.size(), k + 1);
  EXPECT_LT(tr.losses.back(), 1e-16);
  for (std::size_t t = 0; t < k; ++t) EXPECT_GE(tr.losses[t], 1e-16);
}

TEST(Rollout, DivergenceIsFlaggedNotThrown) {
  const Problem p(make_quadratic(0, 1.0, 4.0, {1.0, 1.0}));
  RolloutOptions o;
  o.T = 5000;
  const auto tr = rollout(GradientDescent(10.0), p, p.x0(), o);
  EXPECT_TRUE(tr.diverged);
  EXPECT_EQ(tr.stop, StopReason::Diverged);
  for (double v : tr.losses) EXPECT_TRUE(std::isfinite(v));
  EXPECT_LT(tr.horizon(), 5000u);
  const auto ok = rollout(GradientDescent(0.1), p, p.x0(), o);
  EXPECT_FALSE(ok.diverged);
}

TEST(Rollout, PrefixKeepsFirstSteps) {
  const Problem p(make_quadratic(0, 1.0, 4.0, {1.0, 1.0}));
  RolloutOptions o;
  o.T = 50;
  const auto tr = rollout(GradientDescent(0.1), p, p.x0(), o);
  const auto pre = tr.prefix(10);
  EXPECT_EQ(pre.horizon(), 10u);
  EXPECT_EQ(pre.losses.size(), 11u);
  EXPECT_TRUE(std::equal(pre.losses.begin(), pre.losses.end(), tr.losses.begin()));
}

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

#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "pacl2o/autodiff.hpp"

namespace ad = pacl2o::ad;

namespace {

using Vec = std::vector<double>;

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Central differences over every input coordinate.
Vec fd_gradient(const ad::CompGraph& g, const std::vector<Vec>& in, double h = 1e-5) {
  Vec out;
  std::vector<Vec> work = in;
  for (std::size_t s = 0; s < work.size(); ++s) {
    for (std::size_t i = 0; i < work[s].size(); ++i) {
      const double keep = work[s][i];
      ad::Bindings b;
      work[s][i] = keep + h;
      for (auto& v : work) b.emplace_back(v);
      const double fp = g.evaluate(b);
      work[s][i] = keep - h;
      const double fm = g.evaluate(b);
      work[s][i] = keep;
      out.push_back((fp - fm) / (2 * h));
    }
  }
  return out;
}

ad::Bindings bindings(const std::vector<Vec>& in) {
  ad::Bindings b;
  for (const auto& v : in) b.emplace_back(v);
  return b;
}

Vec random_away_from_zero(std::mt19937_64& rng, std::size_t n, double lo = 0.2, double hi = 2.0) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  Vec v(n);
  for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
  return v;
}

}  // namespace

TEST(Autodiff, HalfSquaredNorm) {
  ad::GraphBuilder b;
  auto x = b.node(b.input("x", {2, 1}));
  auto g = std::move(b).build(b.scale(0.5, b.dot(x, x)));
  const Vec v{3, 4};
  EXPECT_EQ(g.evaluate({v}), 12.5);
  const auto gr = g.gradient({v});
  EXPECT_EQ(gr.flat, (Vec{3, 4}));
}

TEST(Autodiff, ReluAtNegativeAndKink) {
  ad::GraphBuilder b;
  auto x = b.node(b.input("x", {1, 1}));
  auto g = std::move(b).build(b.relu(x));
  EXPECT_EQ(g.evaluate({Vec{-1.0}}), 0.0);
  EXPECT_EQ(g.gradient({Vec{0.0}}).flat[0], 0.0);
  EXPECT_EQ(g.gradient({Vec{0.5}}).flat[0], 1.0);
}

TEST(Autodiff, LogOnePlusNormOfZero) {
  ad::GraphBuilder b;
  auto x = b.node(b.input("g", {2, 1}));
  auto g = std::move(b).build(b.log(b.add(b.scalar(1.0), b.norm(x))));
  EXPECT_EQ(g.evaluate({Vec{0, 0}}), 0.0);
}

TEST(Autodiff, SquareGradient) {
  ad::GraphBuilder b;
  auto x = b.node(b.input("x", {1, 1}));
  auto g = std::move(b).build(b.mul(x, x));
  EXPECT_EQ(g.gradient({Vec{3.0}}).flat[0], 6.0);
}

TEST(Autodiff, GradientLengthIsTotalInputSize) {
  ad::GraphBuilder b;
  auto x = b.node(b.input("x", {3, 1}));
  auto w = b.node(b.input("w", {2, 3}));
  auto g = std::move(b).build(b.sum(b.affine(w, x)));
  EXPECT_EQ(g.total_input_size(), 9u);
  const auto gr = g.gradient({Vec{1, 2, 3}, Vec(6, 0.5)});
  EXPECT_EQ(gr.flat.size(), 9u);
  EXPECT_EQ(gr.offsets, (std::vector<std::size_t>{0, 3, 9}));
  EXPECT_EQ(gr[ad::InputSlot{1}].size(), 6u);
}

TEST(Autodiff, ShapeMismatchIsStructured) {
  ad::GraphBuilder b;
  auto x = b.node(b.input("x", {3, 1}));
  auto y = b.node(b.input("y", {2, 1}));
  try {
    b.add(x, y);
    FAIL() << "expected a shape error";
  } catch (const ad::GraphError& e) {
    EXPECT_EQ(e.kind(), ad::GraphError::Kind::ShapeMismatch);
  }
  ad::GraphBuilder b2;
  auto z = b2.node(b2.input("z", {3, 1}));
  auto g = std::move(b2).build(b2.sum(z));
  try {
    g.evaluate({Vec{1, 2}});
    FAIL() << "expected a binding error";
  } catch (const ad::GraphError& e) {
    EXPECT_EQ(e.kind(), ad::GraphError::Kind::ShapeMismatch);
  }
}

TEST(Autodiff, NonFiniteReportsNode) {
  ad::GraphBuilder b;
  auto x = b.node(b.input("x", {1, 1}));
  auto lg = b.log(x);
  auto g = std::move(b).build(b.sum(lg));
  try {
    g.evaluate({Vec{0.0}});
    FAIL() << "expected a non-finite error";
  } catch (const ad::GraphError& e) {
    EXPECT_EQ(e.kind(), ad::GraphError::Kind::NonFinite);
    EXPECT_EQ(e.node(), static_cast<std::int64_t>(lg.index));
  }
}

TEST(Autodiff, NormalizeOfTinyVectorIsZero) {
  ad::GraphBuilder b;
  auto x = b.node(b.input("x", {3, 1}));
  auto g = std::move(b).build(b.normalize(x));
  const auto t = g.forward({Vec{1e-13, 0, 0}});
  EXPECT_EQ(t.data, (Vec{0, 0, 0}));
  const auto u = g.forward({Vec{3, 0, 4}});
  EXPECT_DOUBLE_EQ(u.data[0], 0.6);
  EXPECT_DOUBLE_EQ(u.data[2], 0.8);
}

// Every primitive against central differences, inputs away from kinks.
TEST(Autodiff, PrimitivesMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  using Build = std::function<ad::NodeId(ad::GraphBuilder&, ad::NodeId, ad::NodeId)>;
  const std::vector<std::pair<const char*, Build>> cases = {
      {"add", [](auto& b, auto x, auto y) { return b.sum(b.add(x, y)); }},
      {"sub", [](auto& b, auto x, auto y) { return b.dot(b.sub(x, y), b.sub(x, y)); }},
      {"mul", [](auto& b, auto x, auto y) { return b.sum(b.mul(x, y)); }},
      {"div", [](auto& b, auto x, auto y) { return b.sum(b.div(x, y)); }},
      {"scale", [](auto& b, auto x, auto) { return b.sum(b.scale(-2.5, b.mul(x, x))); }},
      {"dot", [](auto& b, auto x, auto y) { return b.dot(x, y); }},
      {"norm", [](auto& b, auto x, auto) { return b.norm(x); }},
      {"relu", [](auto& b, auto x, auto y) { return b.dot(b.relu(x), y); }},
      {"exp", [](auto& b, auto x, auto) { return b.sum(b.exp(x)); }},
      {"log", [](auto& b, auto x, auto) { return b.sum(b.log(b.mul(x, x))); }},
      {"sqrt", [](auto& b, auto x, auto) { return b.sum(b.sqrt(b.mul(x, x))); }},
      {"normalize", [](auto& b, auto x, auto y) { return b.dot(b.normalize(x), y); }},
      {"affine",
       [](auto& b, auto x, auto y) {
         auto w = b.reshape(b.vstack(std::vector<ad::NodeId>{x, y}), {2, 4});
         return b.sum(b.relu(b.affine(w, b.reshape(x, {4, 1}))));
       }},
      {"slice", [](auto& b, auto x, auto y) { return b.dot(b.slice(x, 1, {2, 1}), b.slice(y, 0, {2, 1})); }},
  };
  for (const auto& [name, build] : cases) {
    for (int rep = 0; rep < 20; ++rep) {
      ad::GraphBuilder b;
      auto x = b.node(b.input("x", {4, 1}));
      auto y = b.node(b.input("y", {4, 1}));
      auto g = std::move(b).build(build(b, x, y));
      const std::vector<Vec> in = {random_away_from_zero(rng, 4), random_away_from_zero(rng, 4)};
      // Keep relu pre-activations clear of the kink.
      if (std::string(name) == "affine") {
        const auto pre = [&] {
          ad::GraphBuilder c;
          auto cx = c.node(c.input("x", {4, 1}));
          auto cy = c.node(c.input("y", {4, 1}));
          auto w = c.reshape(c.vstack(std::vector<ad::NodeId>{cx, cy}), {2, 4});
          return std::move(c).build(c.affine(w, c.reshape(cx, {4, 1}))).forward(bindings(in));
        }();
        bool near_kink = false;
        for (double v : pre.data) near_kink |= std::abs(v) < 1e-3;
        if (near_kink) continue;
      }
      const auto gr = g.gradient(bindings(in));
      const auto fd = fd_gradient(g, in);
      ASSERT_EQ(gr.flat.size(), fd.size());
      for (std::size_t i = 0; i < fd.size(); ++i) {
        EXPECT_LT(rel_err(gr.flat[i], fd[i]), 1e-4) << name << " entry " << i;
      }
    }
  }
}

TEST(Autodiff, TwoLayerReluNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  int checked = 0;
  for (int rep = 0; rep < 30; ++rep) {
    ad::GraphBuilder b;
    auto x = b.node(b.input("x", {5, 1}));
    auto w1 = b.node(b.input("w1", {8, 5}));
    auto b1 = b.node(b.input("b1", {8, 1}));
    auto w2 = b.node(b.input("w2", {1, 8}));
    auto h = b.relu(b.affine(w1, x, b1));
    auto out = b.affine(w2, h);
    auto g = std::move(b).build(b.mul(out, out));
    std::vector<Vec> in = {Vec(5), Vec(40), Vec(8), Vec(8)};
    for (auto& v : in) {
      for (auto& e : v) e = n01(rng);
    }
    // Skip draws with a pre-activation near the kink.
    bool near = false;
    for (std::size_t r = 0; r < 8; ++r) {
      double s = in[2][r];
      for (std::size_t c = 0; c < 5; ++c) s += in[1][r * 5 + c] * in[0][c];
      near |= std::abs(s) < 1e-3;
    }
    if (near) continue;
    ++checked;
    const auto gr = g.gradient(bindings(in));
    const auto fd = fd_gradient(g, in);
    for (std::size_t i = 0; i < fd.size(); ++i) EXPECT_LT(rel_err(gr.flat[i], fd[i]), 1e-4);
  }
  EXPECT_GT(checked, 20);
}

TEST(Autodiff, GradientIsLinearInTheOutput) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = std::uniform_real_distribution<double>(-3, 3)(rng);
    const double c = std::uniform_real_distribution<double>(-3, 3)(rng);
    auto make = [&](int which) {
      ad::GraphBuilder b;
      auto x = b.node(b.input("x", {3, 1}));
      auto y = b.node(b.input("y", {3, 1}));
      auto f = b.dot(b.exp(x), y);
      auto h = b.norm(b.mul(x, y));
      ad::NodeId out = which == 0 ? f : which == 1 ? h : b.add(b.scale(a, f), b.scale(c, h));
      return std::move(b).build(out);
    };
    const std::vector<Vec> in = {random_away_from_zero(rng, 3), random_away_from_zero(rng, 3)};
    const auto gf = make(0).gradient(bindings(in));
    const auto gh = make(1).gradient(bindings(in));
    const auto gs = make(2).gradient(bindings(in));
    for (std::size_t i = 0; i < gs.flat.size(); ++i) {
      EXPECT_NEAR(gs.flat[i], a * gf.flat[i] + c * gh.flat[i], 1e-12);
    }
  }
}

TEST(Autodiff, EvaluationIsBitwiseRepeatableAcrossThreads) {
  ad::GraphBuilder b;
  auto x = b.node(b.input("x", {16, 1}));
  auto w = b.node(b.input("w", {16, 16}));
  auto g = std::move(b).build(b.norm(b.relu(b.affine(w, b.exp(b.scale(0.1, x))))));
  std::mt19937_64 rng(5);
  std::vector<Vec> in = {Vec(16), Vec(256)};
  for (auto& v : in) {
    for (auto& e : v) e = std::normal_distribution<double>()(rng);
  }
  const auto ref = g.gradient(bindings(in));
  std::vector<ad::GradResult> res(4);
  std::vector<std::thread> pool;
  for (int i = 0; i < 4; ++i) {
    pool.emplace_back([&, i] {
      for (int k = 0; k < 50; ++k) res[i] = g.gradient(bindings(in));
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& r : res) {
    EXPECT_EQ(std::memcmp(&r.value, &ref.value, sizeof(double)), 0);
    EXPECT_EQ(r.flat, ref.flat);
  }
}

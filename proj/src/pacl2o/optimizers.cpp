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

#include "pacl2o/optimizers.hpp"

#include <algorithm>
#include <cmath>

#include "pacl2o/error.hpp"

namespace pacl2o {

AlgoState init_state(std::span<const double> x0, double loss0) {
  AlgoState s;
  s.x_curr.assign(x0.begin(), x0.end());
  s.x_prev = s.x_curr;
  s.t = 1;
  s.loss_prev = loss0;
  return s;
}

void advance(AlgoState& state, Vec x_next, double loss_curr) {
  state.x_prev = std::move(state.x_curr);
  state.x_curr = std::move(x_next);
  state.loss_prev = loss_curr;
  ++state.t;
}

// --- HBF -------------------------------------------------------------------------

HbfCoeffs hbf_optimal_coeffs(double m_lower, double L_upper) {
  if (!(m_lower > 0.0) || !(L_upper >= m_lower)) {
    fail(ErrorCode::InvalidArgument, "hbf_optimal_coeffs: need 0 < m <= L");
  }
  const double sm = std::sqrt(m_lower);
  const double sl = std::sqrt(L_upper);
  const double b1 = 2.0 / (sl + sm);
  const double b2 = (sl - sm) / (sl + sm);
  return HbfCoeffs{b1 * b1, b2 * b2};
}

void hbf_step(AlgoState& state, const LossGrad& at_curr, double beta1,
              double beta2) {
  Vec next(state.x_curr.size());
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] = state.x_curr[i] - beta1 * at_curr.grad[i] +
              beta2 * (state.x_curr[i] - state.x_prev[i]);
  }
  advance(state, std::move(next), at_curr.loss);
}

// --- Adam --------------------------------------------------------------------------

void adam_step(AlgoState& state, const LossGrad& at_curr, const AdamConfig& cfg) {
  const std::size_t d = state.x_curr.size();
  if (state.scratch.size() < 2) state.scratch.assign(2, Vec(d, 0.0));
  Vec& m = state.scratch[0];
  Vec& v = state.scratch[1];
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  Vec next(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double g = at_curr.grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    next[i] = state.x_curr[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
  advance(state, std::move(next), at_curr.loss);
}

// --- layouts -----------------------------------------------------------------------

std::string_view to_string(ArchKind a) { return a == ArchKind::Quad ? "quad" : "nn"; }

HyperLayout::HyperLayout(std::vector<HyperBlock> blocks) : blocks_(std::move(blocks)) {
  for (auto& b : blocks_) {
    b.offset = size_;
    size_ += b.size();
  }
}

const HyperBlock& HyperLayout::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  fail(ErrorCode::InvalidArgument, "no hyperparameter block '" + std::string(name) + "'");
}

bool operator==(const HyperLayout& a, const HyperLayout& b) {
  if (a.blocks_.size() != b.blocks_.size()) return false;
  for (std::size_t i = 0; i < a.blocks_.size(); ++i) {
    const auto& x = a.blocks_[i];
    const auto& y = b.blocks_[i];
    if (x.name != y.name || x.rows != y.rows || x.cols != y.cols) return false;
  }
  return true;
}

namespace {

struct LayerSpec {
  std::size_t out, in;
};

void push_chain(std::vector<HyperBlock>& blocks, const std::string& prefix,
                std::initializer_list<LayerSpec> layers) {
  std::size_t i = 0;
  for (auto [out, in] : layers) {
    blocks.push_back(HyperBlock{prefix + std::to_string(i++), out, in});
  }
}

}  // namespace

HyperLayout quad_arch_layout() {
  std::vector<HyperBlock> blocks;
  push_chain(blocks, "dir", {{30, 3}, {30, 30}, {20, 30}, {10, 20}, {10, 10}, {1, 10}});
  push_chain(blocks, "step", {{30, 4}, {30, 30}, {20, 30}, {10, 20}, {10, 10}, {1, 10}});
  return HyperLayout(std::move(blocks));
}

HyperLayout nn_arch_layout(std::size_t dim) {
  std::vector<HyperBlock> blocks;
  push_chain(blocks, "weight", {{30, 6}, {20, 30}, {10, 20}, {4, 10}});
  push_chain(blocks, "dir", {{20, 4}, {20, 20}, {20, 20}, {1, 20}});
  blocks.push_back(HyperBlock{"g", 1, dim});
  blocks.push_back(HyperBlock{"m", 1, dim});
  return HyperLayout(std::move(blocks));
}

HyperLayout arch_layout(ArchKind arch, std::size_t dim) {
  return arch == ArchKind::Quad ? quad_arch_layout() : nn_arch_layout(dim);
}

Hyperparameters init_hyper(const HyperLayout& layout, HyperInit init, Rng& rng) {
  Hyperparameters h{layout, Vec(layout.size(), 0.0)};
  if (init == HyperInit::Zero) return h;
  for (const auto& b : layout.blocks()) {
    auto first = h.flat.begin() + static_cast<std::ptrdiff_t>(b.offset);
    if (b.name == "g" || b.name == "m") {
      std::fill_n(first, b.size(), 1.0);
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < b.size(); ++i) first[static_cast<std::ptrdiff_t>(i)] = u(rng);
  }
  return h;
}

// --- features ----------------------------------------------------------------------

namespace {

Vec normalized(std::span<const double> v) {
  const double n = norm(v);
  Vec out(v.size(), 0.0);
  if (n >= ad::CompGraph::kNormalizeFloor) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  }
  return out;
}

Vec momentum(const AlgoState& s) {
  Vec dx(s.x_curr.size());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = s.x_curr[i] - s.x_prev[i];
  return dx;
}

}  // namespace

QuadFeatures quad_features(const AlgoState& state, const LossGrad& at_curr) {
  QuadFeatures f;
  const Vec dx = momentum(state);
  f.d1 = normalized(at_curr.grad);
  f.d2 = normalized(dx);
  f.d3.resize(f.d1.size());
  for (std::size_t i = 0; i < f.d3.size(); ++i) f.d3[i] = f.d1[i] * f.d2[i];
  f.s = {std::log1p(norm(at_curr.grad)), std::log1p(norm(dx)),
         std::log1p(at_curr.loss), std::log1p(state.loss_prev)};
  return f;
}

NnFeatures nn_features(const AlgoState& state, const LossGrad& at_curr,
                       const Hyperparameters& hyper) {
  NnFeatures f;
  const Vec dx = momentum(state);
  f.d1 = normalized(at_curr.grad);
  f.d2 = normalized(dx);
  double max_abs = 0.0;
  for (double g : at_curr.grad) max_abs = std::max(max_abs, std::abs(g));
  f.s = {std::log1p(norm(at_curr.grad)),
         std::log1p(norm(dx)),
         at_curr.loss - state.loss_prev,
         dot(f.d1, f.d2),
         max_abs,
         static_cast<double>(state.t)};
  const auto& gb = hyper.layout.block("g");
  const auto& mb = hyper.layout.block("m");
  f.g_d1.resize(f.d1.size());
  f.m_d2.resize(f.d2.size());
  for (std::size_t i = 0; i < f.d1.size(); ++i) {
    f.g_d1[i] = hyper.flat[gb.offset + i] * f.d1[i];
    f.m_d2[i] = hyper.flat[mb.offset + i] * f.d2[i];
  }
  return f;
}

// --- step model -------------------------------------------------------------------

namespace {

struct StepNodes {
  ad::NodeId hyper, x, channels, scalars, inv_sqrt_t;
};

// Inputs occupy slots 0..4 in this order in every step/training graph.
StepNodes declare_step_inputs(ad::GraphBuilder& g, ArchKind arch, std::size_t dim,
                              const HyperLayout& layout) {
  const std::size_t n_channels = arch == ArchKind::Quad ? 3 : 2;
  const std::size_t n_scalars = arch == ArchKind::Quad ? 4 : 6;
  StepNodes n;
  n.hyper = g.node(g.input("hyper", ad::Shape{layout.size(), 1}));
  n.x = g.node(g.input("x", ad::Shape{dim, 1}));
  n.channels = g.node(g.input("channels", ad::Shape{n_channels, dim}));
  n.scalars = g.node(g.input("scalars", ad::Shape{n_scalars, 1}));
  n.inv_sqrt_t = g.node(g.input("inv_sqrt_t", ad::Shape{}));
  return n;
}

ad::NodeId weight(ad::GraphBuilder& g, ad::NodeId hyper, const HyperBlock& b) {
  return g.slice(hyper, b.offset, ad::Shape{b.rows, b.cols});
}

ad::NodeId chain(ad::GraphBuilder& g, ad::NodeId hyper, const HyperLayout& layout,
                 const std::string& prefix, std::size_t n_layers,
                 std::initializer_list<std::size_t> relu_after, ad::NodeId x) {
  for (std::size_t i = 0; i < n_layers; ++i) {
    x = g.affine(weight(g, hyper, layout.block(prefix + std::to_string(i))), x);
    if (std::find(relu_after.begin(), relu_after.end(), i) != relu_after.end()) {
      x = g.relu(x);
    }
  }
  return x;
}

ad::NodeId append_update(ad::GraphBuilder& g, ArchKind arch, std::size_t dim,
                         const HyperLayout& layout, const StepNodes& in) {
  const ad::Shape column{dim, 1};
  if (arch == ArchKind::Quad) {
    ad::NodeId dir = chain(g, in.hyper, layout, "dir", 6, {1, 2, 3}, in.channels);
    ad::NodeId beta = chain(g, in.hyper, layout, "step", 6, {1, 2, 3}, in.scalars);
    return g.add(in.x, g.mul(beta, g.reshape(dir, column)));
  }
  ad::NodeId w = chain(g, in.hyper, layout, "weight", 4, {0, 1, 2}, in.scalars);
  ad::NodeId d1 = g.slice(in.channels, 0, ad::Shape{1, dim});
  ad::NodeId d2 = g.slice(in.channels, dim, ad::Shape{1, dim});
  ad::NodeId gp = weight(g, in.hyper, layout.block("g"));
  ad::NodeId mp = weight(g, in.hyper, layout.block("m"));
  auto wi = [&](std::size_t i) { return g.slice(w, i, ad::Shape{}); };
  const std::array<ad::NodeId, 4> parts = {
      g.mul(wi(0), g.mul(gp, d1)),
      g.mul(wi(1), d1),
      g.mul(wi(2), d2),
      g.mul(wi(3), g.mul(mp, d2)),
  };
  ad::NodeId stacked = g.vstack(parts);
  ad::NodeId dout = chain(g, in.hyper, layout, "dir", 4, {0, 1, 2}, stacked);
  return g.add(in.x, g.mul(in.inv_sqrt_t, g.reshape(dout, column)));
}

}  // namespace

StepModel::StepModel(ArchKind arch, std::size_t dim)
    : arch_(arch), dim_(dim), layout_(arch_layout(arch, dim)) {
  ad::GraphBuilder g;
  StepNodes in = declare_step_inputs(g, arch, dim, layout_);
  ad::NodeId out = append_update(g, arch, dim, layout_, in);
  step_graph_ = std::move(g).build(out);
}

std::shared_ptr<const StepModel> StepModel::make(ArchKind arch, std::size_t dim) {
  if (dim < 1) fail(ErrorCode::InvalidArgument, "StepModel: dim must be >= 1");
  return std::shared_ptr<const StepModel>(new StepModel(arch, dim));
}

void StepModel::check(const Hyperparameters& hyper) const {
  if (!(hyper.layout == layout_) || hyper.flat.size() != layout_.size()) {
    fail(ErrorCode::InvalidArgument,
         std::string("hyperparameters do not match the ") +
             std::string(to_string(arch_)) + " architecture layout");
  }
}

StepModel::Features StepModel::features(const AlgoState& state,
                                        const LossGrad& at_curr) const {
  if (state.x_curr.size() != dim_ || at_curr.grad.size() != dim_) {
    fail(ErrorCode::InvalidArgument, "learned step: state dimension mismatch");
  }
  Features f;
  if (arch_ == ArchKind::Quad) {
    QuadFeatures q = quad_features(state, at_curr);
    f.channels.reserve(3 * dim_);
    f.channels.insert(f.channels.end(), q.d1.begin(), q.d1.end());
    f.channels.insert(f.channels.end(), q.d2.begin(), q.d2.end());
    f.channels.insert(f.channels.end(), q.d3.begin(), q.d3.end());
    f.scalars.assign(q.s.begin(), q.s.end());
  } else {
    const Vec dx = momentum(state);
    Vec d1 = normalized(at_curr.grad);
    Vec d2 = normalized(dx);
    double max_abs = 0.0;
    for (double g : at_curr.grad) max_abs = std::max(max_abs, std::abs(g));
    f.scalars = {std::log1p(norm(at_curr.grad)), std::log1p(norm(dx)),
                 at_curr.loss - state.loss_prev, dot(d1, d2), max_abs,
                 static_cast<double>(state.t)};
    f.channels = std::move(d1);
    f.channels.insert(f.channels.end(), d2.begin(), d2.end());
    f.inv_sqrt_t = 1.0 / std::sqrt(static_cast<double>(state.t));
  }
  return f;
}

Vec StepModel::next_point(const AlgoState& state, const LossGrad& at_curr,
                          const Hyperparameters& hyper) const {
  check(hyper);
  Features f = features(state, at_curr);
  const double ist = f.inv_sqrt_t;
  try {
    ad::Tensor out = step_graph_.forward({hyper.flat, state.x_curr, f.channels,
                                          f.scalars, std::span<const double>(&ist, 1)});
    return std::move(out.data);
  } catch (const ad::GraphError& e) {
    if (e.kind() == ad::GraphError::Kind::NonFinite) {
      throw Error(ErrorCode::Numeric, std::string("learned step: ") + e.what());
    }
    throw;
  }
}

std::shared_ptr<const ad::CompGraph> StepModel::training_graph(
    const Problem& shape_of) const {
  ad::GraphBuilder g;
  StepNodes in = declare_step_inputs(g, arch_, dim_, layout_);
  ad::NodeId x_next = append_update(g, arch_, dim_, layout_, in);
  ad::NodeId loss;
  if (const auto* q = shape_of.quadratic()) {
    auto diag = g.node(g.input("diag", ad::Shape{q->diag.size(), 1}));
    auto rhs = g.node(g.input("rhs", ad::Shape{q->rhs.size(), 1}));
    loss = append_quadratic_loss(g, x_next, diag, rhs);
  } else {
    const auto& r = *shape_of.regression();
    const NetLayout& lay = shape_of.layout();
    const std::size_t K = r.xs.size();
    auto feats = g.node(g.input("features", ad::Shape{lay.degree, K}));
    auto ys = g.node(g.input("targets", ad::Shape{1, K}));
    loss = append_regression_loss(g, x_next, feats, ys, lay, K);
  }
  auto inv_loss = g.node(g.input("inv_loss", ad::Shape{}));
  ad::NodeId ratio = g.mul(loss, inv_loss);
  return std::make_shared<const ad::CompGraph>(std::move(g).build(ratio));
}

ad::GradResult StepModel::training_loss_grad(const ad::CompGraph& graph,
                                             const AlgoState& state,
                                             const LossGrad& at_curr,
                                             const Hyperparameters& hyper,
                                             const Problem& problem) const {
  check(hyper);
  Features f = features(state, at_curr);
  const double ist = f.inv_sqrt_t;
  const double inv_loss = 1.0 / at_curr.loss;
  ad::Bindings b = {hyper.flat, state.x_curr, f.channels, f.scalars,
                    std::span<const double>(&ist, 1)};
  if (const auto* q = problem.quadratic()) {
    b.push_back(q->diag);
    b.push_back(q->rhs);
  } else {
    b.push_back(problem.features());
    b.push_back(problem.regression()->ys);
  }
  b.push_back(std::span<const double>(&inv_loss, 1));
  return graph.gradient(b);
}

void learned_quad_step(AlgoState& state, const LossGrad& at_curr,
                       const Hyperparameters& hyper, const StepModel& model) {
  if (model.arch() != ArchKind::Quad) {
    fail(ErrorCode::InvalidArgument, "learned_quad_step: model is not the quadratic architecture");
  }
  advance(state, model.next_point(state, at_curr, hyper), at_curr.loss);
}

void learned_nn_step(AlgoState& state, const LossGrad& at_curr,
                     const Hyperparameters& hyper, const StepModel& model) {
  if (model.arch() != ArchKind::Nn) {
    fail(ErrorCode::InvalidArgument, "learned_nn_step: model is not the network architecture");
  }
  advance(state, model.next_point(state, at_curr, hyper), at_curr.loss);
}

// --- Algorithm wrappers ---------------------------------------------------------

AlgoState Algorithm::init(std::span<const double> x0, const LossGrad& at_x0) const {
  return init_state(x0, at_x0.loss);
}

void HeavyBall::step(AlgoState& state, const LossGrad& at_curr) const {
  hbf_step(state, at_curr, c_.beta1, c_.beta2);
}

void Adam::step(AlgoState& state, const LossGrad& at_curr) const {
  adam_step(state, at_curr, cfg_);
}

void GradientDescent::step(AlgoState& state, const LossGrad& at_curr) const {
  hbf_step(state, at_curr, step_size_, 0.0);
}

LearnedAlgorithm::LearnedAlgorithm(std::shared_ptr<const StepModel> model,
                                   Hyperparameters hyper, std::string tag)
    : model_(std::move(model)), hyper_(std::move(hyper)), tag_(std::move(tag)) {
  if (!model_) fail(ErrorCode::InvalidArgument, "LearnedAlgorithm: null model");
  if (!(hyper_.layout == model_->layout()) || hyper_.flat.size() != hyper_.layout.size()) {
    fail(ErrorCode::InvalidArgument, "LearnedAlgorithm: hyperparameter layout mismatch");
  }
}

void LearnedAlgorithm::step(AlgoState& state, const LossGrad& at_curr) const {
  advance(state, model_->next_point(state, at_curr, hyper_), at_curr.loss);
}

}  // namespace pacl2o

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

#include "pacl2o/problems.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include "pacl2o/error.hpp"

namespace pacl2o {

std::string_view to_string(Family f) {
  return f == Family::Quadratic ? "quadratic" : "nn-regression";
}

Family family_from_string(std::string_view s) {
  if (s == "quadratic") return Family::Quadratic;
  if (s == "nn-regression") return Family::NnRegression;
  fail(ErrorCode::Config, "unknown problem family '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

void QuadraticConfig::validate() const {
  if (dim < 1) fail(ErrorCode::Config, "quadratic dim must be >= 1");
  if (!(0.0 < m_lo && m_lo <= m_hi && m_hi < L_lo && L_lo <= L_hi)) {
    fail(ErrorCode::Config,
         "curvature ranges must satisfy 0 < m_lo <= m_hi < L_lo <= L_hi");
  }
  if (!(rhs_scale >= 0.0) || !(x0_scale >= 0.0)) {
    fail(ErrorCode::Config, "rhs_scale and x0_scale must be nonnegative");
  }
}

Vec quadratic_diagonal(std::size_t dim, double m, double L) {
  if (dim < 1 || !(m > 0.0) || !(L >= m)) {
    fail(ErrorCode::InvalidArgument, "quadratic_diagonal: need dim >= 1, 0 < m <= L");
  }
  const double sm = std::sqrt(m);
  const double sl = std::sqrt(L);
  Vec diag(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    diag[i] = sm + static_cast<double>(i + 1) * (sl - sm) / static_cast<double>(dim);
  }
  return diag;
}

QuadraticInstance make_quadratic(std::uint64_t id, double m, double L, Vec rhs,
                                 Vec x0) {
  QuadraticInstance inst;
  inst.id = id;
  inst.m = m;
  inst.L = L;
  inst.diag = quadratic_diagonal(rhs.size(), m, L);
  inst.rhs = std::move(rhs);
  inst.minimizer.resize(inst.diag.size());
  for (std::size_t i = 0; i < inst.diag.size(); ++i) {
    inst.minimizer[i] = inst.rhs[i] / inst.diag[i];
  }
  inst.x0 = x0.empty() ? Vec(inst.diag.size(), 0.0) : std::move(x0);
  if (inst.x0.size() != inst.diag.size()) {
    fail(ErrorCode::InvalidArgument, "make_quadratic: x0 has wrong dimension");
  }
  return inst;
}

QuadraticInstance sample_quadratic(const QuadraticConfig& cfg, std::uint64_t id,
                                   Rng& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> um(cfg.m_lo, cfg.m_hi);
  std::uniform_real_distribution<double> uL(cfg.L_lo, cfg.L_hi);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double m = cfg.m_lo == cfg.m_hi ? cfg.m_lo : um(rng);
  const double L = cfg.L_lo == cfg.L_hi ? cfg.L_lo : uL(rng);
  Vec rhs(cfg.dim);
  for (double& v : rhs) v = cfg.rhs_scale * normal(rng);
  Vec x0(cfg.dim, 0.0);
  if (cfg.x0_scale > 0.0) {
    for (double& v : x0) v = cfg.x0_scale * normal(rng);
  }
  return make_quadratic(id, m, L, std::move(rhs), std::move(x0));
}

LossGrad quadratic_loss_grad(const QuadraticInstance& inst,
                             std::span<const double> x) {
  if (x.size() != inst.diag.size()) {
    fail(ErrorCode::InvalidArgument,
         "quadratic_loss_grad: x has dimension " + std::to_string(x.size()) +
             ", expected " + std::to_string(inst.diag.size()));
  }
  LossGrad out;
  out.grad.resize(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = inst.diag[i] * x[i] - inst.rhs[i];
    s += r * r;
    out.grad[i] = inst.diag[i] * r;
  }
  out.loss = 0.5 * s;
  return out;
}

// ---------------------------------------------------------------------------

void RegressionConfig::validate() const {
  if (K < 1) fail(ErrorCode::Config, "regression K must be >= 1");
  if (!(coeff_bound >= 0.0) || !(x_bound >= 0.0) || !(noise_sd >= 0.0)) {
    fail(ErrorCode::Config, "regression bounds must be nonnegative");
  }
  if (layout.degree < 1 || layout.hidden < 1) {
    fail(ErrorCode::Config, "network layout must have positive sizes");
  }
}

RegressionInstance sample_regression(const RegressionConfig& cfg,
                                     std::uint64_t id, Rng& rng) {
  cfg.validate();
  RegressionInstance inst;
  inst.id = id;
  std::uniform_real_distribution<double> uc(-cfg.coeff_bound, cfg.coeff_bound);
  std::uniform_real_distribution<double> ux(-cfg.x_bound, cfg.x_bound);
  std::normal_distribution<double> noise(0.0, 1.0);

  // g(x) = sum_k c_k x^k over k = 0..degree.
  inst.coeffs.resize(cfg.layout.degree + 1);
  for (double& c : inst.coeffs) c = uc(rng);
  inst.xs.resize(cfg.K);
  inst.ys.resize(cfg.K);
  for (std::size_t j = 0; j < cfg.K; ++j) {
    const double x = ux(rng);
    double g = 0.0;
    for (std::size_t k = inst.coeffs.size(); k-- > 0;) g = g * x + inst.coeffs[k];
    inst.xs[j] = x;
    inst.ys[j] = g + cfg.noise_sd * noise(rng);
  }

  // Layer-wise U(-1/sqrt(fan_in), 1/sqrt(fan_in)), weights and biases alike.
  const NetLayout& lay = cfg.layout;
  inst.x0.resize(lay.param_dim());
  std::uniform_real_distribution<double> u1(-1.0 / std::sqrt(double(lay.degree)),
                                            1.0 / std::sqrt(double(lay.degree)));
  std::uniform_real_distribution<double> u2(-1.0 / std::sqrt(double(lay.hidden)),
                                            1.0 / std::sqrt(double(lay.hidden)));
  for (std::size_t i = 0; i < lay.a2_offset(); ++i) inst.x0[i] = u1(rng);
  for (std::size_t i = lay.a2_offset(); i < lay.param_dim(); ++i) inst.x0[i] = u2(rng);
  return inst;
}

Vec regression_features(std::span<const double> xs, std::size_t degree) {
  const std::size_t K = xs.size();
  Vec f(degree * K);
  for (std::size_t j = 0; j < K; ++j) {
    double p = 1.0;
    for (std::size_t r = 0; r < degree; ++r) {
      p *= xs[j];
      f[r * K + j] = p;
    }
  }
  return f;
}

ad::NodeId append_quadratic_loss(ad::GraphBuilder& g, ad::NodeId x,
                                 ad::NodeId diag, ad::NodeId rhs) {
  ad::NodeId r = g.sub(g.mul(diag, x), rhs);
  return g.scale(0.5, g.dot(r, r));
}

ad::NodeId append_regression_loss(ad::GraphBuilder& g, ad::NodeId beta,
                                  ad::NodeId features, ad::NodeId targets,
                                  const NetLayout& lay, std::size_t K) {
  using ad::Shape;
  ad::NodeId a1 = g.slice(beta, lay.a1_offset(), Shape{lay.hidden, lay.degree});
  ad::NodeId b1 = g.slice(beta, lay.b1_offset(), Shape{lay.hidden, 1});
  ad::NodeId a2 = g.slice(beta, lay.a2_offset(), Shape{1, lay.hidden});
  ad::NodeId b2 = g.slice(beta, lay.b2_offset(), Shape{1, 1});
  ad::NodeId hidden = g.relu(g.affine(a1, features, b1));
  ad::NodeId out = g.affine(a2, hidden, b2);
  ad::NodeId r = g.sub(out, targets);
  return g.scale(1.0 / static_cast<double>(K), g.dot(r, r));
}

namespace {

struct RegressionGraphKey {
  std::size_t K, degree, hidden;
  auto operator<=>(const RegressionGraphKey&) const = default;
};

// Inputs: beta (p x 1), features (degree x K), targets (1 x K).
std::shared_ptr<const ad::CompGraph> regression_graph(std::size_t K,
                                                      const NetLayout& lay) {
  static std::mutex mutex;
  static std::map<RegressionGraphKey, std::shared_ptr<const ad::CompGraph>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[RegressionGraphKey{K, lay.degree, lay.hidden}];
  if (!slot) {
    ad::GraphBuilder g;
    auto beta = g.node(g.input("beta", ad::Shape{lay.param_dim(), 1}));
    auto feats = g.node(g.input("features", ad::Shape{lay.degree, K}));
    auto ys = g.node(g.input("targets", ad::Shape{1, K}));
    auto loss = append_regression_loss(g, beta, feats, ys, lay, K);
    slot = std::make_shared<const ad::CompGraph>(std::move(g).build(loss));
  }
  return slot;
}

}  // namespace

LossGrad regression_loss_grad(const RegressionInstance& inst,
                              const NetLayout& layout,
                              std::span<const double> beta) {
  return Problem(inst, layout).loss_grad(beta);
}

Vec regression_predict(const NetLayout& lay, std::span<const double> beta,
                       std::span<const double> xs) {
  if (beta.size() != lay.param_dim()) {
    fail(ErrorCode::InvalidArgument, "regression_predict: wrong parameter dimension");
  }
  Vec out(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    double y = beta[lay.b2_offset()];
    for (std::size_t h = 0; h < lay.hidden; ++h) {
      double pre = beta[lay.b1_offset() + h];
      double p = 1.0;
      for (std::size_t r = 0; r < lay.degree; ++r) {
        p *= xs[j];
        pre += beta[lay.a1_offset() + h * lay.degree + r] * p;
      }
      if (pre > 0.0) y += beta[lay.a2_offset() + h] * pre;
    }
    out[j] = y;
  }
  return out;
}

// ---------------------------------------------------------------------------

Problem::Problem(QuadraticInstance inst) : inst_(std::move(inst)) {}

Problem::Problem(RegressionInstance inst, NetLayout layout)
    : layout_(layout) {
  if (inst.xs.size() != inst.ys.size() || inst.xs.empty()) {
    fail(ErrorCode::InvalidArgument, "regression instance needs K >= 1 matching xs/ys");
  }
  if (inst.x0.empty()) inst.x0.assign(layout.param_dim(), 0.0);
  if (inst.x0.size() != layout.param_dim()) {
    fail(ErrorCode::InvalidArgument, "regression instance x0 does not match layout");
  }
  features_ = regression_features(inst.xs, layout.degree);
  graph_ = regression_graph(inst.xs.size(), layout);
  inst_ = std::move(inst);
}

Family Problem::family() const {
  return std::holds_alternative<QuadraticInstance>(inst_) ? Family::Quadratic
                                                          : Family::NnRegression;
}

std::uint64_t Problem::id() const {
  return std::visit([](const auto& i) { return i.id; }, inst_);
}

std::size_t Problem::dim() const {
  if (const auto* q = quadratic()) return q->diag.size();
  return layout_.param_dim();
}

const Vec& Problem::x0() const {
  return std::visit([](const auto& i) -> const Vec& { return i.x0; }, inst_);
}

const QuadraticInstance* Problem::quadratic() const {
  return std::get_if<QuadraticInstance>(&inst_);
}

const RegressionInstance* Problem::regression() const {
  return std::get_if<RegressionInstance>(&inst_);
}

const Vec* Problem::minimizer() const {
  if (const auto* q = quadratic()) return &q->minimizer;
  return nullptr;
}

LossGrad Problem::loss_grad(std::span<const double> x) const {
  if (const auto* q = quadratic()) return quadratic_loss_grad(*q, x);
  const auto& r = *regression();
  if (x.size() != layout_.param_dim()) {
    fail(ErrorCode::InvalidArgument,
         "regression_loss_grad: beta has dimension " + std::to_string(x.size()) +
             ", expected " + std::to_string(layout_.param_dim()));
  }
  ad::GradResult g = graph_->gradient({x, features_, r.ys});
  auto beta_grad = g[ad::InputSlot{0}];
  return LossGrad{g.value, Vec(beta_grad.begin(), beta_grad.end())};
}

double Problem::loss(std::span<const double> x) const {
  if (const auto* q = quadratic()) return quadratic_loss_grad(*q, x).loss;
  const auto& r = *regression();
  if (x.size() != layout_.param_dim()) {
    fail(ErrorCode::InvalidArgument, "regression loss: wrong parameter dimension");
  }
  return graph_->evaluate({x, features_, r.ys});
}

}  // namespace pacl2o

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

#include "pacl2o/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pacl2o/linalg.hpp"

namespace pacl2o::ad {

namespace {

// W columns of one output row: dst[j] = b + sum_kk w[kk] * x[kk * stride + j],
// accumulated in kk order so the result matches the plain loop bit for bit.
template <std::size_t W>
inline void affine_block(double* __restrict dst, double b, const double* __restrict w,
                         const double* __restrict x, std::size_t k, std::size_t stride) {
  double acc[W];
  for (std::size_t j = 0; j < W; ++j) acc[j] = b;
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double wv = w[kk];
    const double* src = x + kk * stride;
    for (std::size_t j = 0; j < W; ++j) acc[j] += wv * src[j];
  }
  for (std::size_t j = 0; j < W; ++j) dst[j] = acc[j];
}

}  // namespace

std::string to_string(Shape s) {
  return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

GraphError::GraphError(Kind kind, std::int64_t node, const std::string& what)
    : std::runtime_error(what), kind_(kind), node_(node) {}

namespace {

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Dot: return "dot";
    case Op::Norm: return "norm";
    case Op::Sum: return "sum";
    case Op::Relu: return "relu";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Normalize: return "normalize";
    case Op::Affine: return "affine";
    case Op::Slice: return "slice";
    case Op::VStack: return "vstack";
  }
  return "?";
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// GraphBuilder

void GraphBuilder::check(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw GraphError(GraphError::Kind::Invalid, id.index,
                     "node id " + std::to_string(id.index) + " out of range");
  }
}

NodeId GraphBuilder::push(Node n) {
  nodes_.push_back(n);
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Shape GraphBuilder::shape(NodeId id) const {
  check(id);
  return nodes_[id.index].shape;
}

InputSlot GraphBuilder::input(std::string name, Shape shape) {
  if (std::find(input_names_.begin(), input_names_.end(), name) !=
      input_names_.end()) {
    throw GraphError(GraphError::Kind::Invalid, -1,
                     "duplicate input name '" + name + "'");
  }
  InputSlot slot{static_cast<std::uint32_t>(input_names_.size())};
  Node n{Op::Input, shape};
  n.aux = slot.index;
  NodeId id = push(n);
  input_names_.push_back(std::move(name));
  input_shapes_.push_back(shape);
  input_nodes_.push_back(id.index);
  return slot;
}

NodeId GraphBuilder::node(InputSlot slot) const {
  if (slot.index >= input_nodes_.size()) {
    throw GraphError(GraphError::Kind::Invalid, -1, "unknown input slot");
  }
  return NodeId{input_nodes_[slot.index]};
}

NodeId GraphBuilder::constant(std::vector<double> values, Shape shape) {
  if (values.size() != shape.size()) {
    throw GraphError(GraphError::Kind::ShapeMismatch, -1,
                     "constant of " + std::to_string(values.size()) +
                         " values does not fit shape " + to_string(shape));
  }
  Node n{Op::Constant, shape};
  n.aux = constants_.size();
  constants_.insert(constants_.end(), values.begin(), values.end());
  return push(n);
}

NodeId GraphBuilder::scalar(double value) { return constant({value}, Shape{}); }

NodeId GraphBuilder::elementwise(Op op, NodeId a, NodeId b) {
  check(a);
  check(b);
  Shape sa = nodes_[a.index].shape;
  Shape sb = nodes_[b.index].shape;
  Shape out;
  if (sa == sb) {
    out = sa;
  } else if (sb.scalar()) {
    out = sa;
  } else if (sa.scalar()) {
    out = sb;
  } else {
    throw GraphError(GraphError::Kind::ShapeMismatch,
                     static_cast<std::int64_t>(nodes_.size()),
                     std::string(op_name(op)) + ": shapes " + to_string(sa) +
                         " and " + to_string(sb) + " do not broadcast");
  }
  Node n{op, out, a.index, b.index};
  return push(n);
}

NodeId GraphBuilder::add(NodeId a, NodeId b) { return elementwise(Op::Add, a, b); }
NodeId GraphBuilder::sub(NodeId a, NodeId b) { return elementwise(Op::Sub, a, b); }
NodeId GraphBuilder::mul(NodeId a, NodeId b) { return elementwise(Op::Mul, a, b); }
NodeId GraphBuilder::div(NodeId a, NodeId b) { return elementwise(Op::Div, a, b); }

NodeId GraphBuilder::scale(double factor, NodeId x) {
  return mul(scalar(factor), x);
}

NodeId GraphBuilder::dot(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (nodes_[a.index].shape.size() != nodes_[b.index].shape.size()) {
    throw GraphError(GraphError::Kind::ShapeMismatch,
                     static_cast<std::int64_t>(nodes_.size()),
                     "dot: sizes " + to_string(nodes_[a.index].shape) +
                         " and " + to_string(nodes_[b.index].shape));
  }
  return push(Node{Op::Dot, Shape{}, a.index, b.index});
}

NodeId GraphBuilder::unary(Op op, NodeId x) {
  check(x);
  Shape out = nodes_[x.index].shape;
  if (op == Op::Norm || op == Op::Sum) out = Shape{};
  return push(Node{op, out, x.index});
}

NodeId GraphBuilder::norm(NodeId x) { return unary(Op::Norm, x); }
NodeId GraphBuilder::sum(NodeId x) { return unary(Op::Sum, x); }
NodeId GraphBuilder::relu(NodeId x) { return unary(Op::Relu, x); }
NodeId GraphBuilder::exp(NodeId x) { return unary(Op::Exp, x); }
NodeId GraphBuilder::log(NodeId x) { return unary(Op::Log, x); }
NodeId GraphBuilder::sqrt(NodeId x) { return unary(Op::Sqrt, x); }
NodeId GraphBuilder::normalize(NodeId x) { return unary(Op::Normalize, x); }

NodeId GraphBuilder::affine(NodeId w, NodeId x) {
  check(w);
  check(x);
  Shape sw = nodes_[w.index].shape;
  Shape sx = nodes_[x.index].shape;
  if (sw.cols != sx.rows) {
    throw GraphError(GraphError::Kind::ShapeMismatch,
                     static_cast<std::int64_t>(nodes_.size()),
                     "affine: " + to_string(sw) + " times " + to_string(sx));
  }
  return push(Node{Op::Affine, Shape{sw.rows, sx.cols}, w.index, x.index});
}

NodeId GraphBuilder::affine(NodeId w, NodeId x, NodeId bias) {
  check(bias);
  NodeId y = affine(w, x);
  Node& n = nodes_[y.index];
  if (nodes_[bias.index].shape != Shape{n.shape.rows, 1}) {
    throw GraphError(GraphError::Kind::ShapeMismatch, y.index,
                     "affine: bias " + to_string(nodes_[bias.index].shape) +
                         " for output " + to_string(n.shape));
  }
  n.c = bias.index;
  n.has_c = true;
  return y;
}

NodeId GraphBuilder::slice(NodeId x, std::size_t offset, Shape shape) {
  check(x);
  if (offset + shape.size() > nodes_[x.index].shape.size()) {
    throw GraphError(GraphError::Kind::ShapeMismatch,
                     static_cast<std::int64_t>(nodes_.size()),
                     "slice [" + std::to_string(offset) + ", +" +
                         std::to_string(shape.size()) + ") exceeds " +
                         to_string(nodes_[x.index].shape));
  }
  Node n{Op::Slice, shape, x.index};
  n.aux = offset;
  return push(n);
}

NodeId GraphBuilder::reshape(NodeId x, Shape shape) {
  check(x);
  if (shape.size() != nodes_[x.index].shape.size()) {
    throw GraphError(GraphError::Kind::ShapeMismatch,
                     static_cast<std::int64_t>(nodes_.size()),
                     "reshape " + to_string(nodes_[x.index].shape) + " to " +
                         to_string(shape));
  }
  return slice(x, 0, shape);
}

NodeId GraphBuilder::vstack(std::span<const NodeId> parts) {
  if (parts.empty()) {
    throw GraphError(GraphError::Kind::Invalid, -1, "vstack of nothing");
  }
  std::size_t cols = shape(parts.front()).cols;
  std::size_t rows = 0;
  Node n{Op::VStack, Shape{}};
  n.aux = arg_pool_.size();
  n.count = parts.size();
  for (NodeId p : parts) {
    Shape s = shape(p);
    if (s.cols != cols) {
      throw GraphError(GraphError::Kind::ShapeMismatch,
                       static_cast<std::int64_t>(nodes_.size()),
                       "vstack: column mismatch " + to_string(s));
    }
    rows += s.rows;
    arg_pool_.push_back(p.index);
  }
  n.shape = Shape{rows, cols};
  return push(n);
}

CompGraph GraphBuilder::build(NodeId output) && {
  check(output);
  CompGraph g;
  g.nodes_ = std::move(nodes_);
  g.constants_ = std::move(constants_);
  g.arg_pool_ = std::move(arg_pool_);
  g.input_names_ = std::move(input_names_);
  g.input_shapes_ = std::move(input_shapes_);
  g.input_nodes_ = std::move(input_nodes_);
  g.output_ = output.index;

  // Inputs consumed only by Slice are never materialized in forward().
  const auto& nodes = g.nodes_;
  std::vector<char> other_use(nodes.size(), 0);
  other_use[g.output_] = 1;
  for (const auto& n : nodes) {
    switch (n.op) {
      case Op::Input:
      case Op::Constant:
      case Op::Slice:
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Dot:
        other_use[n.a] = other_use[n.b] = 1;
        break;
      case Op::Affine:
        other_use[n.a] = other_use[n.b] = 1;
        if (n.has_c) other_use[n.c] = 1;
        break;
      case Op::VStack:
        for (std::size_t p = 0; p < n.count; ++p) other_use[g.arg_pool_[n.aux + p]] = 1;
        break;
      default:
        other_use[n.a] = 1;
        break;
    }
  }
  g.sliced_only_.assign(nodes.size(), 0);
  for (std::uint32_t id : g.input_nodes_) g.sliced_only_[id] = other_use[id] ? 0 : 1;
  return g;
}

// ---------------------------------------------------------------------------
// GradResult / CompGraph

std::span<const double> GradResult::operator[](InputSlot slot) const {
  return std::span<const double>(flat).subspan(
      offsets.at(slot.index), offsets.at(slot.index + 1) - offsets[slot.index]);
}

const std::string& CompGraph::input_name(InputSlot slot) const {
  return input_names_.at(slot.index);
}

Shape CompGraph::input_shape(InputSlot slot) const {
  return input_shapes_.at(slot.index);
}

InputSlot CompGraph::slot(std::string_view name) const {
  auto it = std::find(input_names_.begin(), input_names_.end(), name);
  if (it == input_names_.end()) {
    throw GraphError(GraphError::Kind::Unbound, -1,
                     "no input named '" + std::string(name) + "'");
  }
  return InputSlot{static_cast<std::uint32_t>(it - input_names_.begin())};
}

std::size_t CompGraph::total_input_size() const {
  std::size_t n = 0;
  for (Shape s : input_shapes_) n += s.size();
  return n;
}

Shape CompGraph::output_shape() const { return nodes_[output_].shape; }

void CompGraph::run_forward(const Bindings& inputs,
                            std::vector<std::vector<double>>& values) const {
  if (inputs.size() != input_names_.size()) {
    throw GraphError(GraphError::Kind::Unbound, -1,
                     "expected " + std::to_string(input_names_.size()) +
                         " input bindings, got " +
                         std::to_string(inputs.size()));
  }
  // Buffers are kept between calls; every node is rewritten below.
  values.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    std::vector<double>& out = values[i];
    // Every op below writes all of `out` (Affine and Normalize fill first).
    out.resize(n.shape.size());
    switch (n.op) {
      case Op::Input: {
        std::span<const double> in = inputs[n.aux];
        if (in.size() != n.shape.size()) {
          throw GraphError(GraphError::Kind::ShapeMismatch,
                           static_cast<std::int64_t>(i),
                           "input '" + input_names_[n.aux] + "' expects " +
                               to_string(n.shape) + ", bound " +
                               std::to_string(in.size()) + " values");
        }
        if (sliced_only_[i]) {
          out.clear();
          if (!all_finite(in)) {
            throw GraphError(GraphError::Kind::NonFinite, static_cast<std::int64_t>(i),
                             "non-finite value in input '" + input_names_[n.aux] + "'");
          }
          break;
        }
        std::copy(in.begin(), in.end(), out.begin());
        break;
      }
      case Op::Constant:
        std::copy_n(constants_.begin() + static_cast<std::ptrdiff_t>(n.aux),
                    out.size(), out.begin());
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div: {
        const auto& a = values[n.a];
        const auto& b = values[n.b];
        const bool ba = a.size() == 1;
        const bool bb = b.size() == 1;
        for (std::size_t j = 0; j < out.size(); ++j) {
          double x = a[ba ? 0 : j];
          double y = b[bb ? 0 : j];
          switch (n.op) {
            case Op::Add: out[j] = x + y; break;
            case Op::Sub: out[j] = x - y; break;
            case Op::Mul: out[j] = x * y; break;
            default: out[j] = x / y; break;
          }
        }
        break;
      }
      case Op::Dot: {
        const auto& a = values[n.a];
        const auto& b = values[n.b];
        out[0] = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
        break;
      }
      case Op::Norm:
        out[0] = l2(values[n.a]);
        break;
      case Op::Sum: {
        const auto& a = values[n.a];
        out[0] = std::accumulate(a.begin(), a.end(), 0.0);
        break;
      }
      case Op::Relu: {
        const auto& a = values[n.a];
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = a[j] > 0.0 ? a[j] : 0.0;
        break;
      }
      case Op::Exp: {
        const auto& a = values[n.a];
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::exp(a[j]);
        break;
      }
      case Op::Log: {
        const auto& a = values[n.a];
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::log(a[j]);
        break;
      }
      case Op::Sqrt: {
        const auto& a = values[n.a];
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::sqrt(a[j]);
        break;
      }
      case Op::Normalize: {
        const auto& a = values[n.a];
        double len = l2(a);
        if (len >= kNormalizeFloor) {
          for (std::size_t j = 0; j < out.size(); ++j) out[j] = a[j] / len;
        } else {
          std::fill(out.begin(), out.end(), 0.0);
        }
        break;
      }
      case Op::Affine: {
        const double* __restrict w = values[n.a].data();
        const double* __restrict x = values[n.b].data();
        const double* bias = n.has_c ? values[n.c].data() : nullptr;
        const std::size_t r = n.shape.rows;
        const std::size_t c = n.shape.cols;
        const std::size_t k = nodes_[n.a].shape.cols;
        for (std::size_t row = 0; row < r; ++row) {
          double* __restrict dst = out.data() + row * c;
          const double* wr = w + row * k;
          const double b0 = bias ? bias[row] : 0.0;
          std::size_t col = 0;
          for (; col + 8 <= c; col += 8) affine_block<8>(dst + col, b0, wr, x + col, k, c);
          for (; col + 4 <= c; col += 4) affine_block<4>(dst + col, b0, wr, x + col, k, c);
          for (; col < c; ++col) affine_block<1>(dst + col, b0, wr, x + col, k, c);
        }
        break;
      }
      case Op::Slice: {
        const Node& src = nodes_[n.a];
        const double* a = sliced_only_[n.a] ? inputs[src.aux].data() : values[n.a].data();
        std::copy_n(a + n.aux, out.size(), out.begin());
        break;
      }
      case Op::VStack: {
        auto dst = out.begin();
        for (std::size_t p = 0; p < n.count; ++p) {
          const auto& part = values[arg_pool_[n.aux + p]];
          dst = std::copy(part.begin(), part.end(), dst);
        }
        break;
      }
    }
    if (!all_finite(out)) {
      throw GraphError(GraphError::Kind::NonFinite,
                       static_cast<std::int64_t>(i),
                       std::string("non-finite value at node ") +
                           std::to_string(i) + " (" + op_name(n.op) + ")");
    }
  }
}

double CompGraph::evaluate(const Bindings& inputs) const {
  if (!output_shape().scalar()) {
    throw GraphError(GraphError::Kind::NotScalar, output_,
                     "evaluate: output is " + to_string(output_shape()));
  }
  thread_local std::vector<std::vector<double>> values;
  run_forward(inputs, values);
  return values[output_][0];
}

Tensor CompGraph::forward(const Bindings& inputs) const {
  thread_local std::vector<std::vector<double>> values;
  run_forward(inputs, values);
  return Tensor{output_shape(), values[output_]};
}

GradResult CompGraph::gradient(const Bindings& inputs) const {
  if (!output_shape().scalar()) {
    throw GraphError(GraphError::Kind::NotScalar, output_,
                     "gradient: output is " + to_string(output_shape()));
  }
  std::vector<std::vector<double>> values;
  run_forward(inputs, values);

  std::vector<std::vector<double>> adj(nodes_.size());
  for (std::size_t i = 0; i <= output_; ++i) adj[i].assign(nodes_[i].shape.size(), 0.0);
  adj[output_][0] = 1.0;

  for (std::size_t ii = output_ + 1; ii-- > 0;) {
    const Node& n = nodes_[ii];
    const auto& g = adj[ii];
    const auto& y = values[ii];
    switch (n.op) {
      case Op::Input:
      case Op::Constant:
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div: {
        const auto& a = values[n.a];
        const auto& b = values[n.b];
        auto& ga = adj[n.a];
        auto& gb = adj[n.b];
        const bool ba = a.size() == 1;
        const bool bb = b.size() == 1;
        for (std::size_t j = 0; j < g.size(); ++j) {
          const double x = a[ba ? 0 : j];
          const double z = b[bb ? 0 : j];
          double da = 0.0;
          double db = 0.0;
          switch (n.op) {
            case Op::Add: da = g[j]; db = g[j]; break;
            case Op::Sub: da = g[j]; db = -g[j]; break;
            case Op::Mul: da = g[j] * z; db = g[j] * x; break;
            default: da = g[j] / z; db = -g[j] * x / (z * z); break;
          }
          ga[ba ? 0 : j] += da;
          gb[bb ? 0 : j] += db;
        }
        break;
      }
      case Op::Dot: {
        const auto& a = values[n.a];
        const auto& b = values[n.b];
        auto& ga = adj[n.a];
        auto& gb = adj[n.b];
        for (std::size_t j = 0; j < a.size(); ++j) {
          ga[j] += g[0] * b[j];
          gb[j] += g[0] * a[j];
        }
        break;
      }
      case Op::Norm: {
        if (y[0] == 0.0) break;
        const auto& a = values[n.a];
        auto& ga = adj[n.a];
        for (std::size_t j = 0; j < a.size(); ++j) ga[j] += g[0] * a[j] / y[0];
        break;
      }
      case Op::Sum: {
        auto& ga = adj[n.a];
        for (double& v : ga) v += g[0];
        break;
      }
      case Op::Relu: {
        const auto& a = values[n.a];
        auto& ga = adj[n.a];
        for (std::size_t j = 0; j < a.size(); ++j) {
          if (a[j] > 0.0) ga[j] += g[j];
        }
        break;
      }
      case Op::Exp: {
        auto& ga = adj[n.a];
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * y[j];
        break;
      }
      case Op::Log: {
        const auto& a = values[n.a];
        auto& ga = adj[n.a];
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] / a[j];
        break;
      }
      case Op::Sqrt: {
        auto& ga = adj[n.a];
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] / (2.0 * y[j]);
        break;
      }
      case Op::Normalize: {
        const auto& a = values[n.a];
        const double len = l2(a);
        if (len < kNormalizeFloor) break;
        double proj = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) proj += y[j] * g[j];
        auto& ga = adj[n.a];
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += (g[j] - y[j] * proj) / len;
        break;
      }
      case Op::Affine: {
        const auto& w = values[n.a];
        const auto& x = values[n.b];
        auto& gw = adj[n.a];
        auto& gx = adj[n.b];
        const std::size_t r = n.shape.rows;
        const std::size_t c = n.shape.cols;
        const std::size_t k = nodes_[n.a].shape.cols;
        for (std::size_t row = 0; row < r; ++row) {
          const double* grow = g.data() + row * c;
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double* xrow = x.data() + kk * c;
            double acc = 0.0;
            for (std::size_t col = 0; col < c; ++col) acc += grow[col] * xrow[col];
            gw[row * k + kk] += acc;
            const double wv = w[row * k + kk];
            if (wv == 0.0) continue;
            double* gxrow = gx.data() + kk * c;
            for (std::size_t col = 0; col < c; ++col) gxrow[col] += wv * grow[col];
          }
          if (n.has_c) {
            adj[n.c][row] += std::accumulate(grow, grow + c, 0.0);
          }
        }
        break;
      }
      case Op::Slice: {
        auto& ga = adj[n.a];
        for (std::size_t j = 0; j < g.size(); ++j) ga[n.aux + j] += g[j];
        break;
      }
      case Op::VStack: {
        std::size_t pos = 0;
        for (std::size_t p = 0; p < n.count; ++p) {
          auto& gp = adj[arg_pool_[n.aux + p]];
          for (double& v : gp) v += g[pos++];
        }
        break;
      }
    }
  }

  GradResult result;
  result.value = values[output_][0];
  result.offsets.reserve(input_nodes_.size() + 1);
  result.offsets.push_back(0);
  result.flat.reserve(total_input_size());
  for (std::size_t s = 0; s < input_nodes_.size(); ++s) {
    const std::uint32_t node = input_nodes_[s];
    if (node <= output_) {
      result.flat.insert(result.flat.end(), adj[node].begin(), adj[node].end());
    } else {
      result.flat.insert(result.flat.end(), input_shapes_[s].size(), 0.0);
    }
    result.offsets.push_back(result.flat.size());
  }
  return result;
}

}  // namespace pacl2o::ad

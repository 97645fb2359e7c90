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

// Reverse-mode differentiation over small dense matrices.
//
// A graph is recorded once with GraphBuilder and frozen into a CompGraph.
// Every node carries a (rows x cols) row-major value; inputs are the leaves
// and the only quantities gradients are taken with respect to. Constants are
// baked into the graph. A frozen graph is immutable and may be evaluated from
// several threads at once: each call allocates its own workspace.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pacl2o::ad {

struct Shape {
  std::size_t rows = 1;
  std::size_t cols = 1;

  constexpr std::size_t size() const { return rows * cols; }
  constexpr bool scalar() const { return rows == 1 && cols == 1; }
  friend constexpr bool operator==(Shape, Shape) = default;
};

std::string to_string(Shape s);

struct NodeId {
  std::uint32_t index = 0;
  friend constexpr bool operator==(NodeId, NodeId) = default;
};

// Slot of an input leaf, in declaration order.
struct InputSlot {
  std::uint32_t index = 0;
};

class GraphError : public std::runtime_error {
 public:
  enum class Kind { ShapeMismatch, NonFinite, Unbound, NotScalar, Invalid };

  GraphError(Kind kind, std::int64_t node, const std::string& what);

  Kind kind() const { return kind_; }
  // Offending node, or -1 when the error is not tied to a node.
  std::int64_t node() const { return node_; }

 private:
  Kind kind_;
  std::int64_t node_;
};

// A dense value produced by forward().
struct Tensor {
  Shape shape;
  std::vector<double> data;
};

// Input values, indexed by InputSlot.
using Bindings = std::vector<std::span<const double>>;

enum class Op : std::uint8_t {
  Input,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Dot,
  Norm,
  Sum,
  Relu,
  Exp,
  Log,
  Sqrt,
  Normalize,
  Affine,
  Slice,
  VStack,
};

class CompGraph;

class GraphBuilder {
 public:
  InputSlot input(std::string name, Shape shape);
  NodeId node(InputSlot slot) const;

  NodeId constant(std::vector<double> values, Shape shape);
  NodeId scalar(double value);

  // Elementwise; either operand may be 1x1 and is then broadcast.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId scale(double factor, NodeId x);

  NodeId dot(NodeId a, NodeId b);
  NodeId norm(NodeId x);
  NodeId sum(NodeId x);

  // relu'(0) := 0.
  NodeId relu(NodeId x);
  NodeId exp(NodeId x);
  NodeId log(NodeId x);
  NodeId sqrt(NodeId x);

  // x / ||x||, or zero when ||x|| < kNormalizeFloor.
  NodeId normalize(NodeId x);

  // W (r x k) * X (k x c) + b (r x 1, broadcast over columns).
  NodeId affine(NodeId w, NodeId x);
  NodeId affine(NodeId w, NodeId x, NodeId bias);

  // Contiguous range of the row-major storage, viewed with a new shape.
  NodeId slice(NodeId x, std::size_t offset, Shape shape);
  NodeId reshape(NodeId x, Shape shape);
  NodeId vstack(std::span<const NodeId> parts);

  Shape shape(NodeId id) const;

  CompGraph build(NodeId output) &&;

 private:
  friend class CompGraph;

  struct Node {
    Op op;
    Shape shape;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint32_t c = 0;
    bool has_c = false;
    std::size_t aux = 0;  // slot, constant offset, slice offset or arg-pool start
    std::size_t count = 0;
  };

  NodeId push(Node n);
  NodeId elementwise(Op op, NodeId a, NodeId b);
  NodeId unary(Op op, NodeId x);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<double> constants_;
  std::vector<std::uint32_t> arg_pool_;
  std::vector<std::string> input_names_;
  std::vector<Shape> input_shapes_;
  std::vector<std::uint32_t> input_nodes_;
};

struct GradResult {
  double value = 0.0;
  // Concatenation of the per-input gradients in slot order.
  std::vector<double> flat;
  std::vector<std::size_t> offsets;  // size = n_inputs + 1

  std::span<const double> operator[](InputSlot slot) const;
};

class CompGraph {
 public:
  static constexpr double kNormalizeFloor = 1e-12;

  std::size_t num_inputs() const { return input_names_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }
  const std::string& input_name(InputSlot slot) const;
  Shape input_shape(InputSlot slot) const;
  InputSlot slot(std::string_view name) const;
  std::size_t total_input_size() const;
  Shape output_shape() const;

  // Scalar output only.
  double evaluate(const Bindings& inputs) const;
  // Any output shape.
  Tensor forward(const Bindings& inputs) const;
  // Scalar output only.
  GradResult gradient(const Bindings& inputs) const;

 private:
  friend class GraphBuilder;
  using Node = GraphBuilder::Node;

  void run_forward(const Bindings& inputs,
                   std::vector<std::vector<double>>& values) const;

  std::vector<Node> nodes_;
  std::vector<double> constants_;
  std::vector<std::uint32_t> arg_pool_;
  std::vector<std::string> input_names_;
  std::vector<Shape> input_shapes_;
  std::vector<std::uint32_t> input_nodes_;
  std::vector<char> sliced_only_;  // per node: an input read only through Slice
  std::uint32_t output_ = 0;
};

}  // namespace pacl2o::ad

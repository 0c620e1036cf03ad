// Copyright 2026 The ncpdrive Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ncpdrive/tensor.hpp"

// Reverse-mode differentiation over a define-then-run computation graph.
//
// A Graph records nodes in creation order (which is a topological order).
// forward() evaluates every node from the fed placeholders and the current
// parameter values; backward() walks the nodes the loss depends on in reverse
// and accumulates gradients. Graphs are rebuilt for every training step.
namespace ncpdrive::inline NCPD_PRECISION_NS::ad {

class Graph;

/// Handle to a node of a Graph.
class Var
{
public:
  Var() = default;

  Graph *graph() const noexcept
  {
    return graph_;
  }
  std::size_t id() const noexcept
  {
    return id_;
  }
  bool valid() const noexcept
  {
    return graph_ != nullptr;
  }

  /// Value computed by the last forward pass.
  const Tensor &value() const;
  const Tensor &grad() const;

private:
  friend class Graph;
  Var(Graph *graph, std::size_t id)
    : graph_(graph)
    , id_(id)
  {}

  Graph      *graph_ = nullptr;
  std::size_t id_    = 0;
};

enum class NodeKind
{
  kConstant,
  kPlaceholder,
  kParameter,
  kOp,
};

using Inputs     = std::span<const Tensor *const>;
using InputGrads = std::span<Tensor *const>;

/// Computes a node value from its parents' values.
using ForwardFn = std::function<Tensor(Inputs)>;

/// Accumulates d(loss)/d(input) into every non-null entry of `input_grads`,
/// given d(loss)/d(output).
using BackwardFn = std::function<void(const Tensor &grad_output, Inputs inputs,
                                      const Tensor &output, InputGrads input_grads)>;

struct Node
{
  NodeKind                 kind = NodeKind::kOp;
  std::string              op;
  std::string              name;
  std::vector<std::size_t> parents;
  Tensor                   value;
  Tensor                   grad;
  ForwardFn                forward;
  BackwardFn               backward;
  bool                     needs_grad = false;
  bool                     evaluated  = false;
};

using Feeds = std::map<std::string, Tensor>;

class Graph
{
public:
  Graph()                         = default;
  Graph(const Graph &)            = delete;
  Graph &operator=(const Graph &) = delete;

  Var constant(Tensor value, std::string name = {});
  Var placeholder(std::string name, bool requires_grad = false);
  Var parameter(std::string name, Tensor value);

  /// Records an operation node. Shapes are checked when forward() runs.
  Var apply(std::string op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward);

  /// Evaluates every node and returns the value of `output`.
  /// Throws Error for a missing feed and ShapeError for inconsistent shapes.
  const Tensor &forward(const Feeds &feeds, Var output);
  const Tensor &forward(Var output)
  {
    return forward(Feeds{}, output);
  }

  /// Populates gradients of every node the scalar `loss` depends on.
  void backward(Var loss);

  const Tensor &value(Var v) const;
  const Tensor &grad(Var v) const;

  /// Overwrites a parameter's value; takes effect at the next forward().
  void set_value(Var parameter, Tensor value);
  /// In-place access to a parameter's value.
  Tensor &parameter_value(Var parameter);

  const Node &node(Var v) const;
  std::size_t size() const noexcept
  {
    return nodes_.size();
  }

  std::vector<Var> parameters() const;
  Var              parameter_by_name(const std::string &name) const;

  /// Gradients of all parameters by name. Valid after backward().
  std::map<std::string, Tensor> parameter_grads() const;

private:
  Node       &node_mut(Var v);
  std::size_t add_node(Node node);

  std::vector<Node>                  nodes_;
  std::map<std::string, std::size_t> placeholders_;
  std::map<std::string, std::size_t> parameters_;
  bool                               backward_ready_ = false;
};

// Elementwise arithmetic on equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var x, Real factor);
Var add_scalar(Var x, Real offset);
Var square(Var x);

inline Var operator+(Var a, Var b)
{
  return add(a, b);
}
inline Var operator-(Var a, Var b)
{
  return sub(a, b);
}
inline Var operator*(Var a, Var b)
{
  return mul(a, b);
}
inline Var operator/(Var a, Var b)
{
  return div(a, b);
}

Var relu(Var x);
Var sigmoid(Var x);
/// Inverted dropout: each element is kept with probability 1 - rate and
/// scaled by 1 / (1 - rate). The mask is a function of `seed` alone, so
/// repeated forward passes see the same mask.
Var dropout(Var x, Real rate, std::uint64_t seed);
Var exp(Var x);

Var matmul(Var a, Var b);

/// x[..., F] + bias[F] (bias repeated over all leading positions).
Var add_bias(Var x, Var bias);
/// x[..., F] * row[F].
Var mul_row(Var x, Var row);

Var conv2d(Var input, Var kernels, std::size_t stride);
/// relu(conv2d(input, kernels) + bias) as one node (saves two activation-
/// sized intermediates). The output being exactly zero selects the zero
/// subgradient, as in relu().
Var conv2d_bias_relu(Var input, Var kernels, Var bias, std::size_t stride);

Var sum(Var x);
Var mean(Var x);

/// One extent may be 0, meaning "whatever the element count requires".
Var reshape(Var x, Shape shape);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
Var concat(std::vector<Var> parts, std::size_t axis);
/// Rows of x[R, ...] at `rows` (rows may repeat).
Var gather_rows(Var x, std::vector<std::size_t> rows);

/// softmax over a rank-1 tensor.
Var softmax(Var x);

/// out[b, p, n] = logistic((pre[b, p] - mu[p, n]) * sigma[p, n]).
Var pairwise_sigmoid(Var pre, Var mu, Var sigma);
/// out[b, n] = sum_p act[b, p, n] * coef[p, n].
Var contract_pre(Var act, Var coef);

/// mean((pred - target)^2).
Var mse(Var pred, Var target);

struct GradCheckReport
{
  std::map<std::string, double> max_relative_error;
  double                        worst = 0.0;
  std::string                   worst_parameter;
  std::size_t                   checked_elements = 0;
};

struct GradCheckOptions
{
  double      eps = 1e-5;
  /// Denominator floor: errors are |a - n| / max(|a|, |n|, floor).
  double      floor = 1e-6;
  /// Elements checked per parameter tensor; 0 checks every element.
  std::size_t max_elements = 0;
  std::uint64_t seed       = 7;
};

/// Compares backward() against central finite differences
/// (f(theta + eps) - f(theta - eps)) / (2 eps) for every parameter.
GradCheckReport gradcheck(Graph &graph, Var loss, const Feeds &feeds,
                          const GradCheckOptions &options = {});

}  // namespace ncpdrive::ad

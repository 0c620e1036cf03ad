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

#include "ncpdrive/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ncpdrive/ops.hpp"
#include "ncpdrive/rng.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS::ad {

namespace {

void accumulate(Tensor *dst, const Tensor &src)
{
  if (dst == nullptr)
  {
    return;
  }
  auto out = dst->values();
  auto in  = src.values();
  for (std::size_t i = 0; i < out.size(); ++i)
  {
    out[i] += in[i];
  }
}

Graph &same_graph(Var a, Var b)
{
  if (!a.valid() || a.graph() != b.graph())
  {
    throw Error("operands belong to different graphs");
  }
  return *a.graph();
}

Graph &graph_of(Var x)
{
  if (!x.valid())
  {
    throw Error("operation on an unbound Var");
  }
  return *x.graph();
}

std::size_t leading(const Tensor &x, std::size_t features, const char *what)
{
  if (x.rank() == 0 || x.shape().back() != features)
  {
    throw ShapeError(std::string(what) + ": trailing extent of " + shape_string(x.shape()) +
                     " does not match " + std::to_string(features));
  }
  return x.size() / features;
}

}  // namespace

// ---------------------------------------------------------------------------
// Var / Graph

const Tensor &Var::value() const
{
  return graph_of(*this).value(*this);
}

const Tensor &Var::grad() const
{
  return graph_of(*this).grad(*this);
}

std::size_t Graph::add_node(Node node)
{
  nodes_.push_back(std::move(node));
  backward_ready_ = false;
  return nodes_.size() - 1;
}

Var Graph::constant(Tensor value, std::string name)
{
  Node node;
  node.kind      = NodeKind::kConstant;
  node.op        = "constant";
  node.name      = std::move(name);
  node.value     = std::move(value);
  node.evaluated = true;
  return {this, add_node(std::move(node))};
}

Var Graph::placeholder(std::string name, bool requires_grad)
{
  if (placeholders_.count(name) != 0)
  {
    throw Error("duplicate placeholder '" + name + "'");
  }
  Node node;
  node.kind       = NodeKind::kPlaceholder;
  node.op         = "placeholder";
  node.name       = name;
  node.needs_grad = requires_grad;
  std::size_t id  = add_node(std::move(node));
  placeholders_.emplace(std::move(name), id);
  return {this, id};
}

Var Graph::parameter(std::string name, Tensor value)
{
  if (parameters_.count(name) != 0)
  {
    throw Error("duplicate parameter '" + name + "'");
  }
  Node node;
  node.kind       = NodeKind::kParameter;
  node.op         = "parameter";
  node.name       = name;
  node.value      = std::move(value);
  node.needs_grad = true;
  node.evaluated  = true;
  std::size_t id  = add_node(std::move(node));
  parameters_.emplace(std::move(name), id);
  return {this, id};
}

Var Graph::apply(std::string op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward)
{
  Node node;
  node.kind     = NodeKind::kOp;
  node.op       = std::move(op);
  node.forward  = std::move(forward);
  node.backward = std::move(backward);
  for (Var in : inputs)
  {
    if (in.graph() != this)
    {
      throw Error("input of '" + node.op + "' belongs to another graph");
    }
    node.parents.push_back(in.id());
    node.needs_grad = node.needs_grad || nodes_[in.id()].needs_grad;
  }
  return {this, add_node(std::move(node))};
}

const Node &Graph::node(Var v) const
{
  if (v.graph() != this || v.id() >= nodes_.size())
  {
    throw Error("Var does not belong to this graph");
  }
  return nodes_[v.id()];
}

Node &Graph::node_mut(Var v)
{
  if (v.graph() != this || v.id() >= nodes_.size())
  {
    throw Error("Var does not belong to this graph");
  }
  return nodes_[v.id()];
}

const Tensor &Graph::forward(const Feeds &feeds, Var output)
{
  Node const &target = node(output);
  (void)target;

  std::vector<char> needed(nodes_.size(), 0);
  needed[output.id()] = 1;
  for (std::size_t i = output.id() + 1; i-- > 0;)
  {
    if (needed[i] != 0)
    {
      for (auto p : nodes_[i].parents)
      {
        needed[p] = 1;
      }
    }
  }

  std::vector<const Tensor *> inputs;
  for (std::size_t i = 0; i <= output.id(); ++i)
  {
    if (needed[i] == 0)
    {
      continue;
    }
    Node &n = nodes_[i];
    switch (n.kind)
    {
    case NodeKind::kConstant:
    case NodeKind::kParameter:
      break;
    case NodeKind::kPlaceholder:
    {
      auto it = feeds.find(n.name);
      if (it == feeds.end())
      {
        throw Error("missing feed for placeholder '" + n.name + "'");
      }
      n.value     = it->second;
      n.evaluated = true;
      break;
    }
    case NodeKind::kOp:
    {
      inputs.clear();
      for (auto p : n.parents)
      {
        inputs.push_back(&nodes_[p].value);
      }
      try
      {
        n.value = n.forward(inputs);
      }
      catch (const ShapeError &e)
      {
        throw ShapeError(n.op + ": " + e.what());
      }
      n.evaluated = true;
      break;
    }
    }
  }
  backward_ready_ = true;
  return nodes_[output.id()].value;
}

void Graph::backward(Var loss)
{
  Node const &root = node(loss);
  if (!backward_ready_ || !root.evaluated)
  {
    throw Error("backward() needs a completed forward() pass");
  }
  if (root.value.size() != 1)
  {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }

  std::vector<char> reach(nodes_.size(), 0);
  reach[loss.id()] = 1;
  for (std::size_t i = loss.id() + 1; i-- > 0;)
  {
    if (reach[i] != 0)
    {
      for (auto p : nodes_[i].parents)
      {
        reach[p] = 1;
      }
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
  {
    Node &n = nodes_[i];
    if (reach[i] != 0 && n.needs_grad)
    {
      n.grad = Tensor(n.value.shape());
    }
    else
    {
      n.grad = Tensor();
    }
  }
  if (!nodes_[loss.id()].needs_grad)
  {
    return;
  }
  nodes_[loss.id()].grad.fill(Real(1));

  std::vector<const Tensor *> inputs;
  std::vector<Tensor *>       input_grads;
  for (std::size_t i = loss.id() + 1; i-- > 0;)
  {
    Node &n = nodes_[i];
    if (reach[i] == 0 || !n.needs_grad || n.kind != NodeKind::kOp)
    {
      continue;
    }
    inputs.clear();
    input_grads.clear();
    for (auto p : n.parents)
    {
      inputs.push_back(&nodes_[p].value);
      input_grads.push_back(nodes_[p].needs_grad ? &nodes_[p].grad : nullptr);
    }
    n.backward(n.grad, inputs, n.value, input_grads);
    // Intermediate gradients are not needed once propagated.
    if (i != loss.id())
    {
      n.grad = Tensor();
    }
  }
}

const Tensor &Graph::value(Var v) const
{
  Node const &n = node(v);
  if (!n.evaluated)
  {
    throw Error("node '" + n.op + "' has not been evaluated");
  }
  return n.value;
}

const Tensor &Graph::grad(Var v) const
{
  Node const &n = node(v);
  if (n.grad.empty())
  {
    throw Error("no gradient stored for node '" + n.op + (n.name.empty() ? "" : " " + n.name) + "'");
  }
  return n.grad;
}

void Graph::set_value(Var parameter, Tensor value)
{
  parameter_value(parameter) = std::move(value);
}

Tensor &Graph::parameter_value(Var parameter)
{
  Node &n = node_mut(parameter);
  if (n.kind != NodeKind::kParameter)
  {
    throw Error("only parameter values can be overwritten");
  }
  backward_ready_ = false;
  return n.value;
}

std::vector<Var> Graph::parameters() const
{
  std::vector<Var> out;
  out.reserve(parameters_.size());
  for (const auto &[name, id] : parameters_)
  {
    out.push_back(Var(const_cast<Graph *>(this), id));
  }
  return out;
}

Var Graph::parameter_by_name(const std::string &name) const
{
  auto it = parameters_.find(name);
  if (it == parameters_.end())
  {
    throw Error("unknown parameter '" + name + "'");
  }
  return {const_cast<Graph *>(this), it->second};
}

std::map<std::string, Tensor> Graph::parameter_grads() const
{
  std::map<std::string, Tensor> out;
  for (const auto &[name, id] : parameters_)
  {
    Node const &n = nodes_[id];
    out.emplace(name, n.grad.empty() ? Tensor(n.value.shape()) : n.grad);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b)
{
  return same_graph(a, b).apply(
      "add", {a, b}, [](Inputs in) { return ncpdrive::add(*in[0], *in[1]); },
      [](const Tensor &g, Inputs, const Tensor &, InputGrads dx) {
        accumulate(dx[0], g);
        accumulate(dx[1], g);
      });
}

Var sub(Var a, Var b)
{
  return same_graph(a, b).apply(
      "sub", {a, b}, [](Inputs in) { return ncpdrive::sub(*in[0], *in[1]); },
      [](const Tensor &g, Inputs, const Tensor &, InputGrads dx) {
        accumulate(dx[0], g);
        if (dx[1] != nullptr)
        {
          accumulate(dx[1], ncpdrive::scale(g, Real(-1)));
        }
      });
}

Var mul(Var a, Var b)
{
  return same_graph(a, b).apply(
      "mul", {a, b}, [](Inputs in) { return ncpdrive::mul(*in[0], *in[1]); },
      [](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        if (dx[0] != nullptr)
        {
          accumulate(dx[0], ncpdrive::mul(g, *in[1]));
        }
        if (dx[1] != nullptr)
        {
          accumulate(dx[1], ncpdrive::mul(g, *in[0]));
        }
      });
}

Var div(Var a, Var b)
{
  return same_graph(a, b).apply(
      "div", {a, b}, [](Inputs in) { return ncpdrive::div(*in[0], *in[1]); },
      [](const Tensor &g, Inputs in, const Tensor &out, InputGrads dx) {
        if (dx[0] != nullptr)
        {
          accumulate(dx[0], ncpdrive::div(g, *in[1]));
        }
        if (dx[1] != nullptr)
        {
          // d(a/b)/db = -(a/b)/b
          auto gb = dx[1]->values();
          auto gv = g.values();
          auto ov = out.values();
          auto bv = in[1]->values();
          for (std::size_t i = 0; i < gb.size(); ++i)
          {
            gb[i] -= gv[i] * ov[i] / bv[i];
          }
        }
      });
}

Var scale(Var x, Real factor)
{
  return graph_of(x).apply(
      "scale", {x}, [factor](Inputs in) { return ncpdrive::scale(*in[0], factor); },
      [factor](const Tensor &g, Inputs, const Tensor &, InputGrads dx) {
        accumulate(dx[0], ncpdrive::scale(g, factor));
      });
}

Var add_scalar(Var x, Real offset)
{
  return graph_of(x).apply(
      "add_scalar", {x}, [offset](Inputs in) { return ncpdrive::add_scalar(*in[0], offset); },
      [](const Tensor &g, Inputs, const Tensor &, InputGrads dx) { accumulate(dx[0], g); });
}

Var square(Var x)
{
  return graph_of(x).apply(
      "square", {x}, [](Inputs in) { return ncpdrive::mul(*in[0], *in[0]); },
      [](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        accumulate(dx[0], ncpdrive::scale(ncpdrive::mul(g, *in[0]), Real(2)));
      });
}

Var relu(Var x)
{
  return graph_of(x).apply(
      "relu", {x}, [](Inputs in) { return ncpdrive::relu(*in[0]); },
      [](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        // Subgradient at exactly zero is taken as 0.
        auto d  = dx[0]->values();
        auto gv = g.values();
        auto xv = in[0]->values();
        for (std::size_t i = 0; i < d.size(); ++i)
        {
          if (xv[i] > Real(0))
          {
            d[i] += gv[i];
          }
        }
      });
}

Var dropout(Var x, Real rate, std::uint64_t seed)
{
  if (!(rate >= Real(0) && rate < Real(1)))
  {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  auto mask = [rate, seed](const Shape &shape) {
    Tensor m(shape);
    Rng    rng(seed);
    Real const keep = Real(1) / (Real(1) - rate);
    for (Real &v : m.values())
    {
      v = rng.uniform() >= rate ? keep : Real(0);
    }
    return m;
  };
  return graph_of(x).apply(
      "dropout", {x}, [mask](Inputs in) { return ncpdrive::mul(*in[0], mask(in[0]->shape())); },
      [mask](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        accumulate(dx[0], ncpdrive::mul(g, mask(in[0]->shape())));
      });
}

Var sigmoid(Var x)
{
  return graph_of(x).apply(
      "sigmoid", {x}, [](Inputs in) { return ncpdrive::sigmoid(*in[0]); },
      [](const Tensor &g, Inputs, const Tensor &out, InputGrads dx) {
        auto d  = dx[0]->values();
        auto gv = g.values();
        auto sv = out.values();
        for (std::size_t i = 0; i < d.size(); ++i)
        {
          d[i] += gv[i] * sv[i] * (Real(1) - sv[i]);
        }
      });
}

Var exp(Var x)
{
  return graph_of(x).apply(
      "exp", {x},
      [](Inputs in) {
        Tensor out(in[0]->shape());
        auto   src = in[0]->values();
        auto   dst = out.values();
        for (std::size_t i = 0; i < dst.size(); ++i)
        {
          dst[i] = std::exp(src[i]);
        }
        return out;
      },
      [](const Tensor &g, Inputs, const Tensor &out, InputGrads dx) {
        accumulate(dx[0], ncpdrive::mul(g, out));
      });
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b)
{
  return same_graph(a, b).apply(
      "matmul", {a, b}, [](Inputs in) { return ncpdrive::matmul(*in[0], *in[1]); },
      [](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        if (dx[0] != nullptr)
        {
          accumulate(dx[0], ncpdrive::matmul(g, *in[1], false, true));
        }
        if (dx[1] != nullptr)
        {
          accumulate(dx[1], ncpdrive::matmul(*in[0], g, true, false));
        }
      });
}

Var add_bias(Var x, Var bias)
{
  return same_graph(x, bias).apply(
      "add_bias", {x, bias},
      [](Inputs in) {
        const Tensor &b = *in[1];
        if (b.rank() != 1)
        {
          throw ShapeError("bias must be rank 1, got " + shape_string(b.shape()));
        }
        std::size_t const f    = b.size();
        std::size_t const rows = leading(*in[0], f, "add_bias");
        Tensor            out  = *in[0];
        Real             *dst  = out.data();
        for (std::size_t r = 0; r < rows; ++r)
        {
          for (std::size_t j = 0; j < f; ++j)
          {
            dst[r * f + j] += b[j];
          }
        }
        return out;
      },
      [](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        accumulate(dx[0], g);
        if (dx[1] != nullptr)
        {
          std::size_t const f    = in[1]->size();
          std::size_t const rows = g.size() / f;
          Real             *db   = dx[1]->data();
          for (std::size_t r = 0; r < rows; ++r)
          {
            for (std::size_t j = 0; j < f; ++j)
            {
              db[j] += g[r * f + j];
            }
          }
        }
      });
}

Var mul_row(Var x, Var row)
{
  return same_graph(x, row).apply(
      "mul_row", {x, row},
      [](Inputs in) {
        const Tensor &r = *in[1];
        if (r.rank() != 1)
        {
          throw ShapeError("row factor must be rank 1, got " + shape_string(r.shape()));
        }
        std::size_t const f    = r.size();
        std::size_t const rows = leading(*in[0], f, "mul_row");
        Tensor            out  = *in[0];
        Real             *dst  = out.data();
        for (std::size_t i = 0; i < rows; ++i)
        {
          for (std::size_t j = 0; j < f; ++j)
          {
            dst[i * f + j] *= r[j];
          }
        }
        return out;
      },
      [](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        const Tensor     &x    = *in[0];
        const Tensor     &r    = *in[1];
        std::size_t const f    = r.size();
        std::size_t const rows = g.size() / f;
        for (std::size_t i = 0; i < rows; ++i)
        {
          for (std::size_t j = 0; j < f; ++j)
          {
            std::size_t const k = i * f + j;
            if (dx[0] != nullptr)
            {
              (*dx[0])[k] += g[k] * r[j];
            }
            if (dx[1] != nullptr)
            {
              (*dx[1])[j] += g[k] * x[k];
            }
          }
        }
      });
}

Var conv2d(Var input, Var kernels, std::size_t stride)
{
  return same_graph(input, kernels).apply(
      "conv2d", {input, kernels},
      [stride](Inputs in) { return ncpdrive::conv2d(*in[0], *in[1], stride); },
      [stride](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        if (dx[0] != nullptr)
        {
          accumulate(dx[0], conv2d_grad_input(g, *in[1], in[0]->shape(), stride));
        }
        if (dx[1] != nullptr)
        {
          accumulate(dx[1], conv2d_grad_kernels(*in[0], g, in[1]->shape(), stride));
        }
      });
}

Var conv2d_bias_relu(Var input, Var kernels, Var bias, std::size_t stride)
{
  return same_graph(input, kernels).apply(
      "conv2d_bias_relu", {input, kernels, bias},
      [stride](Inputs in) {
        const Tensor &b = *in[2];
        Tensor        out = ncpdrive::conv2d(*in[0], *in[1], stride);
        if (b.rank() != 1 || b.size() != out.dim(out.rank() - 1))
        {
          throw ShapeError("conv bias " + shape_string(b.shape()) + " does not match output " +
                           shape_string(out.shape()));
        }
        std::size_t const f    = b.size();
        std::size_t const rows = out.size() / f;
        Real             *dst  = out.data();
        for (std::size_t r = 0; r < rows; ++r)
        {
          for (std::size_t j = 0; j < f; ++j)
          {
            Real const v   = dst[r * f + j] + b[j];
            dst[r * f + j] = v > Real(0) ? v : Real(0);
          }
        }
        return out;
      },
      [stride](const Tensor &g, Inputs in, const Tensor &out, InputGrads dx) {
        // Gradient through the ReLU: zero wherever the output was clamped.
        Tensor            gz   = g;
        Real             *gd   = gz.data();
        const Real       *od   = out.data();
        std::size_t const f    = in[2]->size();
        std::size_t const rows = gz.size() / f;
        for (std::size_t i = 0; i < gz.size(); ++i)
        {
          if (!(od[i] > Real(0)))
          {
            gd[i] = Real(0);
          }
        }
        if (dx[2] != nullptr)
        {
          Real *db = dx[2]->data();
          for (std::size_t r = 0; r < rows; ++r)
          {
            for (std::size_t j = 0; j < f; ++j)
            {
              db[j] += gd[r * f + j];
            }
          }
        }
        if (dx[0] != nullptr)
        {
          accumulate(dx[0], conv2d_grad_input(gz, *in[1], in[0]->shape(), stride));
        }
        if (dx[1] != nullptr)
        {
          accumulate(dx[1], conv2d_grad_kernels(*in[0], gz, in[1]->shape(), stride));
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions and layout

Var sum(Var x)
{
  return graph_of(x).apply(
      "sum", {x}, [](Inputs in) { return Tensor::scalar(ncpdrive::sum(*in[0])); },
      [](const Tensor &g, Inputs, const Tensor &, InputGrads dx) {
        Real const s = g.item();
        for (Real &d : dx[0]->values())
        {
          d += s;
        }
      });
}

Var mean(Var x)
{
  return graph_of(x).apply(
      "mean", {x}, [](Inputs in) { return Tensor::scalar(ncpdrive::mean(*in[0])); },
      [](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        Real const s = g.item() / static_cast<Real>(in[0]->size());
        for (Real &d : dx[0]->values())
        {
          d += s;
        }
      });
}

Var reshape(Var x, Shape shape)
{
  return graph_of(x).apply(
      "reshape", {x},
      [shape](Inputs in) {
        // A single zero extent is inferred from the element count.
        Shape       resolved = shape;
        std::size_t known    = 1;
        for (std::size_t e : shape)
        {
          known *= e == 0 ? 1 : e;
        }
        for (std::size_t &e : resolved)
        {
          if (e == 0)
          {
            e = in[0]->size() / known;
          }
        }
        return in[0]->reshaped(resolved);
      },
      [](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        accumulate(dx[0], g.reshaped(in[0]->shape()));
      });
}

namespace {

struct AxisSplit
{
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisSplit split_axis(const Shape &shape, std::size_t axis)
{
  AxisSplit s{1, shape.at(axis), 1};
  for (std::size_t i = 0; i < axis; ++i)
  {
    s.outer *= shape[i];
  }
  for (std::size_t i = axis + 1; i < shape.size(); ++i)
  {
    s.inner *= shape[i];
  }
  return s;
}

}  // namespace

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length)
{
  return graph_of(x).apply(
      "slice", {x}, [=](Inputs in) { return ncpdrive::slice(*in[0], axis, start, length); },
      [=](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        AxisSplit const s   = split_axis(in[0]->shape(), axis);
        Real           *dst = dx[0]->data();
        const Real     *src = g.data();
        for (std::size_t o = 0; o < s.outer; ++o)
        {
          Real       *to   = dst + (o * s.extent + start) * s.inner;
          const Real *from = src + o * length * s.inner;
          for (std::size_t i = 0; i < length * s.inner; ++i)
          {
            to[i] += from[i];
          }
        }
      });
}

Var concat(std::vector<Var> parts, std::size_t axis)
{
  if (parts.empty())
  {
    throw ShapeError("concat of zero tensors");
  }
  Graph &g = graph_of(parts.front());
  return g.apply(
      "concat", parts,
      [axis](Inputs in) {
        Shape shape = in[0]->shape();
        if (axis >= shape.size())
        {
          throw ShapeError("concat axis out of range for " + shape_string(shape));
        }
        std::size_t total = 0;
        for (const Tensor *t : in)
        {
          Shape a = t->shape();
          Shape b = shape;
          if (a.size() != b.size())
          {
            throw ShapeError("concat rank mismatch " + shape_string(a) + " vs " + shape_string(b));
          }
          a[axis] = b[axis] = 0;
          if (a != b)
          {
            throw ShapeError("concat shape mismatch " + shape_string(t->shape()) + " vs " +
                             shape_string(shape));
          }
          total += t->dim(axis);
        }
        shape[axis] = total;
        Tensor            out(shape);
        AxisSplit const   s   = split_axis(shape, axis);
        Real             *dst = out.data();
        std::size_t       off = 0;
        for (const Tensor *t : in)
        {
          std::size_t const len = t->dim(axis);
          for (std::size_t o = 0; o < s.outer; ++o)
          {
            std::copy_n(t->data() + o * len * s.inner, len * s.inner,
                        dst + (o * s.extent + off) * s.inner);
          }
          off += len;
        }
        return out;
      },
      [axis](const Tensor &g, Inputs in, const Tensor &out, InputGrads dx) {
        AxisSplit const s   = split_axis(out.shape(), axis);
        std::size_t     off = 0;
        for (std::size_t k = 0; k < in.size(); ++k)
        {
          std::size_t const len = in[k]->dim(axis);
          if (dx[k] != nullptr)
          {
            Real *dst = dx[k]->data();
            for (std::size_t o = 0; o < s.outer; ++o)
            {
              const Real *from = g.data() + (o * s.extent + off) * s.inner;
              Real       *to   = dst + o * len * s.inner;
              for (std::size_t i = 0; i < len * s.inner; ++i)
              {
                to[i] += from[i];
              }
            }
          }
          off += len;
        }
      });
}

Var gather_rows(Var x, std::vector<std::size_t> rows)
{
  return graph_of(x).apply(
      "gather_rows", {x},
      [rows](Inputs in) {
        const Tensor &src = *in[0];
        if (src.rank() == 0)
        {
          throw ShapeError("gather_rows needs rank >= 1");
        }
        std::size_t const row_len = src.size() / src.dim(0);
        Shape             shape   = src.shape();
        shape[0]                  = rows.size();
        Tensor out(shape);
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
          if (rows[i] >= src.dim(0))
          {
            throw ShapeError("gather_rows index " + std::to_string(rows[i]) + " out of range for " +
                             shape_string(src.shape()));
          }
          std::copy_n(src.data() + rows[i] * row_len, row_len, out.data() + i * row_len);
        }
        return out;
      },
      [rows](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        std::size_t const row_len = in[0]->size() / in[0]->dim(0);
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
          Real       *to   = dx[0]->data() + rows[i] * row_len;
          const Real *from = g.data() + i * row_len;
          for (std::size_t j = 0; j < row_len; ++j)
          {
            to[j] += from[j];
          }
        }
      });
}

Var softmax(Var x)
{
  return graph_of(x).apply(
      "softmax", {x},
      [](Inputs in) {
        const Tensor &v = *in[0];
        if (v.rank() != 1)
        {
          throw ShapeError("softmax needs rank 1, got " + shape_string(v.shape()));
        }
        Real const top = *std::max_element(v.values().begin(), v.values().end());
        Tensor     out(v.shape());
        Real       total = 0;
        for (std::size_t i = 0; i < v.size(); ++i)
        {
          out[i] = std::exp(v[i] - top);
          total += out[i];
        }
        for (Real &o : out.values())
        {
          o /= total;
        }
        return out;
      },
      [](const Tensor &g, Inputs, const Tensor &s, InputGrads dx) {
        Real dot = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
        {
          dot += g[i] * s[i];
        }
        for (std::size_t i = 0; i < s.size(); ++i)
        {
          (*dx[0])[i] += s[i] * (g[i] - dot);
        }
      });
}

// ---------------------------------------------------------------------------
// Synapse primitives

Var pairwise_sigmoid(Var pre, Var mu, Var sigma)
{
  Graph &g = same_graph(pre, mu);
  same_graph(pre, sigma);
  return g.apply(
      "pairwise_sigmoid", {pre, mu, sigma},
      [](Inputs in) {
        const Tensor &x = *in[0];
        const Tensor &m = *in[1];
        const Tensor &s = *in[2];
        if (x.rank() != 2 || m.rank() != 2 || m.shape() != s.shape() || m.dim(0) != x.dim(1))
        {
          throw ShapeError("pairwise_sigmoid shapes " + shape_string(x.shape()) + ", " +
                           shape_string(m.shape()) + ", " + shape_string(s.shape()));
        }
        std::size_t const batch = x.dim(0);
        std::size_t const npre  = m.dim(0);
        std::size_t const npost = m.dim(1);
        Tensor            out(Shape{batch, npre, npost});
        Real             *dst = out.data();
        for (std::size_t b = 0; b < batch; ++b)
        {
          for (std::size_t p = 0; p < npre; ++p)
          {
            Real const xv = x[b * npre + p];
            for (std::size_t n = 0; n < npost; ++n)
            {
              std::size_t const k = p * npost + n;
              *dst++              = ncpdrive::sigmoid((xv - m[k]) * s[k]);
            }
          }
        }
        return out;
      },
      [](const Tensor &g, Inputs in, const Tensor &out, InputGrads dx) {
        const Tensor     &x     = *in[0];
        const Tensor     &m     = *in[1];
        const Tensor     &s     = *in[2];
        std::size_t const batch = x.dim(0);
        std::size_t const npre  = m.dim(0);
        std::size_t const npost = m.dim(1);
        for (std::size_t b = 0; b < batch; ++b)
        {
          for (std::size_t p = 0; p < npre; ++p)
          {
            Real const xv  = x[b * npre + p];
            Real       gxv = 0;
            for (std::size_t n = 0; n < npost; ++n)
            {
              std::size_t const k  = p * npost + n;
              std::size_t const o  = (b * npre + p) * npost + n;
              Real const        sv = out[o];
              Real const        dz = g[o] * sv * (Real(1) - sv);
              gxv += dz * s[k];
              if (dx[1] != nullptr)
              {
                (*dx[1])[k] -= dz * s[k];
              }
              if (dx[2] != nullptr)
              {
                (*dx[2])[k] += dz * (xv - m[k]);
              }
            }
            if (dx[0] != nullptr)
            {
              (*dx[0])[b * npre + p] += gxv;
            }
          }
        }
      });
}

Var contract_pre(Var act, Var coef)
{
  return same_graph(act, coef).apply(
      "contract_pre", {act, coef},
      [](Inputs in) {
        const Tensor &a = *in[0];
        const Tensor &c = *in[1];
        if (a.rank() != 3 || c.rank() != 2 || a.dim(1) != c.dim(0) || a.dim(2) != c.dim(1))
        {
          throw ShapeError("contract_pre shapes " + shape_string(a.shape()) + " and " +
                           shape_string(c.shape()));
        }
        std::size_t const batch = a.dim(0);
        std::size_t const npre  = a.dim(1);
        std::size_t const npost = a.dim(2);
        Tensor            out(Shape{batch, npost});
        for (std::size_t b = 0; b < batch; ++b)
        {
          Real *row = out.data() + b * npost;
          for (std::size_t p = 0; p < npre; ++p)
          {
            const Real *av = a.data() + (b * npre + p) * npost;
            const Real *cv = c.data() + p * npost;
            for (std::size_t n = 0; n < npost; ++n)
            {
              row[n] += av[n] * cv[n];
            }
          }
        }
        return out;
      },
      [](const Tensor &g, Inputs in, const Tensor &, InputGrads dx) {
        const Tensor     &a     = *in[0];
        const Tensor     &c     = *in[1];
        std::size_t const batch = a.dim(0);
        std::size_t const npre  = a.dim(1);
        std::size_t const npost = a.dim(2);
        for (std::size_t b = 0; b < batch; ++b)
        {
          const Real *gv = g.data() + b * npost;
          for (std::size_t p = 0; p < npre; ++p)
          {
            std::size_t const base = (b * npre + p) * npost;
            for (std::size_t n = 0; n < npost; ++n)
            {
              if (dx[0] != nullptr)
              {
                (*dx[0])[base + n] += gv[n] * c[p * npost + n];
              }
              if (dx[1] != nullptr)
              {
                (*dx[1])[p * npost + n] += gv[n] * a[base + n];
              }
            }
          }
        }
      });
}

Var mse(Var pred, Var target)
{
  return mean(square(sub(pred, target)));
}

// ---------------------------------------------------------------------------
// Finite-difference verification

GradCheckReport gradcheck(Graph &graph, Var loss, const Feeds &feeds, const GradCheckOptions &options)
{
  graph.forward(feeds, loss);
  graph.backward(loss);
  std::map<std::string, Tensor> const analytic = graph.parameter_grads();

  GradCheckReport report;
  Rng             rng(options.seed);
  Real const      eps = static_cast<Real>(options.eps);
  for (Var p : graph.parameters())
  {
    std::string const &name   = graph.node(p).name;
    Tensor            &value  = graph.parameter_value(p);
    std::size_t const  count  = value.size();
    std::vector<std::size_t> picks;
    if (options.max_elements == 0 || options.max_elements >= count)
    {
      picks.resize(count);
      for (std::size_t i = 0; i < count; ++i)
      {
        picks[i] = i;
      }
    }
    else
    {
      picks = rng.sample_distinct(count, options.max_elements);
    }

    double worst = 0.0;
    for (std::size_t i : picks)
    {
      Real const saved = value[i];
      value[i]         = saved + eps;
      double const up  = graph.forward(feeds, loss).item();
      graph.parameter_value(p)[i] = saved - eps;
      double const down            = graph.forward(feeds, loss).item();
      graph.parameter_value(p)[i] = saved;

      double const numeric  = (up - down) / (2.0 * options.eps);
      double const exact    = analytic.at(name)[i];
      double const denom    = std::max({std::abs(exact), std::abs(numeric), options.floor});
      double const relative = std::abs(exact - numeric) / denom;
      worst                 = std::max(worst, relative);
      ++report.checked_elements;
    }
    report.max_relative_error[name] = worst;
    if (worst >= report.worst)
    {
      report.worst           = worst;
      report.worst_parameter = name;
    }
  }
  graph.forward(feeds, loss);
  return report;
}

}  // namespace ncpdrive::ad

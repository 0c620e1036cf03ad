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


// Criterion 1: finite-difference check of every differentiable primitive and
// of a three-step unrolled CNN-NCP, 64-bit.
#include <functional>
#include <sstream>
#include <vector>

#include "ncpdrive/autodiff.hpp"
#include "ncpdrive/ltc.hpp"
#include "ncpdrive/models.hpp"
#include "outcome.hpp"

using namespace ncpdrive;
namespace ad = ncpdrive::ad;

static_assert(kDoublePrecision, "criterion 1 needs the 64-bit build");

namespace {

constexpr double kTolerance = 1e-4;

Tensor random_tensor(Shape shape, Rng &rng, double lo = -1.0, double hi = 1.0)
{
  Tensor t(std::move(shape));
  for (Real &v : t.values())
  {
    v = rng.uniform(lo, hi);
  }
  return t;
}

// Random projection to a scalar so every output element matters.
ad::Var project(ad::Graph &g, ad::Var out, Rng &rng)
{
  Tensor const &value = g.forward(out);
  return ad::sum(ad::mul(out, g.constant(random_tensor(value.shape(), rng))));
}

struct Case
{
  const char *name;
  std::function<ad::Var(ad::Graph &, Rng &)> build;
  ad::GradCheckOptions options{};
};

std::vector<Case> primitive_cases()
{
  auto P = [](ad::Graph &g, const char *n, Shape s, Rng &r, double lo = -1, double hi = 1) {
    return g.parameter(n, random_tensor(std::move(s), r, lo, hi));
  };
  std::vector<Case> cases = {
      {"add/sub/mul/div", [&](ad::Graph &g, Rng &r) {
         ad::Var a = P(g, "a", {3, 4}, r), b = P(g, "b", {3, 4}, r, 0.5, 2);
         return project(g, ad::div(ad::sub(ad::add(a, b), ad::mul(a, b)), b), r);
       }},
      {"scale/add_scalar/square", [&](ad::Graph &g, Rng &r) {
         ad::Var a = P(g, "a", {5}, r);
         return project(g, ad::square(ad::add_scalar(ad::scale(a, 1.7), -0.3)), r);
       }},
      {"relu", [&](ad::Graph &g, Rng &r) {
         Tensor x = random_tensor({4, 5}, r);
         for (Real &v : x.values()) v = v >= 0 ? v + 0.1 : v - 0.1;  // away from the kink
         return project(g, ad::relu(g.parameter("x", x)), r);
       }},
      {"sigmoid/exp", [&](ad::Graph &g, Rng &r) {
         ad::Var a = P(g, "a", {6}, r);
         return project(g, ad::add(ad::sigmoid(a), ad::exp(a)), r);
       }},
      {"dropout", [&](ad::Graph &g, Rng &r) {
         return project(g, ad::dropout(P(g, "a", {40}, r), 0.5, 3), r);
       }},
      {"matmul/add_bias", [&](ad::Graph &g, Rng &r) {
         ad::Var x = P(g, "x", {5, 4}, r), w = P(g, "w", {4, 3}, r), b = P(g, "b", {3}, r);
         return project(g, ad::add_bias(ad::matmul(x, w), b), r);
       }},
      {"mul_row", [&](ad::Graph &g, Rng &r) {
         return project(g, ad::mul_row(P(g, "x", {3, 4}, r), P(g, "row", {4}, r)), r);
       }},
      {"conv2d", [&](ad::Graph &g, Rng &r) {
         return project(g, ad::conv2d(P(g, "x", {2, 9, 7, 3}, r), P(g, "k", {3, 3, 3, 4}, r), 2), r);
       }},
      {"conv2d_bias_relu", [&](ad::Graph &g, Rng &r) {
         return project(g, ad::conv2d_bias_relu(P(g, "x", {1, 8, 8, 2}, r),
                                                P(g, "k", {3, 3, 2, 3}, r),
                                                P(g, "b", {3}, r, -0.3, 0.3), 1),
                        r);
       }},
      {"sum/mean", [&](ad::Graph &g, Rng &r) {
         ad::Var a = P(g, "a", {3, 3}, r);
         return ad::add(ad::sum(ad::square(a)), ad::mean(ad::exp(a)));
       }},
      {"reshape/slice/concat/gather_rows", [&](ad::Graph &g, Rng &r) {
         ad::Var x = P(g, "x", {3, 4}, r);
         ad::Var z = ad::concat({ad::slice(x, 1, 2, 2), ad::slice(x, 1, 0, 2)}, 1);
         return project(g, ad::reshape(ad::gather_rows(z, {2, 0, 0}), {2, 6}), r);
       }},
      {"softmax", [&](ad::Graph &g, Rng &r) { return project(g, ad::softmax(P(g, "w", {3}, r)), r); }},
      {"pairwise_sigmoid/contract_pre", [&](ad::Graph &g, Rng &r) {
         ad::Var act = ad::pairwise_sigmoid(P(g, "pre", {2, 5}, r), P(g, "mu", {5, 3}, r, 0.3, 0.8),
                                            P(g, "sigma", {5, 3}, r, 3, 8));
         return project(g, ad::contract_pre(act, P(g, "coef", {5, 3}, r)), r);
       }},
      {"mse", [&](ad::Graph &g, Rng &r) {
         return ad::mse(P(g, "pred", {6}, r), g.constant(random_tensor({6}, r)));
       }},
      {"ltc_step", [&](ad::Graph &g, Rng &r) {
         NcpWiring const w = build_ncp(WiringConfig{{10, 5, 4, 2}, 2, 2, 4, 2, 3});
         LtcParams       p = init_params(w, r);
         for (Real &v : p.input_w.values()) v = r.uniform(0.5, 1.5);
         for (Real &v : p.output_b.values()) v = r.uniform(-0.2, 0.2);
         NamedTensors named;
         store_params(p, "c.", named);
         LtcVars cell  = bind_params(g, named, "c.", w);
         ad::Var state = g.parameter("state", random_tensor({2, w.neurons()}, r, -0.5, 0.5));
         auto [next, motor] =
             ltc_step(cell, state, g.constant(random_tensor({2, 10}, r)), LtcSolver{1, 6});
         return ad::add(project(g, next, r), ad::sum(ad::square(motor)));
       }},
  };
  return cases;
}

Case unrolled_cnn_ncp()
{
  Case c{"cnn-ncp unrolled T=3", nullptr, {}};
  c.options.eps          = 1e-6;  // larger steps cross ReLU kinks behind the conv biases
  c.options.max_elements = 12;
  return c;
}

}  // namespace

namespace acceptance {

Outcome check_gradients()
{
  std::ostringstream detail;
  double             worst = 0;
  std::string        worst_at;
  std::size_t        checked = 0;
  auto note = [&](const std::string &name, const ad::GradCheckReport &r) {
    checked += r.checked_elements;
    if (r.worst > worst || worst_at.empty())
    {
      worst    = r.worst;
      worst_at = name + ":" + r.worst_parameter;
    }
  };

  Rng rng(2024);
  std::size_t primitives = 0;
  for (const Case &c : primitive_cases())
  {
    ad::Graph g;
    ad::Var   loss = c.build(g, rng);
    note(c.name, ad::gradcheck(g, loss, {}, c.options));
    ++primitives;
  }

  {
    ArchitectureSpec spec = default_spec(Variant::kCnnNcp, 21);
    spec.dropout          = 0;
    Model model(spec);
    for (const char *name : {"ncp.input_w", "ncp.input_b", "ncp.output_w", "ncp.output_b"})
    {
      for (Real &v : model.parameters().at(name).values()) v += rng.uniform(-0.2, 0.2);
    }
    Tensor const frames = random_tensor({3, kFrameHeight, kFrameWidth, kFrameChannels}, rng);
    Tensor const target = random_tensor({1, 3}, rng, -0.5, 0.5);
    ad::Graph    g;
    ModelVars    vars = model.bind(g);
    ad::Var      loss =
        ad::mse(model.predict(vars, g.constant(frames), 1, 3, nullptr), g.constant(target));
    Case const c = unrolled_cnn_ncp();
    note(c.name, ad::gradcheck(g, loss, {}, c.options));
  }

  detail << primitives << " primitive groups + unrolled CNN-NCP, " << checked
         << " elements, worst relative error " << worst << " at " << worst_at;
  return {worst < kTolerance, detail.str()};
}

}  // namespace acceptance

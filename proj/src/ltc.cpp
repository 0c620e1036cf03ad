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

#include "ncpdrive/ltc.hpp"

#include <algorithm>
#include <cmath>

#include "ncpdrive/ops.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

namespace {

constexpr const char *kNames[] = {"gleak",     "vleak",      "cm",         "w",
                                  "mu",        "sigma",      "sensory_w",  "sensory_mu",
                                  "sensory_sigma", "input_w", "input_b",   "output_w",
                                  "output_b"};

Tensor uniform_masked(const Tensor &mask, Rng &rng, double lo, double hi)
{
  Tensor t(mask.shape());
  for (std::size_t i = 0; i < t.size(); ++i)
  {
    if (mask[i] != Real(0))
    {
      t[i] = static_cast<Real>(rng.uniform(lo, hi));
    }
  }
  return t;
}

Tensor uniform_vector(std::size_t n, Rng &rng, double lo, double hi)
{
  Tensor t(Shape{n});
  for (Real &v : t.values())
  {
    v = static_cast<Real>(rng.uniform(lo, hi));
  }
  return t;
}

void floor_values(Tensor &t, const Tensor *mask)
{
  for (std::size_t i = 0; i < t.size(); ++i)
  {
    if (mask != nullptr && (*mask)[i] == Real(0))
    {
      t[i] = Real(0);
    }
    else if (!(t[i] >= kPositiveFloor))
    {
      t[i] = kPositiveFloor;
    }
  }
}

void zero_absent(Tensor &t, const Tensor &mask)
{
  for (std::size_t i = 0; i < t.size(); ++i)
  {
    if (mask[i] == Real(0))
    {
      t[i] = Real(0);
    }
  }
}

}  // namespace

Real synapse_activation(Real v_pre, Real mu, Real sigma)
{
  return sigmoid((v_pre - mu) * sigma);
}

LtcState zero_state(const NcpWiring &wiring)
{
  return {Tensor(Shape{wiring.neurons()})};
}

LtcParams init_params(const NcpWiring &wiring, Rng &rng)
{
  LayerCounts const &c = wiring.counts();
  Tensor const       mask         = wiring.mask();
  Tensor const       sensory_mask = wiring.sensory_mask();

  LtcParams p;
  p.gleak         = uniform_vector(c.neurons(), rng, 0.001, 1.0);
  p.vleak         = uniform_vector(c.neurons(), rng, -0.2, 0.2);
  p.cm            = uniform_vector(c.neurons(), rng, 0.4, 0.6);
  p.w             = uniform_masked(mask, rng, 0.001, 1.0);
  p.mu            = uniform_masked(mask, rng, 0.3, 0.8);
  p.sigma         = uniform_masked(mask, rng, 3.0, 8.0);
  p.erev          = wiring.polarity();
  p.sensory_w     = uniform_masked(sensory_mask, rng, 0.001, 1.0);
  p.sensory_mu    = uniform_masked(sensory_mask, rng, 0.3, 0.8);
  p.sensory_sigma = uniform_masked(sensory_mask, rng, 3.0, 8.0);
  p.sensory_erev  = wiring.sensory_polarity();
  p.input_w       = Tensor(Shape{c.sensory}, Real(1));
  p.input_b       = Tensor(Shape{c.sensory}, Real(0));
  p.output_w      = Tensor(Shape{c.motor}, Real(1));
  p.output_b      = Tensor(Shape{c.motor}, Real(0));
  return p;
}

std::size_t trainable_parameter_count(const NcpWiring &wiring)
{
  LayerCounts const &c = wiring.counts();
  std::size_t const  synapses = wiring.synapse_count() + wiring.sensory_synapse_count();
  return 3 * synapses + 3 * c.neurons() + 2 * c.sensory + 2 * c.motor;
}

std::pair<LtcState, Tensor> ltc_step(const LtcState &state, const Tensor &sensory,
                                     const LtcParams &params, const NcpWiring &wiring,
                                     Real elapsed, int unfolds)
{
  LayerCounts const &c = wiring.counts();
  std::size_t const  n = c.neurons();
  if (sensory.size() != c.sensory)
  {
    throw ShapeError("ltc_step: " + std::to_string(sensory.size()) + " sensory inputs for a wiring with " +
                     std::to_string(c.sensory) + " sensory channels");
  }
  if (state.v.size() != n)
  {
    throw ShapeError("ltc_step: state has " + std::to_string(state.v.size()) + " neurons, wiring has " +
                     std::to_string(n));
  }
  if (unfolds < 1 || !(elapsed > Real(0)))
  {
    throw ConfigError("ltc_step needs unfolds >= 1 and elapsed > 0");
  }

  // Sensory drive is constant across the sub-steps of one frame.
  std::vector<Real> sens_num(n, Real(0));
  std::vector<Real> sens_den(n, Real(0));
  for (std::size_t s = 0; s < c.sensory; ++s)
  {
    Real const x = sensory[s] * params.input_w[s] + params.input_b[s];
    for (std::size_t post = 0; post < n; ++post)
    {
      if (wiring.sensory_synapse(s, post) == 0)
      {
        continue;
      }
      std::size_t const k = s * n + post;
      Real const g = params.sensory_w[k] * synapse_activation(x, params.sensory_mu[k], params.sensory_sigma[k]);
      sens_num[post] += g * params.sensory_erev[k];
      sens_den[post] += g;
    }
  }

  Real const delta = elapsed / static_cast<Real>(unfolds);
  Tensor     v     = state.v;
  Tensor     next(Shape{n});
  for (int step = 0; step < unfolds; ++step)
  {
    std::vector<Real> num = sens_num;
    std::vector<Real> den = sens_den;
    for (std::size_t pre = 0; pre < n; ++pre)
    {
      for (std::size_t post = 0; post < n; ++post)
      {
        if (wiring.synapse(pre, post) == 0)
        {
          continue;
        }
        std::size_t const k = pre * n + post;
        Real const        g = params.w[k] * synapse_activation(v[pre], params.mu[k], params.sigma[k]);
        num[post] += g * params.erev[k];
        den[post] += g;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
    {
      Real const cm_t = params.cm[i] / delta;
      next[i] = (cm_t * v[i] + params.gleak[i] * params.vleak[i] + num[i]) / (cm_t + params.gleak[i] + den[i]);
    }
    std::swap(v, next);
  }

  Tensor motor(Shape{c.motor});
  for (std::size_t m = 0; m < c.motor; ++m)
  {
    motor[m] = v[c.motor_begin() + m] * params.output_w[m] + params.output_b[m];
  }
  return {LtcState{std::move(v)}, std::move(motor)};
}

void clamp_params(LtcParams &params, const NcpWiring &wiring)
{
  Tensor const mask         = wiring.mask();
  Tensor const sensory_mask = wiring.sensory_mask();
  floor_values(params.gleak, nullptr);
  floor_values(params.cm, nullptr);
  floor_values(params.w, &mask);
  floor_values(params.sigma, &mask);
  floor_values(params.sensory_w, &sensory_mask);
  floor_values(params.sensory_sigma, &sensory_mask);
  zero_absent(params.mu, mask);
  zero_absent(params.sensory_mu, sensory_mask);
}

void store_params(const LtcParams &p, const std::string &prefix, NamedTensors &out)
{
  const Tensor *fields[] = {&p.gleak,     &p.vleak,      &p.cm,           &p.w,       &p.mu,
                            &p.sigma,     &p.sensory_w,  &p.sensory_mu,   &p.sensory_sigma,
                            &p.input_w,   &p.input_b,    &p.output_w,     &p.output_b};
  for (std::size_t i = 0; i < std::size(kNames); ++i)
  {
    out[prefix + kNames[i]] = *fields[i];
  }
}

LtcParams load_params(const NamedTensors &in, const std::string &prefix, const NcpWiring &wiring)
{
  LtcParams p;
  Tensor   *fields[] = {&p.gleak,     &p.vleak,      &p.cm,           &p.w,       &p.mu,
                        &p.sigma,     &p.sensory_w,  &p.sensory_mu,   &p.sensory_sigma,
                        &p.input_w,   &p.input_b,    &p.output_w,     &p.output_b};
  for (std::size_t i = 0; i < std::size(kNames); ++i)
  {
    auto it = in.find(prefix + kNames[i]);
    if (it == in.end())
    {
      throw FormatError("missing LTC parameter '" + prefix + kNames[i] + "'");
    }
    *fields[i] = it->second;
  }
  p.erev         = wiring.polarity();
  p.sensory_erev = wiring.sensory_polarity();
  return p;
}

void clamp_params(NamedTensors &tensors, const std::string &prefix, const NcpWiring &wiring)
{
  LtcParams p = load_params(tensors, prefix, wiring);
  clamp_params(p, wiring);
  store_params(p, prefix, tensors);
}

LtcVars bind_params(ad::Graph &graph, const NamedTensors &tensors, const std::string &prefix,
                    const NcpWiring &wiring)
{
  auto param = [&](const char *name) {
    auto it = tensors.find(prefix + name);
    if (it == tensors.end())
    {
      throw FormatError("missing LTC parameter '" + prefix + name + "'");
    }
    return graph.parameter(prefix + name, it->second);
  };
  LtcVars cell;
  cell.gleak         = param("gleak");
  cell.vleak         = param("vleak");
  cell.cm            = param("cm");
  cell.w             = param("w");
  cell.mu            = param("mu");
  cell.sigma         = param("sigma");
  cell.sensory_w     = param("sensory_w");
  cell.sensory_mu    = param("sensory_mu");
  cell.sensory_sigma = param("sensory_sigma");
  cell.input_w       = param("input_w");
  cell.input_b       = param("input_b");
  cell.output_w      = param("output_w");
  cell.output_b      = param("output_b");
  cell.erev          = graph.constant(wiring.polarity(), prefix + "erev");
  cell.mask          = graph.constant(wiring.mask(), prefix + "mask");
  cell.sensory_erev  = graph.constant(wiring.sensory_polarity(), prefix + "sensory_erev");
  cell.sensory_mask  = graph.constant(wiring.sensory_mask(), prefix + "sensory_mask");
  cell.counts        = wiring.counts();
  return cell;
}

std::pair<ad::Var, ad::Var> ltc_step(const LtcVars &cell, ad::Var state, ad::Var sensory,
                                     const LtcSolver &solver)
{
  if (solver.unfolds < 1 || !(solver.elapsed > Real(0)))
  {
    throw ConfigError("ltc_step needs unfolds >= 1 and elapsed > 0");
  }
  Real const delta = solver.elapsed / static_cast<Real>(solver.unfolds);

  // Conductance weights restricted to existing synapses; erev carries the sign.
  ad::Var const w_den   = ad::mul(cell.w, cell.mask);
  ad::Var const w_num   = ad::mul(cell.w, cell.erev);
  ad::Var const sw_den  = ad::mul(cell.sensory_w, cell.sensory_mask);
  ad::Var const sw_num  = ad::mul(cell.sensory_w, cell.sensory_erev);

  ad::Var const x        = ad::add_bias(ad::mul_row(sensory, cell.input_w), cell.input_b);
  ad::Var const s_act    = ad::pairwise_sigmoid(x, cell.sensory_mu, cell.sensory_sigma);
  ad::Var const s_num    = ad::contract_pre(s_act, sw_num);
  ad::Var const s_den    = ad::contract_pre(s_act, sw_den);
  ad::Var const cm_t     = ad::scale(cell.cm, Real(1) / delta);
  ad::Var const leak_num = ad::mul(cell.gleak, cell.vleak);
  ad::Var const leak_den = ad::add(cm_t, cell.gleak);

  ad::Var v = state;
  for (int step = 0; step < solver.unfolds; ++step)
  {
    ad::Var const act = ad::pairwise_sigmoid(v, cell.mu, cell.sigma);
    ad::Var const num = ad::add_bias(ad::add(ad::add(ad::mul_row(v, cm_t), ad::contract_pre(act, w_num)), s_num),
                                     leak_num);
    ad::Var const den = ad::add_bias(ad::add(ad::contract_pre(act, w_den), s_den), leak_den);
    v                 = ad::div(num, den);
  }

  ad::Var const motor_v = ad::slice(v, 1, cell.counts.motor_begin(), cell.counts.motor);
  ad::Var const motor   = ad::add_bias(ad::mul_row(motor_v, cell.output_w), cell.output_b);
  return {v, motor};
}

}  // namespace ncpdrive

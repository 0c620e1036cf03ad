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
#include <string>
#include <utility>

#include "ncpdrive/autodiff.hpp"
#include "ncpdrive/rng.hpp"
#include "ncpdrive/tensor.hpp"
#include "ncpdrive/wiring.hpp"

// Liquid time-constant cell over an NCP wiring.
//
// Each non-sensory neuron i carries a membrane potential v_i driven by a leak
// toward vleak_i and by conductance-based synapses whose activation is a
// logistic function of the presynaptic potential. One input frame advances the
// state by `elapsed` time units, split into `unfolds` fused semi-implicit
// sub-steps of length d:
//
//   v <- (cm/d * v + gleak * vleak + sum_j w_j s_j erev_j)
//        / (cm/d + gleak + sum_j w_j s_j)
//
// The numerator is a positive-weighted combination of v, vleak and every
// erev, so the update never leaves their convex hull.
namespace ncpdrive::inline NCPD_PRECISION_NS {

struct LtcParams
{
  // Per neuron, [N].
  Tensor gleak;
  Tensor vleak;
  Tensor cm;
  // Inter-unit synapses, [N, N] indexed (pre, post). Zero where no synapse.
  Tensor w;
  Tensor mu;
  Tensor sigma;
  Tensor erev;
  // Sensory synapses, [S, N].
  Tensor sensory_w;
  Tensor sensory_mu;
  Tensor sensory_sigma;
  Tensor sensory_erev;
  // Affine maps on sensory inputs [S] and motor outputs [M].
  Tensor input_w;
  Tensor input_b;
  Tensor output_w;
  Tensor output_b;
};

struct LtcState
{
  Tensor v;  // [N]
};

struct LtcSolver
{
  Real elapsed = 1;
  int  unfolds = 6;

  friend bool operator==(const LtcSolver &, const LtcSolver &) = default;
};

/// Lower bound kept on gleak, cm, sigma and w at existing synapses.
inline constexpr Real kPositiveFloor = Real(1e-5);

Real synapse_activation(Real v_pre, Real mu, Real sigma);

LtcState zero_state(const NcpWiring &wiring);

/// Samples parameters from the documented initial ranges:
/// gleak U[0.001, 1], vleak U[-0.2, 0.2], cm U[0.4, 0.6], w U[0.001, 1],
/// sigma U[3, 8], mu U[0.3, 0.8], erev = synapse polarity, identity affine maps.
LtcParams init_params(const NcpWiring &wiring, Rng &rng);

/// Trainable scalars that exist under `wiring`: three per synapse (w, mu,
/// sigma), three per neuron (gleak, vleak, cm) and the input/output affine maps.
std::size_t trainable_parameter_count(const NcpWiring &wiring);

/// One input frame through the cell. `sensory` has S elements.
std::pair<LtcState, Tensor> ltc_step(const LtcState &state, const Tensor &sensory,
                                     const LtcParams &params, const NcpWiring &wiring,
                                     Real elapsed, int unfolds);

/// Restores positivity of gleak, cm, sigma and w and zeroes absent synapses.
void clamp_params(LtcParams &params, const NcpWiring &wiring);

// Named-tensor view used by models and checkpoints. erev is not stored: it is
// fixed by the wiring polarity.
void      store_params(const LtcParams &params, const std::string &prefix, NamedTensors &out);
LtcParams load_params(const NamedTensors &in, const std::string &prefix, const NcpWiring &wiring);
void      clamp_params(NamedTensors &tensors, const std::string &prefix, const NcpWiring &wiring);

/// Parameters of one cell bound into a computation graph.
struct LtcVars
{
  ad::Var gleak;
  ad::Var vleak;
  ad::Var cm;
  ad::Var w;
  ad::Var mu;
  ad::Var sigma;
  ad::Var sensory_w;
  ad::Var sensory_mu;
  ad::Var sensory_sigma;
  ad::Var input_w;
  ad::Var input_b;
  ad::Var output_w;
  ad::Var output_b;
  ad::Var erev;          // constant polarity [N, N]
  ad::Var mask;          // constant 0/1 [N, N]
  ad::Var sensory_erev;  // constant [S, N]
  ad::Var sensory_mask;  // constant [S, N]
  LayerCounts counts;
};

LtcVars bind_params(ad::Graph &graph, const NamedTensors &tensors, const std::string &prefix,
                    const NcpWiring &wiring);

/// Differentiable batched step: `state` is [B, N], `sensory` is [B, S].
/// Returns the new state and the motor outputs [B, M].
std::pair<ad::Var, ad::Var> ltc_step(const LtcVars &cell, ad::Var state, ad::Var sensory,
                                     const LtcSolver &solver);

}  // namespace ncpdrive

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
#include <string>
#include <string_view>
#include <vector>

#include "ncpdrive/tensor.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

/// Neuron counts of one four-layer circuit.
struct LayerCounts
{
  std::size_t sensory = 100;
  std::size_t inter   = 12;
  std::size_t command = 8;
  std::size_t motor   = 1;

  /// Non-sensory neurons (inter + command + motor).
  std::size_t neurons() const noexcept
  {
    return inter + command + motor;
  }
  std::size_t command_begin() const noexcept
  {
    return inter;
  }
  std::size_t motor_begin() const noexcept
  {
    return inter + command;
  }

  friend bool operator==(const LayerCounts &, const LayerCounts &) = default;
};

enum class Layer
{
  kInter,
  kCommand,
  kMotor,
};

const char *layer_name(Layer layer);

struct WiringConfig
{
  LayerCounts   counts;
  std::size_t   sensory_fanout             = 2;
  std::size_t   inter_fanout               = 5;
  std::size_t   recurrent_command_synapses = 6;
  std::size_t   motor_fanin                = 6;
  std::uint64_t seed                       = 0;

  friend bool operator==(const WiringConfig &, const WiringConfig &) = default;
};

/// Throws ConfigError when a count is zero or a fanout exceeds its target layer.
void check_config(const WiringConfig &config);

/// Sparse signed connectome of one neural circuit policy.
///
/// Non-sensory neurons are indexed inter first, then command, then motor.
/// `synapse(pre, post)` is the polarity (-1, 0 or +1) of the inter-unit
/// synapse pre -> post; `sensory_synapse(s, post)` the polarity of the synapse
/// from sensory channel s.
class NcpWiring
{
public:
  NcpWiring() = default;
  explicit NcpWiring(LayerCounts counts);

  const LayerCounts &counts() const noexcept
  {
    return counts_;
  }
  std::size_t neurons() const noexcept
  {
    return counts_.neurons();
  }
  Layer layer_of(std::size_t neuron) const;

  int  synapse(std::size_t pre, std::size_t post) const;
  void set_synapse(std::size_t pre, std::size_t post, int polarity);
  int  sensory_synapse(std::size_t sensory, std::size_t post) const;
  void set_sensory_synapse(std::size_t sensory, std::size_t post, int polarity);

  std::size_t synapse_count() const;
  std::size_t sensory_synapse_count() const;

  /// Polarity matrices as tensors: [N, N] and [S, N].
  Tensor polarity() const;
  Tensor sensory_polarity() const;
  /// 0/1 masks of existing synapses, same shapes as the polarity tensors.
  Tensor mask() const;
  Tensor sensory_mask() const;

  friend bool operator==(const NcpWiring &, const NcpWiring &) = default;

private:
  LayerCounts              counts_;
  std::vector<std::int8_t> adj_;          // N x N, row = presynaptic
  std::vector<std::int8_t> sensory_adj_;  // S x N
};

/// Seeded five-phase NCP construction.
NcpWiring build_ncp(const WiringConfig &config);

/// Every layer-allowed synapse present, polarities drawn from `seed`.
NcpWiring build_fc(LayerCounts counts, std::uint64_t seed = 0);

/// Each layer-allowed synapse present with probability `density`, then
/// coverage-patched so every inter/command/motor neuron has an input.
NcpWiring build_random(LayerCounts counts, double density, std::uint64_t seed);

/// Number of synapse slots the layer rules allow
/// (sensory->inter, inter->command, command->command, command->motor).
std::size_t allowed_synapse_count(const LayerCounts &counts);

/// Fraction of layer-allowed slots without a synapse.
double sparsity(const NcpWiring &wiring);

/// Human-readable list of invariant violations; empty iff the wiring is valid.
std::vector<std::string> validate(const NcpWiring &wiring);

/// True when every motor neuron is reachable from some sensory channel.
bool motors_reachable(const NcpWiring &wiring);

/// Plain-text adjacency dump.
///
///   ncp <sensory> <inter> <command> <motor>
///   <src> <dst> <polarity>
///   ...
///
/// Node ids are global: sensory channels take [0, S), circuit neuron n takes
/// S + n. Sensory synapses come first, then inter-unit synapses, both in
/// row-major order.
std::string export_text(const NcpWiring &wiring);
NcpWiring   parse_text(std::string_view text);

}  // namespace ncpdrive

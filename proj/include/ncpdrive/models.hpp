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
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ncpdrive/autodiff.hpp"
#include "ncpdrive/ltc.hpp"
#include "ncpdrive/rng.hpp"
#include "ncpdrive/tensor.hpp"
#include "ncpdrive/wiring.hpp"

// The steering architectures: a CNN baseline and a shared convolutional
// feature head followed by one (CNN-NCP) or two (CNN-DNCP) LTC circuits.
//
// Frames are preprocessed 66x200x3 tensors. Parameter names:
//   conv1..conv5.{kernel,bias}        feature convolutions
//   latent.{weight,bias}              1152 -> 100 dense
//   fc1..fc4.{weight,bias}, out.*     baseline dense stack
//   ncp.*, left.*, right.*            LTC circuits (see ltc.hpp)
//   fusion.logits                     weighted fusion of dual circuits
namespace ncpdrive::inline NCPD_PRECISION_NS {

inline constexpr std::size_t kFrameHeight   = 66;
inline constexpr std::size_t kFrameWidth    = 200;
inline constexpr std::size_t kFrameChannels = 3;
inline constexpr std::size_t kLatentSize    = 100;

enum class Variant
{
  kCnn,
  kCnnNcp,
  kCnnDncp1,
  kCnnDncp2,
  kCnnDncp3,
  kCnnDncp4,
};

inline constexpr Variant kAllVariants[] = {Variant::kCnn,      Variant::kCnnNcp,
                                           Variant::kCnnDncp1, Variant::kCnnDncp2,
                                           Variant::kCnnDncp3, Variant::kCnnDncp4};

enum class Fusion
{
  kMean,
  kWeighted,
};

/// "cnn", "cnn-ncp", "cnn-dncp-v1" ... "cnn-dncp-v4".
std::string variant_name(Variant variant);
Variant     parse_variant(const std::string &name);
std::string fusion_name(Fusion fusion);
Fusion      parse_fusion(const std::string &name);

bool is_dual(Variant variant);
bool is_recurrent(Variant variant);

struct ArchitectureSpec
{
  Variant       variant = Variant::kCnnNcp;
  Real          dropout = Real(0.5);
  std::uint64_t seed    = 0;
  /// Single circuit of CNN-NCP, or the left circuit of a dual variant.
  WiringConfig left;
  WiringConfig right;
  Fusion       fusion = Fusion::kMean;
  LtcSolver    solver;

  bool operator==(const ArchitectureSpec &) const = default;
};

/// Neuron counts of the circuits (left, right) for a variant. The single
/// circuit of CNN-NCP is returned as `left`.
std::pair<LayerCounts, LayerCounts> circuit_counts(Variant variant);

/// Spec with the published neuron counts, default fanouts (clamped to the
/// layer sizes of small circuits), default fusion and seed-derived wiring
/// seeds. v4 differs from v3 by weighted fusion and its wiring seeds.
ArchitectureSpec default_spec(Variant variant, std::uint64_t seed = 0);

/// Clamps fanouts of `config` to the sizes of the layers they target.
WiringConfig fit_fanouts(WiringConfig config);

/// Per-circuit state of a recurrent model; empty for the CNN baseline.
struct RecurrentState
{
  std::vector<LtcState> circuits;
};

/// Parameters of a model bound into a graph.
struct ModelVars
{
  std::map<std::string, ad::Var> params;
  std::vector<LtcVars>           circuits;
};

class Model
{
public:
  /// Freshly initialised model (deterministic in spec.seed).
  explicit Model(ArchitectureSpec spec);
  /// Model around existing parameters; every expected tensor must be present
  /// with its expected shape and no other tensor may be given.
  Model(ArchitectureSpec spec, NamedTensors parameters);

  const ArchitectureSpec &spec() const noexcept
  {
    return spec_;
  }
  bool recurrent() const noexcept
  {
    return is_recurrent(spec_.variant);
  }
  const std::vector<NcpWiring> &wirings() const noexcept
  {
    return wirings_;
  }
  const NamedTensors &parameters() const noexcept
  {
    return params_;
  }
  NamedTensors &parameters() noexcept
  {
    return params_;
  }
  std::size_t parameter_count() const;

  /// Re-imposes the LTC positivity constraints after an optimizer step.
  void apply_constraints();

  ModelVars bind(ad::Graph &graph) const;

  /// Latent features [B, 100] of frames [B, 66, 200, 3]. With a non-null
  /// `dropout_rng` dropout is active at spec.dropout.
  ad::Var features(const ModelVars &vars, ad::Var frames, Rng *dropout_rng) const;

  /// Predictions [B, T] for frames [B*T, 66, 200, 3] ordered batch-major.
  /// Recurrent models start each of the B sequences from zero state.
  ad::Var predict(const ModelVars &vars, ad::Var frames, std::size_t batch, std::size_t steps,
                  Rng *dropout_rng) const;

  RecurrentState initial_state() const;

  /// Stateful inference on frames [T, 66, 200, 3] (or a single 66x200x3
  /// frame), dropout off. Returns T steering values and advances `state`.
  Tensor infer(const Tensor &frames, RecurrentState &state) const;

  /// infer() on the model's own state.
  Tensor forward(const Tensor &frames);
  void   reset_state();

private:
  Real fuse(const std::vector<Real> &motors) const;

  ArchitectureSpec       spec_;
  std::vector<NcpWiring> wirings_;
  std::vector<std::string> prefixes_;
  NamedTensors           params_;
  RecurrentState         state_;
};

/// Closed-form parameter count of the CNN baseline.
std::size_t cnn_baseline_parameter_count();

/// Shapes of every parameter a spec expects.
std::map<std::string, Shape> expected_parameter_shapes(const ArchitectureSpec &spec);

}  // namespace ncpdrive

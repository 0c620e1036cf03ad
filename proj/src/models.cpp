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

#include "ncpdrive/models.hpp"

#include <cmath>

#include "ncpdrive/ops.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

namespace {

struct ConvLayer
{
  const char *name;
  std::size_t kernel;
  std::size_t filters;
  std::size_t stride;
};

constexpr ConvLayer kConvLayers[] = {
    {"conv1", 5, 24, 2}, {"conv2", 5, 36, 2}, {"conv3", 5, 48, 2},
    {"conv4", 3, 64, 1}, {"conv5", 3, 64, 1},
};

struct DenseLayer
{
  const char *name;
  std::size_t out;
};

constexpr DenseLayer kBaselineDense[] = {
    {"fc1", 1164}, {"fc2", 100}, {"fc3", 50}, {"fc4", 10}, {"out", 1},
};

constexpr std::size_t kInferenceChunk = 32;

Shape conv_output_shape()
{
  std::size_t h = kFrameHeight, w = kFrameWidth, c = kFrameChannels;
  for (const ConvLayer &layer : kConvLayers)
  {
    h = conv_output_extent(h, layer.kernel, layer.stride);
    w = conv_output_extent(w, layer.kernel, layer.stride);
    c = layer.filters;
  }
  return {h, w, c};
}

std::size_t flat_features()
{
  return shape_size(conv_output_shape());
}

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng &rng)
{
  Tensor       t(std::move(shape));
  double const limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Real &v : t.values())
  {
    v = static_cast<Real>(rng.uniform(-limit, limit));
  }
  return t;
}

std::vector<std::string> circuit_prefixes(Variant variant)
{
  if (!is_recurrent(variant))
  {
    return {};
  }
  if (!is_dual(variant))
  {
    return {"ncp."};
  }
  return {"left.", "right."};
}

ad::Var dense(const ModelVars &vars, const std::string &name, ad::Var x)
{
  return ad::add_bias(ad::matmul(x, vars.params.at(name + ".weight")),
                      vars.params.at(name + ".bias"));
}

}  // namespace

std::string variant_name(Variant variant)
{
  switch (variant)
  {
  case Variant::kCnn:
    return "cnn";
  case Variant::kCnnNcp:
    return "cnn-ncp";
  case Variant::kCnnDncp1:
    return "cnn-dncp-v1";
  case Variant::kCnnDncp2:
    return "cnn-dncp-v2";
  case Variant::kCnnDncp3:
    return "cnn-dncp-v3";
  case Variant::kCnnDncp4:
    return "cnn-dncp-v4";
  }
  return "?";
}

Variant parse_variant(const std::string &name)
{
  for (Variant v : kAllVariants)
  {
    if (variant_name(v) == name)
    {
      return v;
    }
  }
  throw ConfigError("unknown model variant '" + name +
                    "' (expected cnn, cnn-ncp or cnn-dncp-v1..v4)");
}

std::string fusion_name(Fusion fusion)
{
  return fusion == Fusion::kMean ? "mean" : "weighted";
}

Fusion parse_fusion(const std::string &name)
{
  if (name == "mean")
  {
    return Fusion::kMean;
  }
  if (name == "weighted")
  {
    return Fusion::kWeighted;
  }
  throw ConfigError("unknown fusion '" + name + "' (expected mean or weighted)");
}

bool is_dual(Variant variant)
{
  return variant != Variant::kCnn && variant != Variant::kCnnNcp;
}

bool is_recurrent(Variant variant)
{
  return variant != Variant::kCnn;
}

std::pair<LayerCounts, LayerCounts> circuit_counts(Variant variant)
{
  auto counts = [](std::size_t inter, std::size_t command) {
    return LayerCounts{kLatentSize, inter, command, 1};
  };
  switch (variant)
  {
  case Variant::kCnn:
    return {LayerCounts{}, LayerCounts{}};
  case Variant::kCnnNcp:
    return {counts(12, 8), LayerCounts{}};
  case Variant::kCnnDncp1:
    return {counts(3, 5), counts(4, 6)};
  case Variant::kCnnDncp2:
    return {counts(9, 7), counts(12, 8)};
  case Variant::kCnnDncp3:
  case Variant::kCnnDncp4:
    return {counts(12, 8), counts(5, 3)};
  }
  return {};
}

WiringConfig fit_fanouts(WiringConfig config)
{
  const LayerCounts &c = config.counts;
  config.sensory_fanout = std::min(config.sensory_fanout, c.inter);
  config.inter_fanout   = std::min(config.inter_fanout, c.command);
  config.motor_fanin    = std::min(config.motor_fanin, c.command);
  config.recurrent_command_synapses =
      std::min(config.recurrent_command_synapses, c.command * c.command);
  return config;
}

ArchitectureSpec default_spec(Variant variant, std::uint64_t seed)
{
  ArchitectureSpec spec;
  spec.variant = variant;
  spec.seed    = seed;
  spec.fusion  = variant == Variant::kCnnDncp4 ? Fusion::kWeighted : Fusion::kMean;
  auto [left, right]         = circuit_counts(variant);
  std::uint64_t const stream = variant == Variant::kCnnDncp4 ? 3 : 1;
  spec.left.counts           = left;
  spec.left.seed             = Rng::derive(seed, stream).next_u64();
  spec.right.counts          = right;
  spec.right.seed            = Rng::derive(seed, stream + 1).next_u64();
  spec.left                  = fit_fanouts(spec.left);
  spec.right                 = fit_fanouts(spec.right);
  return spec;
}

std::size_t cnn_baseline_parameter_count()
{
  std::size_t total = 0, channels = kFrameChannels;
  for (const ConvLayer &layer : kConvLayers)
  {
    total += layer.kernel * layer.kernel * channels * layer.filters + layer.filters;
    channels = layer.filters;
  }
  std::size_t in = flat_features();
  for (const DenseLayer &layer : kBaselineDense)
  {
    total += in * layer.out + layer.out;
    in = layer.out;
  }
  return total;
}

std::map<std::string, Shape> expected_parameter_shapes(const ArchitectureSpec &spec)
{
  std::map<std::string, Shape> shapes;
  std::size_t                  channels = kFrameChannels;
  for (const ConvLayer &layer : kConvLayers)
  {
    std::string const name = layer.name;
    shapes[name + ".kernel"] = {layer.kernel, layer.kernel, channels, layer.filters};
    shapes[name + ".bias"]   = {layer.filters};
    channels                 = layer.filters;
  }
  if (!is_recurrent(spec.variant))
  {
    std::size_t in = flat_features();
    for (const DenseLayer &layer : kBaselineDense)
    {
      std::string const name = layer.name;
      shapes[name + ".weight"] = {in, layer.out};
      shapes[name + ".bias"]   = {layer.out};
      in                       = layer.out;
    }
    return shapes;
  }
  shapes["latent.weight"] = {flat_features(), kLatentSize};
  shapes["latent.bias"]   = {kLatentSize};
  auto const prefixes     = circuit_prefixes(spec.variant);
  for (std::size_t i = 0; i < prefixes.size(); ++i)
  {
    LayerCounts const &c = i == 0 ? spec.left.counts : spec.right.counts;
    std::size_t const  n = c.neurons();
    for (const char *name : {"gleak", "vleak", "cm"})
    {
      shapes[prefixes[i] + name] = {n};
    }
    for (const char *name : {"w", "mu", "sigma"})
    {
      shapes[prefixes[i] + name] = {n, n};
    }
    for (const char *name : {"sensory_w", "sensory_mu", "sensory_sigma"})
    {
      shapes[prefixes[i] + name] = {c.sensory, n};
    }
    shapes[prefixes[i] + "input_w"]  = {c.sensory};
    shapes[prefixes[i] + "input_b"]  = {c.sensory};
    shapes[prefixes[i] + "output_w"] = {c.motor};
    shapes[prefixes[i] + "output_b"] = {c.motor};
  }
  if (is_dual(spec.variant) && spec.fusion == Fusion::kWeighted)
  {
    shapes["fusion.logits"] = {2};
  }
  return shapes;
}

// ---------------------------------------------------------------------------

namespace {

void check_spec(const ArchitectureSpec &spec)
{
  if (!(spec.dropout >= Real(0) && spec.dropout < Real(1)))
  {
    throw ConfigError("dropout must lie in [0, 1), got " + std::to_string(spec.dropout));
  }
  if (spec.solver.unfolds < 1)
  {
    throw ConfigError("unfolds must be at least 1");
  }
  if (!(spec.solver.elapsed > Real(0)))
  {
    throw ConfigError("elapsed time per frame must be positive");
  }
  auto [left, right] = circuit_counts(spec.variant);
  if (is_recurrent(spec.variant) && !(spec.left.counts == left))
  {
    throw ConfigError(variant_name(spec.variant) + " requires the published left circuit counts");
  }
  if (is_dual(spec.variant) && !(spec.right.counts == right))
  {
    throw ConfigError(variant_name(spec.variant) + " requires the published right circuit counts");
  }
  if (!is_dual(spec.variant) && spec.fusion == Fusion::kWeighted)
  {
    throw ConfigError("weighted fusion needs a dual-circuit variant");
  }
}

std::vector<NcpWiring> build_wirings(const ArchitectureSpec &spec)
{
  std::vector<NcpWiring> out;
  if (is_recurrent(spec.variant))
  {
    out.push_back(build_ncp(spec.left));
  }
  if (is_dual(spec.variant))
  {
    out.push_back(build_ncp(spec.right));
  }
  return out;
}

}  // namespace

Model::Model(ArchitectureSpec spec)
  : spec_(std::move(spec))
{
  check_spec(spec_);
  wirings_  = build_wirings(spec_);
  prefixes_ = circuit_prefixes(spec_.variant);

  Rng         rng      = Rng::derive(spec_.seed, 16);
  std::size_t channels = kFrameChannels;
  for (const ConvLayer &layer : kConvLayers)
  {
    std::string const name = layer.name;
    std::size_t const area = layer.kernel * layer.kernel;
    params_[name + ".kernel"] =
        glorot({layer.kernel, layer.kernel, channels, layer.filters}, area * channels,
               area * layer.filters, rng);
    params_[name + ".bias"] = Tensor(Shape{layer.filters});
    channels                = layer.filters;
  }
  auto add_dense = [&](const std::string &name, std::size_t in, std::size_t out) {
    params_[name + ".weight"] = glorot({in, out}, in, out, rng);
    params_[name + ".bias"]   = Tensor(Shape{out});
  };
  if (!recurrent())
  {
    std::size_t in = flat_features();
    for (const DenseLayer &layer : kBaselineDense)
    {
      add_dense(layer.name, in, layer.out);
      in = layer.out;
    }
  }
  else
  {
    add_dense("latent", flat_features(), kLatentSize);
    for (std::size_t i = 0; i < wirings_.size(); ++i)
    {
      Rng circuit_rng = Rng::derive(spec_.seed, 32 + i);
      store_params(init_params(wirings_[i], circuit_rng), prefixes_[i], params_);
    }
    if (is_dual(spec_.variant) && spec_.fusion == Fusion::kWeighted)
    {
      params_["fusion.logits"] = Tensor(Shape{2});
    }
  }
  state_ = initial_state();
}

Model::Model(ArchitectureSpec spec, NamedTensors parameters)
  : spec_(std::move(spec))
  , params_(std::move(parameters))
{
  check_spec(spec_);
  wirings_  = build_wirings(spec_);
  prefixes_ = circuit_prefixes(spec_.variant);
  auto const expected = expected_parameter_shapes(spec_);
  for (const auto &[name, tensor] : params_)
  {
    auto it = expected.find(name);
    if (it == expected.end())
    {
      throw FormatError("unknown tensor name '" + name + "' for " + variant_name(spec_.variant));
    }
    if (tensor.shape() != it->second)
    {
      throw FormatError("tensor '" + name + "' has shape " + shape_string(tensor.shape()) +
                        ", expected " + shape_string(it->second));
    }
  }
  for (const auto &[name, shape] : expected)
  {
    if (params_.count(name) == 0)
    {
      throw FormatError("missing tensor '" + name + "' for " + variant_name(spec_.variant));
    }
  }
  state_ = initial_state();
}

std::size_t Model::parameter_count() const
{
  std::size_t total = 0;
  for (const auto &[name, tensor] : params_)
  {
    bool in_circuit = false;
    for (const std::string &prefix : prefixes_)
    {
      in_circuit = in_circuit || name.rfind(prefix, 0) == 0;
    }
    if (!in_circuit)
    {
      total += tensor.size();
    }
  }
  for (const NcpWiring &w : wirings_)
  {
    total += trainable_parameter_count(w);
  }
  return total;
}

void Model::apply_constraints()
{
  for (std::size_t i = 0; i < wirings_.size(); ++i)
  {
    clamp_params(params_, prefixes_[i], wirings_[i]);
  }
}

ModelVars Model::bind(ad::Graph &graph) const
{
  ModelVars vars;
  for (std::size_t i = 0; i < wirings_.size(); ++i)
  {
    vars.circuits.push_back(bind_params(graph, params_, prefixes_[i], wirings_[i]));
  }
  for (const auto &[name, tensor] : params_)
  {
    bool in_circuit = false;
    for (const std::string &prefix : prefixes_)
    {
      in_circuit = in_circuit || name.rfind(prefix, 0) == 0;
    }
    vars.params[name] = in_circuit ? graph.parameter_by_name(name) : graph.parameter(name, tensor);
  }
  return vars;
}

ad::Var Model::features(const ModelVars &vars, ad::Var frames, Rng *dropout_rng) const
{
  ad::Var x = frames;
  for (const ConvLayer &layer : kConvLayers)
  {
    std::string const name = layer.name;
    x = ad::conv2d_bias_relu(x, vars.params.at(name + ".kernel"), vars.params.at(name + ".bias"),
                             layer.stride);
  }
  if (dropout_rng != nullptr && spec_.dropout > Real(0))
  {
    x = ad::dropout(x, spec_.dropout, dropout_rng->next_u64());
  }
  ad::Var flat = ad::reshape(x, {0, flat_features()});
  if (!recurrent())
  {
    return flat;
  }
  return ad::relu(dense(vars, "latent", flat));
}

ad::Var Model::predict(const ModelVars &vars, ad::Var frames, std::size_t batch,
                       std::size_t steps, Rng *dropout_rng) const
{
  ad::Var feats = features(vars, frames, dropout_rng);
  if (!recurrent())
  {
    ad::Var x = feats;
    for (const DenseLayer &layer : kBaselineDense)
    {
      x = dense(vars, layer.name, x);
      if (std::string(layer.name) != "out")
      {
        x = ad::relu(x);
      }
    }
    return ad::reshape(x, {batch, steps});
  }

  ad::Graph &graph = *frames.graph();
  ad::Var    seq   = ad::reshape(feats, {batch, steps, kLatentSize});
  std::vector<ad::Var> outputs;
  for (std::size_t c = 0; c < vars.circuits.size(); ++c)
  {
    ad::Var state = graph.constant(Tensor(Shape{batch, wirings_[c].neurons()}));
    std::vector<ad::Var> motors;
    for (std::size_t t = 0; t < steps; ++t)
    {
      ad::Var input = ad::reshape(ad::slice(seq, 1, t, 1), {batch, kLatentSize});
      auto [next, motor] = ltc_step(vars.circuits[c], state, input, spec_.solver);
      state              = next;
      motors.push_back(motor);
    }
    outputs.push_back(steps == 1 ? motors.front() : ad::concat(motors, 1));
  }
  if (outputs.size() == 1)
  {
    return ad::reshape(outputs.front(), {batch, steps});
  }
  if (spec_.fusion == Fusion::kMean)
  {
    return ad::reshape(ad::scale(ad::add(outputs[0], outputs[1]), Real(0.5)), {batch, steps});
  }
  ad::Var weights = ad::softmax(vars.params.at("fusion.logits"));
  ad::Var fused   = ad::add(ad::mul_row(ad::reshape(outputs[0], {batch * steps, 1}),
                                        ad::slice(weights, 0, 0, 1)),
                            ad::mul_row(ad::reshape(outputs[1], {batch * steps, 1}),
                                        ad::slice(weights, 0, 1, 1)));
  return ad::reshape(fused, {batch, steps});
}

RecurrentState Model::initial_state() const
{
  RecurrentState state;
  for (const NcpWiring &w : wirings_)
  {
    state.circuits.push_back(zero_state(w));
  }
  return state;
}

Real Model::fuse(const std::vector<Real> &motors) const
{
  if (motors.size() == 1)
  {
    return motors.front();
  }
  if (spec_.fusion == Fusion::kMean)
  {
    return (motors[0] + motors[1]) / Real(2);
  }
  const Tensor &logits = params_.at("fusion.logits");
  Real const    top    = std::max(logits[0], logits[1]);
  Real const    e0     = std::exp(logits[0] - top);
  Real const    e1     = std::exp(logits[1] - top);
  return (e0 * motors[0] + e1 * motors[1]) / (e0 + e1);
}

Tensor Model::infer(const Tensor &frames, RecurrentState &state) const
{
  Shape const frame_shape{kFrameHeight, kFrameWidth, kFrameChannels};
  Tensor      batch = frames;
  if (frames.shape() == frame_shape)
  {
    batch = frames.reshaped({1, kFrameHeight, kFrameWidth, kFrameChannels});
  }
  if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != frame_shape)
  {
    throw ShapeError("model input must be [T, 66, 200, 3], got " + shape_string(frames.shape()));
  }
  if (state.circuits.size() != wirings_.size())
  {
    throw ShapeError("recurrent state does not match the model's circuits");
  }
  std::size_t const steps = batch.dim(0);
  Tensor            out(Shape{steps});

  std::vector<LtcParams> circuits;
  for (std::size_t i = 0; i < wirings_.size(); ++i)
  {
    circuits.push_back(load_params(params_, prefixes_[i], wirings_[i]));
  }

  for (std::size_t start = 0; start < steps; start += kInferenceChunk)
  {
    std::size_t const n = std::min(kInferenceChunk, steps - start);
    ad::Graph         graph;
    ModelVars const   vars  = bind(graph);
    ad::Var const     input = graph.constant(slice(batch, 0, start, n));
    if (!recurrent())
    {
      Tensor const pred = graph.forward(predict(vars, input, n, 1, nullptr));
      for (std::size_t t = 0; t < n; ++t)
      {
        out[start + t] = pred[t];
      }
      continue;
    }
    Tensor const latents = graph.forward(features(vars, input, nullptr));
    for (std::size_t t = 0; t < n; ++t)
    {
      Tensor const      sensory = slice(latents, 0, t, 1).reshaped({kLatentSize});
      std::vector<Real> motors;
      for (std::size_t c = 0; c < circuits.size(); ++c)
      {
        auto [next, motor] = ltc_step(state.circuits[c], sensory, circuits[c], wirings_[c],
                                      spec_.solver.elapsed, spec_.solver.unfolds);
        state.circuits[c]  = std::move(next);
        motors.push_back(motor[0]);
      }
      out[start + t] = fuse(motors);
    }
  }
  return out;
}

Tensor Model::forward(const Tensor &frames)
{
  return infer(frames, state_);
}

void Model::reset_state()
{
  state_ = initial_state();
}

}  // namespace ncpdrive

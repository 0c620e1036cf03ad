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

#include <cmath>

#include "gtest/gtest.h"

#include "ncpdrive/models.hpp"
#include "ncpdrive/ops.hpp"

using namespace ncpdrive;

namespace {

Tensor random_frames(std::size_t n, std::uint64_t seed)
{
  Tensor t(Shape{n, kFrameHeight, kFrameWidth, kFrameChannels});
  Rng    rng(seed);
  for (Real &v : t.values())
  {
    v = static_cast<Real>(rng.uniform(-1, 1));
  }
  return t;
}

Tensor frame_at(const Tensor &frames, std::size_t i)
{
  return slice(frames, 0, i, 1);
}

}  // namespace

TEST(ModelsTest, VariantNamesRoundTrip)
{
  for (Variant v : kAllVariants)
  {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
  EXPECT_THROW(parse_variant("cnn-dncp-v5"), ConfigError);
  EXPECT_THROW(parse_fusion("max"), ConfigError);
}

TEST(ModelsTest, ConvShapeChain)
{
  // 66x200 -> 31x98 -> 14x47 -> 5x22 -> 3x20 -> 1x18.
  std::size_t h = 66, w = 200;
  std::size_t const expected_h[] = {31, 14, 5, 3, 1};
  std::size_t const expected_w[] = {98, 47, 22, 20, 18};
  std::size_t const kernel[]     = {5, 5, 5, 3, 3};
  std::size_t const stride[]     = {2, 2, 2, 1, 1};
  for (int i = 0; i < 5; ++i)
  {
    h = (h - kernel[i]) / stride[i] + 1;
    w = (w - kernel[i]) / stride[i] + 1;
    EXPECT_EQ(h, expected_h[i]);
    EXPECT_EQ(w, expected_w[i]);
  }
  EXPECT_EQ(h * w * 64, 1152u);

  Model     model(default_spec(Variant::kCnnNcp, 1));
  ad::Graph g;
  ModelVars vars = model.bind(g);
  Tensor const latents =
      g.forward(model.features(vars, g.constant(random_frames(2, 3)), nullptr));
  EXPECT_EQ(latents.shape(), (Shape{2, 100}));
  EXPECT_EQ(model.wirings().front().counts().sensory, latents.dim(1));
}

TEST(ModelsTest, BaselineParameterCountClosedForm)
{
  // conv: k*k*cin*cout + cout; dense: in*out + out.
  std::size_t const conv = (5 * 5 * 3 * 24 + 24) + (5 * 5 * 24 * 36 + 36) +
                           (5 * 5 * 36 * 48 + 48) + (3 * 3 * 48 * 64 + 64) +
                           (3 * 3 * 64 * 64 + 64);
  std::size_t const dense = (1152 * 1164 + 1164) + (1164 * 100 + 100) + (100 * 50 + 50) +
                            (50 * 10 + 10) + (10 * 1 + 1);
  EXPECT_EQ(conv + dense, 1595511u);
  Model const model(default_spec(Variant::kCnn, 0));
  EXPECT_EQ(model.parameter_count(), conv + dense);
  EXPECT_EQ(cnn_baseline_parameter_count(), conv + dense);
}

TEST(ModelsTest, BaselineZeroWeightsGiveFinalBias)
{
  Model model(default_spec(Variant::kCnn, 0));
  for (auto &[name, t] : model.parameters())
  {
    t.fill(0);
  }
  model.parameters().at("out.bias")[0] = Real(0.125);
  Tensor const out                     = model.forward(random_frames(3, 1));
  for (Real v : out.values())
  {
    EXPECT_EQ(v, Real(0.125));
  }
}

TEST(ModelsTest, BaselineSingleFrameMatchesBatch)
{
  Model        model(default_spec(Variant::kCnn, 2));
  Tensor const frames = random_frames(3, 5);
  Tensor const batch  = model.forward(frames);
  for (std::size_t i = 0; i < 3; ++i)
  {
    EXPECT_NEAR(model.forward(frame_at(frames, i))[0], batch[i], 1e-6);
  }
}

TEST(ModelsTest, DropoutZeroIsDeterministicAndDropoutChangesOutput)
{
  ArchitectureSpec spec = default_spec(Variant::kCnn, 4);
  Tensor const     frames = random_frames(2, 6);
  auto run = [&](const ArchitectureSpec &s, std::uint64_t dropout_seed) {
    Model     model(s);
    ad::Graph g;
    ModelVars vars = model.bind(g);
    Rng       rng(dropout_seed);
    return g.forward(model.predict(vars, g.constant(frames), 2, 1, &rng));
  };
  spec.dropout = 0;
  EXPECT_EQ(run(spec, 1), run(spec, 2));
  spec.dropout = Real(0.5);
  EXPECT_NE(run(spec, 1), run(spec, 2));
  EXPECT_EQ(run(spec, 3), run(spec, 3));
}

TEST(ModelsTest, NcpSequenceShapeAndCircuitSize)
{
  Model model(default_spec(Variant::kCnnNcp, 0));
  EXPECT_EQ(model.wirings().size(), 1u);
  EXPECT_EQ(model.wirings().front().neurons(), 21u);
  Tensor const out = model.forward(random_frames(5, 7));
  EXPECT_EQ(out.shape(), (Shape{5}));
}

TEST(ModelsTest, RecurrentStateIsCarriedAndReset)
{
  Model        model(default_spec(Variant::kCnnNcp, 3));
  Tensor const frame = frame_at(random_frames(1, 8), 0);
  Real const   first = model.forward(frame)[0];
  Real const   second = model.forward(frame)[0];
  EXPECT_NE(first, second);
  model.reset_state();
  EXPECT_EQ(model.forward(frame)[0], first);

  Tensor const seq = random_frames(4, 9);
  model.reset_state();
  Tensor const a = model.forward(seq);
  model.reset_state();
  Tensor const b = model.forward(seq);
  EXPECT_EQ(a, b);
}

TEST(ModelsTest, GraphRouteMatchesStatefulInference)
{
  for (Variant v : {Variant::kCnn, Variant::kCnnNcp, Variant::kCnnDncp2, Variant::kCnnDncp4})
  {
    Model model(default_spec(v, 11));
    if (model.parameters().count("fusion.logits") != 0)
    {
      model.parameters().at("fusion.logits")[0] = Real(0.7);
    }
    Tensor const frames = random_frames(6, 12);  // two sequences of three
    ad::Graph    g;
    ModelVars    vars = model.bind(g);
    Tensor const pred = g.forward(model.predict(vars, g.constant(frames), 2, 3, nullptr));
    ASSERT_EQ(pred.shape(), (Shape{2, 3}));
    for (std::size_t b = 0; b < 2; ++b)
    {
      model.reset_state();
      Tensor const seq = model.forward(slice(frames, 0, 3 * b, 3));
      for (std::size_t t = 0; t < 3; ++t)
      {
        EXPECT_NEAR(pred.at({b, t}), seq[t], 1e-5) << variant_name(v);
      }
    }
  }
}

TEST(ModelsTest, MeanFusionAveragesMotors)
{
  Model model(default_spec(Variant::kCnnDncp1, 0));
  model.parameters().at("left.output_w")[0]  = 0;
  model.parameters().at("left.output_b")[0]  = Real(0.2);
  model.parameters().at("right.output_w")[0] = 0;
  model.parameters().at("right.output_b")[0] = Real(0.4);
  EXPECT_NEAR(model.forward(random_frames(1, 0))[0], 0.3, 1e-6);
}

TEST(ModelsTest, DualWiringCountsFollowTable)
{
  struct Row
  {
    Variant     v;
    std::size_t li, lc, ri, rc;
  };
  for (Row r : {Row{Variant::kCnnDncp1, 3, 5, 4, 6}, Row{Variant::kCnnDncp2, 9, 7, 12, 8},
                Row{Variant::kCnnDncp3, 12, 8, 5, 3}, Row{Variant::kCnnDncp4, 12, 8, 5, 3}})
  {
    Model const model(default_spec(r.v, 0));
    ASSERT_EQ(model.wirings().size(), 2u);
    const LayerCounts &l = model.wirings()[0].counts();
    const LayerCounts &rc = model.wirings()[1].counts();
    EXPECT_EQ(l, (LayerCounts{100, r.li, r.lc, 1}));
    EXPECT_EQ(rc, (LayerCounts{100, r.ri, r.rc, 1}));
    EXPECT_FALSE(model.wirings()[0] == model.wirings()[1]);
    EXPECT_TRUE(validate(model.wirings()[0]).empty());
    EXPECT_TRUE(validate(model.wirings()[1]).empty());
  }
}

TEST(ModelsTest, V1CircuitSmallerThanV2)
{
  Model const v1(default_spec(Variant::kCnnDncp1, 0));
  Model const v2(default_spec(Variant::kCnnDncp2, 0));
  EXPECT_LT(allowed_synapse_count(v1.wirings()[0].counts()),
            allowed_synapse_count(v2.wirings()[0].counts()));
  EXPECT_LT(allowed_synapse_count(v1.wirings()[1].counts()),
            allowed_synapse_count(v2.wirings()[1].counts()));
  EXPECT_LT(v1.parameter_count(), v2.parameter_count());
}

TEST(ModelsTest, V3AndV4DifferOnlyInFusionAndSeeds)
{
  ArchitectureSpec const v3 = default_spec(Variant::kCnnDncp3, 5);
  ArchitectureSpec const v4 = default_spec(Variant::kCnnDncp4, 5);
  EXPECT_EQ(v3.fusion, Fusion::kMean);
  EXPECT_EQ(v4.fusion, Fusion::kWeighted);
  EXPECT_EQ(v3.left.counts, v4.left.counts);
  EXPECT_EQ(v3.right.counts, v4.right.counts);
  EXPECT_NE(v3.left.seed, v4.left.seed);
  EXPECT_NE(v3.right.seed, v4.right.seed);
  WiringConfig l3 = v3.left, l4 = v4.left;
  l4.seed = l3.seed;
  EXPECT_EQ(build_ncp(l3), build_ncp(l4));
}

TEST(ModelsTest, InitialPredictionsWithinUnitRange)
{
  for (Variant v : kAllVariants)
  {
    if (!is_recurrent(v))
    {
      continue;
    }
    Model        model(default_spec(v, 13));
    Tensor const out = model.forward(random_frames(8, 14));
    for (Real p : out.values())
    {
      EXPECT_LE(std::abs(p), 1.0) << variant_name(v);
    }
  }
}

TEST(ModelsTest, ParameterNamesAndValidation)
{
  Model const model(default_spec(Variant::kCnnDncp2, 0));
  NamedTensors params = model.parameters();
  EXPECT_EQ(params.count("left.sensory_w"), 1u);
  EXPECT_EQ(params.count("right.sensory_w"), 1u);
  EXPECT_NO_THROW(Model(model.spec(), params));

  NamedTensors extra = params;
  extra["bogus"]     = Tensor(Shape{1});
  EXPECT_THROW(Model(model.spec(), extra), FormatError);
  NamedTensors missing = params;
  missing.erase("latent.bias");
  EXPECT_THROW(Model(model.spec(), missing), FormatError);
  NamedTensors reshaped = params;
  reshaped["latent.bias"] = Tensor(Shape{99});
  EXPECT_THROW(Model(model.spec(), reshaped), FormatError);
}

TEST(ModelsTest, RejectsInconsistentSpec)
{
  ArchitectureSpec spec = default_spec(Variant::kCnnDncp2, 0);
  spec.left.counts.inter = 10;
  EXPECT_THROW(Model{spec}, ConfigError);
  spec         = default_spec(Variant::kCnnNcp, 0);
  spec.fusion  = Fusion::kWeighted;
  EXPECT_THROW(Model{spec}, ConfigError);
  spec         = default_spec(Variant::kCnn, 0);
  spec.dropout = 1;
  EXPECT_THROW(Model{spec}, ConfigError);
}

TEST(ModelsTest, RejectsWrongFrameShape)
{
  Model model(default_spec(Variant::kCnnNcp, 0));
  EXPECT_THROW(model.forward(Tensor(Shape{1, 66, 200, 1})), ShapeError);
  EXPECT_THROW(model.forward(Tensor(Shape{160, 320, 3})), ShapeError);
}

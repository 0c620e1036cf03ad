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


#include <bit>
#include <cstring>
#include <filesystem>

#include "gtest/gtest.h"

#include "ncpdrive/checkpoint.hpp"
#include "ncpdrive/config.hpp"

using namespace ncpdrive;

namespace {

// Independent little-endian writer of the documented layout.
struct Writer
{
  std::vector<std::uint8_t> bytes;

  void u32(std::uint32_t v)
  {
    bytes.push_back(v & 0xff);
    bytes.push_back((v >> 8) & 0xff);
    bytes.push_back((v >> 16) & 0xff);
    bytes.push_back((v >> 24) & 0xff);
  }
  void text(const std::string &s)
  {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
};

std::vector<std::uint8_t> expected_bytes(const Model &m)
{
  Writer w;
  w.bytes = {'N', 'C', 'P', 'D'};
  w.u32(1);
  w.text(format_spec(m.spec()));
  w.u32(static_cast<std::uint32_t>(m.parameters().size()));
  for (const auto &[name, t] : m.parameters())
  {
    w.text(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape())
    {
      w.u32(static_cast<std::uint32_t>(e));
    }
    for (Real v : t.values())
    {
      float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      w.u32(bits);
    }
  }
  return w.bytes;
}

std::uint64_t fnv1a(const std::vector<std::uint8_t> &bytes)
{
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : bytes)
  {
    h = (h ^ b) * 1099511628211ull;
  }
  return h;
}

std::string error_of(const std::vector<std::uint8_t> &bytes)
{
  try
  {
    deserialize_checkpoint(bytes);
  }
  catch (const FormatError &e)
  {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(CheckpointTest, BytesFollowDocumentedLayout)
{
  Model const m(default_spec(Variant::kCnnDncp1, 3));
  EXPECT_EQ(serialize_checkpoint(m), expected_bytes(m));
}

TEST(CheckpointTest, GoldenFingerprint)
{
  // Pins layout and initialisation together. A layout change must bump
  // kCheckpointVersion and refresh this value.
  Model const m(default_spec(Variant::kCnnDncp1, 3));
  auto const  bytes = serialize_checkpoint(m);
  EXPECT_EQ(kCheckpointVersion, 1u);
  EXPECT_EQ(bytes.size(), std::size_t{1016389});
  EXPECT_EQ(fnv1a(bytes), std::uint64_t{553690768198368880ull});
}

TEST(CheckpointTest, SaveLoadSaveIsFixedPoint)
{
  for (Variant v : {Variant::kCnn, Variant::kCnnNcp, Variant::kCnnDncp4})
  {
    Model m(default_spec(v, 8));
    // Move off the initial values so the test sees trained-looking numbers.
    for (auto &[name, t] : m.parameters())
    {
      for (std::size_t i = 0; i < t.size(); i += 7)
      {
        t[i] += Real(0.001) * static_cast<Real>(i % 13);
      }
      // The file stores 32-bit reals; the 64-bit build compares at that precision.
      for (Real &x : t.values())
      {
        x = static_cast<Real>(static_cast<float>(x));
      }
    }
    m.apply_constraints();
    auto const path = std::filesystem::temp_directory_path() / "ncpd_ckpt_test.ncpd";
    save_checkpoint(m, path);
    Model const loaded = load_checkpoint(path);
    EXPECT_EQ(loaded.spec(), m.spec());
    EXPECT_EQ(loaded.parameters(), m.parameters()) << variant_name(v);
    EXPECT_EQ(serialize_checkpoint(loaded), serialize_checkpoint(m));
    std::filesystem::remove(path);
  }
}

TEST(CheckpointTest, DualCircuitGroupsPresent)
{
  Model const m(default_spec(Variant::kCnnDncp2, 0));
  std::size_t left = 0, right = 0;
  for (const auto &[name, t] : m.parameters())
  {
    left += name.rfind("left.", 0) == 0;
    right += name.rfind("right.", 0) == 0;
  }
  EXPECT_GT(left, 0u);
  EXPECT_EQ(left, right);
  Model const back = deserialize_checkpoint(serialize_checkpoint(m));
  EXPECT_EQ(back.wirings().size(), 2u);
  EXPECT_EQ(back.wirings()[0].counts().inter, 9u);
}

TEST(CheckpointTest, CorruptionsAreReported)
{
  Model const m(default_spec(Variant::kCnnDncp1, 1));
  auto const  good = serialize_checkpoint(m);

  auto bad_magic = good;
  bad_magic[0]   = 'X';
  EXPECT_NE(error_of(bad_magic).find("format v1"), std::string::npos) << error_of(bad_magic);

  auto bad_version = good;
  bad_version[4]   = 2;
  EXPECT_NE(error_of(bad_version).find("v2"), std::string::npos);

  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_NE(error_of(truncated).find("truncated"), std::string::npos);

  auto trailing = good;
  trailing.push_back(0);
  EXPECT_NE(error_of(trailing).find("trailing"), std::string::npos);

  EXPECT_NE(error_of({}).find("magic"), std::string::npos);
}

TEST(CheckpointTest, UnknownTensorNameRejected)
{
  Model m(default_spec(Variant::kCnnDncp1, 1));
  NamedTensors extra = m.parameters();
  extra.emplace("bogus.weight", Tensor(Shape{2}));
  Writer w;
  w.bytes = {'N', 'C', 'P', 'D'};
  w.u32(1);
  w.text(format_spec(m.spec()));
  w.u32(static_cast<std::uint32_t>(extra.size()));
  for (const auto &[name, t] : extra)
  {
    w.text(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (Real v : t.values()) w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  EXPECT_NE(error_of(w.bytes).find("bogus.weight"), std::string::npos) << error_of(w.bytes);
}

TEST(CheckpointTest, MissingFileIsAnError)
{
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.ncpd"), Error);
}

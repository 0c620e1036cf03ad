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

#include "ncpdrive/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ncpdrive/config.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

namespace {

constexpr char kMagic[4] = {'N', 'C', 'P', 'D'};

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i)
  {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_bytes(std::vector<std::uint8_t> &out, const std::string &s)
{
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader
{
public:
  explicit Reader(std::span<const std::uint8_t> bytes)
    : bytes_(bytes)
  {}

  std::uint32_t u32()
  {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
    {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string text()
  {
    std::uint32_t const n = u32();
    need(n);
    std::string s(reinterpret_cast<const char *>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> raw(std::size_t n)
  {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const
  {
    return pos_ == bytes_.size();
  }

private:
  void need(std::size_t n) const
  {
    if (bytes_.size() - pos_ < n)
    {
      throw FormatError("truncated checkpoint (format v" + std::to_string(kCheckpointVersion) +
                        ")");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t                   pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model &model)
{
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_bytes(out, format_spec(model.spec()));
  put_u32(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto &[name, tensor] : model.parameters())
  {
    put_bytes(out, name);
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t e : tensor.shape())
    {
      put_u32(out, static_cast<std::uint32_t>(e));
    }
    for (Real v : tensor.values())
    {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Model deserialize_checkpoint(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
  {
    throw FormatError("not an ncpdrive checkpoint: bad magic (expected \"NCPD\", format v" +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Reader in(bytes.subspan(4));
  std::uint32_t const version = in.u32();
  if (version != kCheckpointVersion)
  {
    throw FormatError("unsupported checkpoint format v" + std::to_string(version) +
                      " (this build reads v" + std::to_string(kCheckpointVersion) + ")");
  }
  ArchitectureSpec spec;
  try
  {
    spec = parse_spec(in.text());
  }
  catch (const ConfigError &e)
  {
    throw FormatError(std::string("checkpoint architecture: ") + e.what());
  }
  std::uint32_t const count = in.u32();
  NamedTensors        params;
  for (std::uint32_t t = 0; t < count; ++t)
  {
    std::string const   name = in.text();
    std::uint32_t const rank = in.u32();
    if (rank > 8)
    {
      throw FormatError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    }
    Shape       shape;
    std::size_t elements = 1;
    for (std::uint32_t r = 0; r < rank; ++r)
    {
      shape.push_back(in.u32());
      if (shape.back() == 0)
      {
        throw FormatError("tensor '" + name + "' has a zero extent");
      }
      elements *= shape.back();
      if (elements > (std::size_t{1} << 32))
      {
        throw FormatError("tensor '" + name + "' is implausibly large");
      }
    }
    auto const raw = in.raw(elements * 4);
    Tensor     tensor(shape);
    for (std::size_t i = 0; i < elements; ++i)
    {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
      {
        bits |= static_cast<std::uint32_t>(raw[i * 4 + b]) << (8 * b);
      }
      tensor[i] = static_cast<Real>(std::bit_cast<float>(bits));
    }
    if (!params.emplace(name, std::move(tensor)).second)
    {
      throw FormatError("duplicate tensor '" + name + "' in checkpoint");
    }
  }
  if (!in.done())
  {
    throw FormatError("trailing bytes after checkpoint tensors");
  }
  try
  {
    return Model(spec, std::move(params));
  }
  catch (const ConfigError &e)
  {
    throw FormatError(std::string("checkpoint architecture: ") + e.what());
  }
}

void save_checkpoint(const Model &model, const std::filesystem::path &path)
{
  std::vector<std::uint8_t> const bytes = serialize_checkpoint(model);
  std::ofstream                   out(path, std::ios::binary);
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
  {
    throw Error("cannot write checkpoint " + path.string());
  }
}

Model load_checkpoint(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw Error("cannot open checkpoint " + path.string());
  }
  std::vector<std::uint8_t> const bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace ncpdrive

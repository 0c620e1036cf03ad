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

#include "ncpdrive/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ncpdrive::inline NCPD_PRECISION_NS {

std::uint64_t splitmix64(std::uint64_t &state)
{
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z               = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  z               = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31U);
}

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k)
{
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed)
{
  std::uint64_t sm = seed;
  for (auto &word : state_)
  {
    word = splitmix64(sm);
  }
}

std::uint64_t Rng::next_u64()
{
  std::uint64_t const result = rotl(state_[0] + state_[3], 23) + state_[0];
  std::uint64_t const t      = state_[1] << 17U;

  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);

  return result;
}

double Rng::uniform()
{
  return static_cast<double>(next_u64() >> 11U) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi)
{
  return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::below(std::uint64_t n)
{
  if (n == 0)
  {
    throw std::invalid_argument("Rng::below needs a positive bound");
  }
  // Rejection sampling keeps the draw unbiased.
  std::uint64_t const limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t       x     = next_u64();
  while (x >= limit)
  {
    x = next_u64();
  }
  return x % n;
}

double Rng::normal()
{
  double u1 = uniform();
  while (u1 <= 0.0)
  {
    u1 = uniform();
  }
  double const u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double stddev)
{
  return mean + stddev * normal();
}

bool Rng::bernoulli(double p)
{
  return uniform() < p;
}

std::vector<std::size_t> Rng::sample_distinct(std::size_t n, std::size_t k)
{
  if (k > n)
  {
    throw std::invalid_argument("cannot draw " + std::to_string(k) + " distinct values from " +
                                std::to_string(n));
  }
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    pool[i] = i;
  }
  // Partial Fisher-Yates: the first k slots end up as the sample.
  for (std::size_t i = 0; i < k; ++i)
  {
    std::size_t j = i + static_cast<std::size_t>(below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream)
{
  std::uint64_t mix = seed;
  std::uint64_t a   = splitmix64(mix);
  std::uint64_t s   = stream * 0xd1b54a32d192ed03ULL;
  return Rng(a ^ splitmix64(s));
}

}  // namespace ncpdrive

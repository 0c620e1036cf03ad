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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ncpdrive/common.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

/// xoshiro256++ seeded through splitmix64.
///
/// Only integer arithmetic is used to advance the state, so a given seed yields
/// the same stream on every platform. Floating-point draws are derived from the
/// top 53 bits of each output.
class Rng
{
public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal draw (Box-Muller, one value per call).
  double normal();
  double normal(double mean, double stddev);

  bool bernoulli(double p);

  /// k distinct values from [0, n) in draw order.
  std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k);

  template <typename T>
  void shuffle(std::span<T> items)
  {
    // Fisher-Yates; std::shuffle is implementation-defined.
    for (std::size_t i = items.size(); i > 1; --i)
    {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T> &items)
  {
    shuffle(std::span<T>(items));
  }

  /// Independent generator for sub-stream `stream` of `seed`.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

private:
  std::array<std::uint64_t, 4> state_{};
};

std::uint64_t splitmix64(std::uint64_t &state);

}  // namespace ncpdrive

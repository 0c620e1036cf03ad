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
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ncpdrive/common.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape &shape);
std::string shape_string(const Shape &shape);

/// Dense row-major array of reals.
///
/// A rank-0 tensor (empty shape) holds exactly one element and is used for
/// scalar losses. Every extent of a non-scalar tensor is strictly positive.
class Tensor
{
public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor scalar(Real value);
  static Tensor vector(std::vector<Real> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<Real>> rows);

  const Shape &shape() const noexcept
  {
    return shape_;
  }
  std::size_t rank() const noexcept
  {
    return shape_.size();
  }
  std::size_t size() const noexcept
  {
    return values_.size();
  }
  std::size_t dim(std::size_t axis) const;
  bool empty() const noexcept
  {
    return values_.empty();
  }

  std::span<Real> values() noexcept
  {
    return values_;
  }
  std::span<const Real> values() const noexcept
  {
    return values_;
  }
  Real *data() noexcept
  {
    return values_.data();
  }
  const Real *data() const noexcept
  {
    return values_.data();
  }

  Real &operator[](std::size_t i)
  {
    return values_[i];
  }
  Real operator[](std::size_t i) const
  {
    return values_[i];
  }

  Real &at(std::initializer_list<std::size_t> index);
  Real at(std::initializer_list<std::size_t> index) const;

  /// Scalar value of a one-element tensor.
  Real item() const;

  /// Same elements viewed under a new shape with equal element count.
  Tensor reshaped(Shape shape) const &;
  Tensor reshaped(Shape shape) &&;

  void fill(Real value);
  bool all_finite() const;

  friend bool operator==(const Tensor &a, const Tensor &b)
  {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape             shape_;
  std::vector<Real> values_;
};

/// Tensors keyed by parameter name, ordered by name.
using NamedTensors = std::map<std::string, Tensor>;

}  // namespace ncpdrive

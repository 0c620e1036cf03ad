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

#include "ncpdrive/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <utility>

namespace ncpdrive::inline NCPD_PRECISION_NS {

std::size_t shape_size(const Shape &shape)
{
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape &shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i)
  {
    if (i > 0)
    {
      os << 'x';
    }
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape &shape)
{
  for (auto extent : shape)
  {
    if (extent == 0)
    {
      throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, Real fill)
  : shape_(std::move(shape))
{
  check_extents(shape_);
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> values)
  : shape_(std::move(shape))
  , values_(std::move(values))
{
  check_extents(shape_);
  if (values_.size() != shape_size(shape_))
  {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " needs " +
                     std::to_string(shape_size(shape_)) + " values, got " +
                     std::to_string(values_.size()));
  }
}

Tensor Tensor::scalar(Real value)
{
  return Tensor(Shape{}, std::vector<Real>{value});
}

Tensor Tensor::vector(std::vector<Real> values)
{
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<Real>> rows)
{
  std::size_t       cols = rows.size() == 0 ? 0 : rows.begin()->size();
  std::vector<Real> values;
  values.reserve(rows.size() * cols);
  for (const auto &row : rows)
  {
    if (row.size() != cols)
    {
      throw ShapeError("ragged matrix literal");
    }
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(Shape{rows.size(), cols}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const
{
  if (axis >= shape_.size())
  {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const
{
  if (index.size() != shape_.size())
  {
    throw ShapeError("index rank " + std::to_string(index.size()) + " does not match " +
                     shape_string(shape_));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index)
  {
    if (i >= shape_[axis])
    {
      throw ShapeError("index out of range for " + shape_string(shape_));
    }
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

Real &Tensor::at(std::initializer_list<std::size_t> index)
{
  return values_[offset(index)];
}

Real Tensor::at(std::initializer_list<std::size_t> index) const
{
  return values_[offset(index)];
}

Real Tensor::item() const
{
  if (values_.size() != 1)
  {
    throw ShapeError("item() needs a single element, shape is " + shape_string(shape_));
  }
  return values_[0];
}

Tensor Tensor::reshaped(Shape shape) const &
{
  return Tensor(std::move(shape), values_);
}

Tensor Tensor::reshaped(Shape shape) &&
{
  return Tensor(std::move(shape), std::move(values_));
}

void Tensor::fill(Real value)
{
  std::fill(values_.begin(), values_.end(), value);
}

bool Tensor::all_finite() const
{
  return std::all_of(values_.begin(), values_.end(), [](Real v) { return std::isfinite(v); });
}

}  // namespace ncpdrive

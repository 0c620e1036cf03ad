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

#include "ncpdrive/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

namespace ncpdrive::inline NCPD_PRECISION_NS {

namespace {

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using CMapMatrix = Eigen::Map<const RowMatrix>;

CMapMatrix as_matrix(const Real *data, std::size_t rows, std::size_t cols)
{
  return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

MapMatrix as_matrix(Real *data, std::size_t rows, std::size_t cols)
{
  return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

struct ConvGeometry
{
  std::size_t batch;
  std::size_t height;
  std::size_t width;
  std::size_t channels;
  std::size_t kernel;
  std::size_t filters;
  std::size_t stride;
  std::size_t out_h;
  std::size_t out_w;

  std::size_t patch() const
  {
    return kernel * kernel * channels;
  }
  std::size_t positions() const
  {
    return out_h * out_w;
  }
  std::size_t in_sample() const
  {
    return height * width * channels;
  }
  std::size_t out_sample() const
  {
    return out_h * out_w * filters;
  }
};

ConvGeometry conv_geometry(const Shape &input, const Shape &kernels, std::size_t stride)
{
  if (input.size() != 3 && input.size() != 4)
  {
    throw ShapeError("conv2d input must be HxWxC or NxHxWxC, got " + shape_string(input));
  }
  if (kernels.size() != 4 || kernels[0] != kernels[1])
  {
    throw ShapeError("conv2d kernels must be KxKxCxF, got " + shape_string(kernels));
  }
  if (stride == 0)
  {
    throw ShapeError("conv2d stride must be positive");
  }
  std::size_t const lead = input.size() - 3;
  ConvGeometry      g{};
  g.batch    = lead == 1 ? input[0] : 1;
  g.height   = input[lead];
  g.width    = input[lead + 1];
  g.channels = input[lead + 2];
  g.kernel   = kernels[0];
  g.filters  = kernels[3];
  g.stride   = stride;
  if (kernels[2] != g.channels)
  {
    throw ShapeError("conv2d channel mismatch: input " + shape_string(input) + ", kernels " +
                     shape_string(kernels));
  }
  if (g.kernel > g.height || g.kernel > g.width)
  {
    throw ShapeError("conv2d kernel " + shape_string(kernels) + " larger than input " +
                     shape_string(input));
  }
  g.out_h = conv_output_extent(g.height, g.kernel, stride);
  g.out_w = conv_output_extent(g.width, g.kernel, stride);
  return g;
}

Shape conv_output_shape(const Shape &input, const ConvGeometry &g)
{
  if (input.size() == 4)
  {
    return {g.batch, g.out_h, g.out_w, g.filters};
  }
  return {g.out_h, g.out_w, g.filters};
}

// Patch matrix of one sample: row p = output position, columns ordered
// (ky, kx, c) to match the row-major KxKxC prefix of the kernel tensor.
void im2col(const Real *sample, const ConvGeometry &g, Real *cols)
{
  std::size_t const row_len = g.kernel * g.channels;
  for (std::size_t oy = 0; oy < g.out_h; ++oy)
  {
    for (std::size_t ox = 0; ox < g.out_w; ++ox)
    {
      Real *dst = cols + (oy * g.out_w + ox) * g.patch();
      for (std::size_t ky = 0; ky < g.kernel; ++ky)
      {
        const Real *src = sample + ((oy * g.stride + ky) * g.width + ox * g.stride) * g.channels;
        std::copy(src, src + row_len, dst + ky * row_len);
      }
    }
  }
}

void col2im_add(const Real *cols, const ConvGeometry &g, Real *sample)
{
  std::size_t const row_len = g.kernel * g.channels;
  for (std::size_t oy = 0; oy < g.out_h; ++oy)
  {
    for (std::size_t ox = 0; ox < g.out_w; ++ox)
    {
      const Real *src = cols + (oy * g.out_w + ox) * g.patch();
      for (std::size_t ky = 0; ky < g.kernel; ++ky)
      {
        Real       *dst = sample + ((oy * g.stride + ky) * g.width + ox * g.stride) * g.channels;
        const Real *row = src + ky * row_len;
        for (std::size_t i = 0; i < row_len; ++i)
        {
          dst[i] += row[i];
        }
      }
    }
  }
}

template <typename F>
Tensor map_unary(const Tensor &x, F f)
{
  Tensor out(x.shape());
  auto   src = x.values();
  auto   dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i)
  {
    dst[i] = f(src[i]);
  }
  return out;
}

template <typename F>
Tensor map_binary(const Tensor &a, const Tensor &b, const char *what, F f)
{
  require_same_shape(a, b, what);
  Tensor out(a.shape());
  auto   lhs = a.values();
  auto   rhs = b.values();
  auto   dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i)
  {
    dst[i] = f(lhs[i], rhs[i]);
  }
  return out;
}

}  // namespace

void require_same_shape(const Tensor &a, const Tensor &b, const char *what)
{
  if (a.shape() != b.shape())
  {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

Tensor matmul(const Tensor &a, const Tensor &b, bool transpose_a, bool transpose_b)
{
  if (a.rank() != 2 || b.rank() != 2)
  {
    throw ShapeError("matmul needs rank-2 operands, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  std::size_t const m  = transpose_a ? a.dim(1) : a.dim(0);
  std::size_t const ka = transpose_a ? a.dim(0) : a.dim(1);
  std::size_t const kb = transpose_b ? b.dim(1) : b.dim(0);
  std::size_t const n  = transpose_b ? b.dim(0) : b.dim(1);
  if (ka != kb)
  {
    throw ShapeError("matmul inner extents differ: " + shape_string(a.shape()) +
                     (transpose_a ? "^T" : "") + " x " + shape_string(b.shape()) +
                     (transpose_b ? "^T" : ""));
  }
  Tensor out(Shape{m, n});
  auto   lhs = as_matrix(a.data(), a.dim(0), a.dim(1));
  auto   rhs = as_matrix(b.data(), b.dim(0), b.dim(1));
  auto   dst = as_matrix(out.data(), m, n);
  if (transpose_a && transpose_b)
  {
    dst.noalias() = lhs.transpose() * rhs.transpose();
  }
  else if (transpose_a)
  {
    dst.noalias() = lhs.transpose() * rhs;
  }
  else if (transpose_b)
  {
    dst.noalias() = lhs * rhs.transpose();
  }
  else
  {
    dst.noalias() = lhs * rhs;
  }
  return out;
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride)
{
  if (kernel > in || stride == 0)
  {
    throw ShapeError("invalid convolution extent: input " + std::to_string(in) + ", kernel " +
                     std::to_string(kernel) + ", stride " + std::to_string(stride));
  }
  return (in - kernel) / stride + 1;
}

Tensor conv2d(const Tensor &input, const Tensor &kernels, std::size_t stride)
{
  ConvGeometry const g = conv_geometry(input.shape(), kernels.shape(), stride);
  Tensor             out(conv_output_shape(input.shape(), g));
  std::vector<Real>  cols(g.positions() * g.patch());
  auto const         weights = as_matrix(kernels.data(), g.patch(), g.filters);
  for (std::size_t n = 0; n < g.batch; ++n)
  {
    im2col(input.data() + n * g.in_sample(), g, cols.data());
    auto dst = as_matrix(out.data() + n * g.out_sample(), g.positions(), g.filters);
    dst.noalias() = as_matrix(static_cast<const Real *>(cols.data()), g.positions(), g.patch()) * weights;
  }
  return out;
}

Tensor conv2d_grad_input(const Tensor &grad_out, const Tensor &kernels, const Shape &input_shape,
                         std::size_t stride)
{
  ConvGeometry const g = conv_geometry(input_shape, kernels.shape(), stride);
  if (grad_out.shape() != conv_output_shape(input_shape, g))
  {
    throw ShapeError("conv2d gradient shape " + shape_string(grad_out.shape()) +
                     " does not match output of " + shape_string(input_shape));
  }
  Tensor            grad_in(input_shape);
  std::vector<Real> cols(g.positions() * g.patch());
  auto const        weights = as_matrix(kernels.data(), g.patch(), g.filters);
  for (std::size_t n = 0; n < g.batch; ++n)
  {
    auto dcols = as_matrix(cols.data(), g.positions(), g.patch());
    dcols.noalias() =
        as_matrix(grad_out.data() + n * g.out_sample(), g.positions(), g.filters) * weights.transpose();
    col2im_add(cols.data(), g, grad_in.data() + n * g.in_sample());
  }
  return grad_in;
}

Tensor conv2d_grad_kernels(const Tensor &input, const Tensor &grad_out, const Shape &kernel_shape,
                           std::size_t stride)
{
  ConvGeometry const g = conv_geometry(input.shape(), kernel_shape, stride);
  if (grad_out.shape() != conv_output_shape(input.shape(), g))
  {
    throw ShapeError("conv2d gradient shape " + shape_string(grad_out.shape()) +
                     " does not match output of " + shape_string(input.shape()));
  }
  Tensor            grad_k(kernel_shape);
  std::vector<Real> cols(g.positions() * g.patch());
  auto              dst = as_matrix(grad_k.data(), g.patch(), g.filters);
  for (std::size_t n = 0; n < g.batch; ++n)
  {
    im2col(input.data() + n * g.in_sample(), g, cols.data());
    dst.noalias() += as_matrix(static_cast<const Real *>(cols.data()), g.positions(), g.patch()).transpose() *
                     as_matrix(grad_out.data() + n * g.out_sample(), g.positions(), g.filters);
  }
  return grad_k;
}

Real sigmoid(Real x)
{
  // Split by sign so exp never overflows.
  if (x >= Real(0))
  {
    return Real(1) / (Real(1) + std::exp(-x));
  }
  Real const e = std::exp(x);
  return e / (Real(1) + e);
}

Tensor relu(const Tensor &x)
{
  return map_unary(x, [](Real v) { return v > Real(0) ? v : Real(0); });
}

Tensor sigmoid(const Tensor &x)
{
  return map_unary(x, [](Real v) { return sigmoid(v); });
}

Tensor add(const Tensor &a, const Tensor &b)
{
  return map_binary(a, b, "add", [](Real x, Real y) { return x + y; });
}

Tensor sub(const Tensor &a, const Tensor &b)
{
  return map_binary(a, b, "sub", [](Real x, Real y) { return x - y; });
}

Tensor mul(const Tensor &a, const Tensor &b)
{
  return map_binary(a, b, "mul", [](Real x, Real y) { return x * y; });
}

Tensor div(const Tensor &a, const Tensor &b)
{
  return map_binary(a, b, "div", [](Real x, Real y) { return x / y; });
}

Tensor scale(const Tensor &x, Real factor)
{
  return map_unary(x, [factor](Real v) { return v * factor; });
}

Tensor add_scalar(const Tensor &x, Real offset)
{
  return map_unary(x, [offset](Real v) { return v + offset; });
}

Real sum(const Tensor &x)
{
  // Accumulate in double so 32-bit reductions over large tensors stay accurate.
  double total = 0.0;
  for (Real v : x.values())
  {
    total += static_cast<double>(v);
  }
  return static_cast<Real>(total);
}

Real mean(const Tensor &x)
{
  if (x.empty())
  {
    throw ShapeError("mean of an empty tensor");
  }
  double total = 0.0;
  for (Real v : x.values())
  {
    total += static_cast<double>(v);
  }
  return static_cast<Real>(total / static_cast<double>(x.size()));
}

Tensor flatten(const Tensor &x)
{
  return x.reshaped(Shape{x.size()});
}

Tensor slice(const Tensor &x, std::size_t axis, std::size_t start, std::size_t length)
{
  if (axis >= x.rank() || length == 0 || start + length > x.dim(axis))
  {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") on axis " + std::to_string(axis) + " out of range for " +
                     shape_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[axis] = length;
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i)
  {
    outer *= x.dim(i);
  }
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < x.rank(); ++i)
  {
    inner *= x.dim(i);
  }
  Tensor      out(shape);
  const Real *src = x.data();
  Real       *dst = out.data();
  for (std::size_t o = 0; o < outer; ++o)
  {
    const Real *from = src + (o * x.dim(axis) + start) * inner;
    dst              = std::copy(from, from + length * inner, dst);
  }
  return out;
}

}  // namespace ncpdrive

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

#include "ncpdrive/tensor.hpp"

// Primitive numerical kernels over Tensor values. All of them are pure: inputs
// are never modified and a fresh tensor is returned.
namespace ncpdrive::inline NCPD_PRECISION_NS {

/// Matrix product of rank-2 tensors, optionally transposing either operand.
Tensor matmul(const Tensor &a, const Tensor &b, bool transpose_a = false,
              bool transpose_b = false);

/// Valid (unpadded) 2-D cross-correlation.
///
/// `input` is H x W x C, or N x H x W x C for a batch. `kernels` is
/// K x K x C x F. The output is H' x W' x F (resp. N x H' x W' x F) with
/// H' = (H - K) / stride + 1. No kernel flip is applied.
Tensor conv2d(const Tensor &input, const Tensor &kernels, std::size_t stride);

/// Gradient of conv2d with respect to its input.
Tensor conv2d_grad_input(const Tensor &grad_out, const Tensor &kernels,
                         const Shape &input_shape, std::size_t stride);

/// Gradient of conv2d with respect to its kernels.
Tensor conv2d_grad_kernels(const Tensor &input, const Tensor &grad_out,
                           const Shape &kernel_shape, std::size_t stride);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride);

Tensor relu(const Tensor &x);
Tensor sigmoid(const Tensor &x);
Real   sigmoid(Real x);

Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor div(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &x, Real factor);
Tensor add_scalar(const Tensor &x, Real offset);

Real sum(const Tensor &x);
Real mean(const Tensor &x);

/// Rank-1 view of all elements.
Tensor flatten(const Tensor &x);

/// Contiguous sub-range [start, start + length) along `axis`.
Tensor slice(const Tensor &x, std::size_t axis, std::size_t start, std::size_t length);

/// Throws ShapeError naming both shapes unless they are identical.
void require_same_shape(const Tensor &a, const Tensor &b, const char *what);

}  // namespace ncpdrive

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

#include <stdexcept>
#include <string>

// Scalar type used by every kernel. The default build uses 32-bit reals; the
// verification build (NCPD_REAL=double) recompiles the whole library in
// 64-bit so finite-difference checks have enough headroom.
#ifndef NCPD_REAL
#define NCPD_REAL float
#define NCPD_PRECISION_NS f32
#endif

#ifndef NCPD_PRECISION_NS
#error "NCPD_PRECISION_NS must accompany a custom NCPD_REAL"
#endif

// Symbols live in a precision-tagged inline namespace so the 32-bit and
// 64-bit builds of the library can be linked into the same executable.
namespace ncpdrive::inline NCPD_PRECISION_NS {

using Real = NCPD_REAL;

inline constexpr bool kDoublePrecision = sizeof(Real) == sizeof(double);

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

class FormatError : public Error
{
public:
  using Error::Error;
};

// Raised when a non-finite loss or gradient shows up during optimisation.
class NumericError : public Error
{
public:
  using Error::Error;
};

}  // namespace ncpdrive

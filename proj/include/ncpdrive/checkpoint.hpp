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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ncpdrive/models.hpp"

// Binary checkpoint, all integers unsigned 32-bit little-endian:
//
//   "NCPD" | version | config length | config text (UTF-8)
//   | tensor count | per tensor: name length | name | rank | extents...
//   | elements as 32-bit little-endian IEEE floats
//
// The config text is the architecture description (format_spec). Tensors are
// written in name order.
namespace ncpdrive::inline NCPD_PRECISION_NS {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Model &model);
Model                     deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void  save_checkpoint(const Model &model, const std::filesystem::path &path);
Model load_checkpoint(const std::filesystem::path &path);

}  // namespace ncpdrive

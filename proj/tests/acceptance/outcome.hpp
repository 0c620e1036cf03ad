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

#include <string>

// Shared between the 32-bit driver and the 64-bit gradient check, so it must
// not include any library header.
namespace acceptance {

struct Outcome
{
  bool        pass = false;
  std::string detail;
};

/// Criterion 1, built against the 64-bit library.
Outcome check_gradients();

}  // namespace acceptance

// Copyright 2026 The UDA Forge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uda {

struct GradCheckResult {
  std::string name;
  int instances = 0;
  double max_rel_error = 0;
};

// Compares every hand-written backward pass against 64-bit central
// differences on `instances` random cases each: linear, conv2d (both
// strides), activations, each loss, and the full student objective in both
// training modes. The adversarial case checks the reversed gradient against
// finite differences of the task and discriminator terms taken separately.
std::vector<GradCheckResult> run_grad_suite(std::uint64_t seed, int instances = 20);

double max_error(const std::vector<GradCheckResult>& results);

}  // namespace uda

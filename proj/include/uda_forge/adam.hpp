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
#include <vector>

#include "uda_forge/param_set.hpp"

namespace uda {

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments shape-match the parameters they were created for. `lr` holds one
// learning rate per parameter tensor so backbone and head can differ.
struct AdamState {
  AdamHyper hyper;
  ParamSet<float> m;
  ParamSet<float> v;
  std::vector<double> lr;
  std::int64_t step = 0;
};

AdamState make_adam_state(const ParamSet<float>& params, const AdamHyper& hyper);

// Bias-corrected Adam update. Throws kNonFinite on a non-finite gradient,
// leaving params and state untouched.
void adam_step(ParamSet<float>& params, const ParamSet<float>& grads,
               AdamState& state);

}  // namespace uda

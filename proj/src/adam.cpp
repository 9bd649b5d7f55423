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

#include "uda_forge/adam.hpp"

#include <cmath>

namespace uda {

AdamState make_adam_state(const ParamSet<float>& params, const AdamHyper& hyper) {
  AdamState s;
  s.hyper = hyper;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.lr.assign(params.size(), hyper.lr);
  return s;
}

void adam_step(ParamSet<float>& params, const ParamSet<float>& grads,
               AdamState& state) {
  require_same_layout(params, grads, "adam_step");
  require_same_layout(params, state.m, "adam_step moments");
  require(state.lr.size() == params.size(), ErrorCode::kInvalidArgument,
          "adam_step: learning-rate table does not match parameter count");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    grads[i].check_finite("gradient of " + grads.name(i));
  }

  ++state.step;
  const auto& h = state.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    const double lr = state.lr[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = h.beta1 * m[j] + (1.0 - h.beta1) * gj;
      const double vj = h.beta2 * v[j] + (1.0 - h.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double m_hat = mj / bc1;
      const double v_hat = vj / bc2;
      p[j] = static_cast<float>(p[j] - lr * m_hat / (std::sqrt(v_hat) + h.eps));
    }
  }
}

}  // namespace uda

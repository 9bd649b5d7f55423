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

#include <array>
#include <span>
#include <vector>

#include "uda_forge/detector.hpp"
#include "uda_forge/losses.hpp"

namespace uda {

struct ObjectiveOptions {
  TrainMode mode = TrainMode::kAdapt;
  double lambda_unsup = 1.0;
  double lambda_mask = 1.0;
  std::array<double, kStageCount> betas{0.3, 1.0, 1.0};
  double grl_lambda = 1.0;
  bool adversarial = true;
  bool mae = true;
  bool mask_loss_masked_only = true;
};

// One student input. Source items carry ground truth, target items carry the
// teacher's filtered pseudo-label boxes (possibly none).
template <typename T>
struct ObjectiveItem {
  BasicTensor<T> image;
  Domain domain = Domain::kSource;
  std::vector<Box> targets;
  MaskPattern mask;  // consulted only when the MAE branch is on
};

// Full student objective over a batch:
//   l_sup   mean detection loss over source items
//   l_unsup mean detection loss over target items
//   l_dis   per-stage discriminator BCE, mean over all items
//   l_mask  mean masked-reconstruction MSE over all items
// When `grads` is non-null it receives d l_total / d params (including the
// path through the reconstruction target X_K), except that gradients reaching
// the features through a discriminator are reversed (scaled by -grl_lambda).
template <typename T>
LossBreakdown student_objective(const ParamSet<T>& p, std::span<const ObjectiveItem<T>> batch,
                                const ObjectiveOptions& options, ParamSet<T>* grads);

// Per-stage discriminator logits for one image (no masking).
template <typename T>
std::array<double, kStageCount> domain_logits(const ParamSet<T>& p, const BasicTensor<T>& image);

}  // namespace uda

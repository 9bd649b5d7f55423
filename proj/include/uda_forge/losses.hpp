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
#include "uda_forge/synthdata.hpp"

namespace uda {

struct LossBreakdown {
  double l_sup = 0;
  double l_unsup = 0;
  std::array<double, kStageCount> l_dis{};  // backbone, encoder, decoder
  double l_adv = 0;  // beta-weighted sum of l_dis, reported before reversal
  double l_mask = 0;
  double l_teach = 0;
  double l_total = 0;
};

template <typename T>
struct LossGrad {
  double value = 0;
  BasicTensor<T> grad;  // d value / d input
};

struct PositiveCell {
  int cell = 0;
  Box box;
};

// A cell is positive when a box center falls in it. Centers exactly on a
// cell border go to the lower index. When several boxes share a cell the
// lexicographically smallest (cx, cy, w, h) wins, so the result does not
// depend on box order.
std::vector<PositiveCell> assign_positive_cells(std::span<const Box> boxes, int grid_h,
                                                int grid_w);

// Mean-over-cells objectness BCE plus (1/|pos|) * sum of smooth-L1 box terms
// over positive cells. raw is [grid_h*grid_w x 5].
template <typename T>
LossGrad<T> supervised_loss(const BasicTensor<T>& raw, std::span<const Box> gt, int grid_w);

// Same form with teacher pseudo-labels as hard targets.
template <typename T>
LossGrad<T> unsupervised_loss(const BasicTensor<T>& raw, const std::vector<Detection>& pseudo,
                              int grid_w);

// Binary cross-entropy of a logit against a {0,1} label; writes d/dlogit.
double bce_with_logit(double logit, double label, double* d_logit);

inline constexpr double kSourceLabel = 0.0;
inline constexpr double kTargetLabel = 1.0;

struct AdversarialLoss {
  std::array<double, kStageCount> per_stage{};
  double combined = 0;
  std::array<double, kStageCount> d_logits{};  // d combined / d logit
};

AdversarialLoss adversarial_losses(const std::array<double, kStageCount>& logits,
                                   double domain_label,
                                   const std::array<double, kStageCount>& betas);

// MSE between reconstruction and original level-K maps ([C x H x W]) over the
// masked cells and all channels; 0 when nothing is masked. With
// masked_only = false the mean runs over the whole map.
template <typename T>
LossGrad<T> mask_loss(const BasicTensor<T>& reconstructed, const BasicTensor<T>& original,
                      const MaskPattern& pattern, bool masked_only = true);

enum class TrainMode { kSourcePretrain, kAdapt };

struct LossParts {
  double l_sup = 0;
  double l_unsup = 0;
  std::array<double, kStageCount> l_dis{};
  std::array<double, kStageCount> betas{0.3, 1.0, 1.0};
  double l_mask = 0;
};

// l_teach = l_sup + lambda_unsup * l_unsup + l_adv,
// l_total = l_teach + lambda_mask * l_mask (MAE branch active only).
// Source pretraining carries no unsupervised or adversarial term.
LossBreakdown total_loss(const LossParts& parts, double lambda_unsup, double lambda_mask,
                         bool mae_active, TrainMode mode);

}  // namespace uda

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

#include "uda_forge/losses.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "uda_forge/ops.hpp"

namespace uda {
namespace {

int cell_coordinate(double center, int extent) {
  const double scaled = center / kCellPitch;
  int idx = static_cast<int>(std::floor(scaled));
  if (idx > 0 && scaled == static_cast<double>(idx)) --idx;  // border -> lower cell
  return std::clamp(idx, 0, extent - 1);
}

bool box_less(const Box& a, const Box& b) {
  return std::tie(a.cx, a.cy, a.w, a.h) < std::tie(b.cx, b.cy, b.w, b.h);
}

double smooth_l1(double x, double* dx) {
  const double ax = std::abs(x);
  if (ax < 1.0) {
    *dx = x;
    return 0.5 * x * x;
  }
  *dx = x > 0 ? 1.0 : -1.0;
  return ax - 0.5;
}

}  // namespace

std::vector<PositiveCell> assign_positive_cells(std::span<const Box> boxes, int grid_h,
                                                int grid_w) {
  std::vector<PositiveCell> out;
  for (const Box& b : boxes) {
    const int cell = cell_coordinate(b.cy, grid_h) * grid_w + cell_coordinate(b.cx, grid_w);
    auto it = std::find_if(out.begin(), out.end(),
                           [cell](const PositiveCell& p) { return p.cell == cell; });
    if (it == out.end()) {
      out.push_back({cell, b});
    } else if (box_less(b, it->box)) {
      it->box = b;
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PositiveCell& a, const PositiveCell& b) { return a.cell < b.cell; });
  return out;
}

double bce_with_logit(double logit, double label, double* d_logit) {
  if (d_logit) *d_logit = sigmoid(logit) - label;
  return softplus(logit) - label * logit;
}

template <typename T>
LossGrad<T> supervised_loss(const BasicTensor<T>& raw, std::span<const Box> gt, int grid_w) {
  require(raw.rank() == 2 && raw.dim(1) == kHeadOutputs && grid_w > 0 &&
              raw.dim(0) % grid_w == 0,
          ErrorCode::kShapeMismatch, "detection loss: expected raw [cells x 5]");
  const int cells = raw.dim(0);
  const int grid_h = cells / grid_w;
  const std::vector<PositiveCell> positives = assign_positive_cells(gt, grid_h, grid_w);

  std::vector<std::uint8_t> is_pos(static_cast<std::size_t>(cells), 0);
  for (const auto& p : positives) is_pos[static_cast<std::size_t>(p.cell)] = 1;

  LossGrad<T> out;
  out.grad = BasicTensor<T>(raw.shape());
  double cls = 0;
  const double inv_cells = 1.0 / cells;
  for (int c = 0; c < cells; ++c) {
    double d = 0;
    cls += bce_with_logit(static_cast<double>(raw.at(c, 0)), is_pos[static_cast<std::size_t>(c)],
                          &d);
    out.grad.at(c, 0) = static_cast<T>(d * inv_cells);
  }
  double box = 0;
  if (!positives.empty()) {
    const double inv_pos = 1.0 / static_cast<double>(positives.size());
    for (const auto& p : positives) {
      const auto target = encode_box_target(p.box, p.cell, grid_w);
      for (int k = 0; k < 4; ++k) {
        double d = 0;
        box += smooth_l1(static_cast<double>(raw.at(p.cell, k + 1)) - target[static_cast<std::size_t>(k)], &d);
        out.grad.at(p.cell, k + 1) = static_cast<T>(d * inv_pos);
      }
    }
    box *= inv_pos;
  }
  out.value = cls * inv_cells + box;
  return out;
}

template <typename T>
LossGrad<T> unsupervised_loss(const BasicTensor<T>& raw, const std::vector<Detection>& pseudo,
                              int grid_w) {
  std::vector<Box> boxes;
  boxes.reserve(pseudo.size());
  for (const Detection& d : pseudo) boxes.push_back(d.box);
  return supervised_loss(raw, std::span<const Box>(boxes), grid_w);
}

AdversarialLoss adversarial_losses(const std::array<double, kStageCount>& logits,
                                   double domain_label,
                                   const std::array<double, kStageCount>& betas) {
  require(domain_label == kSourceLabel || domain_label == kTargetLabel,
          ErrorCode::kInvalidArgument, "domain label must be 0 (source) or 1 (target)");
  AdversarialLoss out;
  for (std::size_t s = 0; s < kStageCount; ++s) {
    double d = 0;
    out.per_stage[s] = bce_with_logit(logits[s], domain_label, &d);
    out.combined += betas[s] * out.per_stage[s];
    out.d_logits[s] = betas[s] * d;
  }
  return out;
}

template <typename T>
LossGrad<T> mask_loss(const BasicTensor<T>& reconstructed, const BasicTensor<T>& original,
                      const MaskPattern& pattern, bool masked_only) {
  require(reconstructed.same_shape(original), ErrorCode::kShapeMismatch,
          "mask_loss: reconstruction and original differ in shape");
  require(original.rank() == 3 && original.dim(1) == pattern.grid_h &&
              original.dim(2) == pattern.grid_w,
          ErrorCode::kShapeMismatch, "mask_loss: pattern does not match the feature grid");
  LossGrad<T> out;
  out.grad = BasicTensor<T>(original.shape());
  const int channels = original.dim(0), plane = pattern.cells();
  const int counted = masked_only ? pattern.masked_count : plane;
  if (counted == 0) return out;
  const double inv = 1.0 / (static_cast<double>(counted) * channels);
  double sum = 0;
  for (int c = 0; c < channels; ++c) {
    for (int cell = 0; cell < plane; ++cell) {
      if (masked_only && !pattern.is_masked(cell)) continue;
      const std::size_t i = static_cast<std::size_t>(c) * plane + cell;
      const double diff = static_cast<double>(reconstructed[i]) - original[i];
      sum += diff * diff;
      out.grad[i] = static_cast<T>(2.0 * diff * inv);
    }
  }
  out.value = sum * inv;
  return out;
}

LossBreakdown total_loss(const LossParts& parts, double lambda_unsup, double lambda_mask,
                         bool mae_active, TrainMode mode) {
  LossBreakdown b;
  b.l_sup = parts.l_sup;
  b.l_mask = parts.l_mask;
  if (mode == TrainMode::kSourcePretrain) {
    const bool clean = parts.l_unsup == 0 &&
                       std::all_of(parts.l_dis.begin(), parts.l_dis.end(),
                                   [](double v) { return v == 0; });
    require(clean, ErrorCode::kInvalidArgument,
            "total_loss: source pretraining carries no unsupervised or adversarial parts");
  } else {
    b.l_unsup = parts.l_unsup;
    b.l_dis = parts.l_dis;
    for (std::size_t s = 0; s < kStageCount; ++s) b.l_adv += parts.betas[s] * parts.l_dis[s];
  }
  b.l_teach = b.l_sup + lambda_unsup * b.l_unsup + b.l_adv;
  b.l_total = b.l_teach + (mae_active ? lambda_mask * b.l_mask : 0.0);
  return b;
}

#define UDA_INSTANTIATE_LOSSES(T)                                                        \
  template LossGrad<T> supervised_loss(const BasicTensor<T>&, std::span<const Box>, int); \
  template LossGrad<T> unsupervised_loss(const BasicTensor<T>&,                          \
                                         const std::vector<Detection>&, int);            \
  template LossGrad<T> mask_loss(const BasicTensor<T>&, const BasicTensor<T>&,           \
                                 const MaskPattern&, bool);

UDA_INSTANTIATE_LOSSES(float)
UDA_INSTANTIATE_LOSSES(double)

#undef UDA_INSTANTIATE_LOSSES

}  // namespace uda

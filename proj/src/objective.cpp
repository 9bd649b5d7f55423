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

#include "uda_forge/objective.hpp"

#include "uda_forge/ops.hpp"

namespace uda {
namespace {

template <typename T>
void scale_into(BasicTensor<T>& dst, const BasicTensor<T>& src, double scale) {
  const T s = static_cast<T>(scale);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

}  // namespace

template <typename T>
LossBreakdown student_objective(const ParamSet<T>& p, std::span<const ObjectiveItem<T>> batch,
                                const ObjectiveOptions& options, ParamSet<T>* grads) {
  require(!batch.empty(), ErrorCode::kInvalidArgument, "student_objective: empty batch");
  const bool adapt = options.mode == TrainMode::kAdapt;
  const bool adversarial = adapt && options.adversarial;
  int n_source = 0, n_target = 0;
  for (const auto& item : batch) {
    (item.domain == Domain::kSource ? n_source : n_target) += 1;
  }
  require(adapt || n_target == 0, ErrorCode::kInvalidArgument,
          "student_objective: source pretraining batches hold source images only");
  const double n_all = static_cast<double>(batch.size());

  LossParts parts;
  parts.betas = options.betas;
  for (const auto& item : batch) {
    const BackboneTrace<T> bt = backbone_forward(p, item.image);
    const BasicTensor<T>& x2 = bt.features.semantic();
    const int grid_h = x2.dim(1), grid_w = x2.dim(2);
    const DenseTrace<T> enc = encoder_forward(p, x2);
    const HeadTrace<T> head = detect_forward(p, enc.out);

    const bool is_source = item.domain == Domain::kSource;
    const LossGrad<T> det = supervised_loss(head.raw, std::span<const Box>(item.targets), grid_w);
    const double det_scale =
        is_source ? 1.0 / n_source : options.lambda_unsup / n_target;
    (is_source ? parts.l_sup : parts.l_unsup) += det.value / (is_source ? n_source : n_target);

    BasicTensor<T> d_x2(x2.shape());
    BasicTensor<T> d_enc(enc.out.shape());
    BasicTensor<T> d_hidden(head.hidden.out.shape());

    if (adversarial) {
      const BasicTensor<T>* stage_features[kStageCount] = {&x2, &enc.out, &head.hidden.out};
      std::array<double, kStageCount> logits{};
      std::array<std::vector<T>, kStageCount> pooled;
      for (int s = 0; s < kStageCount; ++s) {
        const Stage stage = static_cast<Stage>(s);
        pooled[static_cast<std::size_t>(s)] = pool_stage_features(stage, *stage_features[s]);
        logits[static_cast<std::size_t>(s)] = static_cast<double>(
            discriminate(p, stage, std::span<const T>(pooled[static_cast<std::size_t>(s)])));
      }
      const AdversarialLoss adv = adversarial_losses(
          logits, is_source ? kSourceLabel : kTargetLabel, options.betas);
      for (std::size_t s = 0; s < kStageCount; ++s) parts.l_dis[s] += adv.per_stage[s] / n_all;
      if (grads) {
        BasicTensor<T>* stage_grads[kStageCount] = {&d_x2, &d_enc, &d_hidden};
        for (int s = 0; s < kStageCount; ++s) {
          const Stage stage = static_cast<Stage>(s);
          const auto us = static_cast<std::size_t>(s);
          const std::vector<T> d_pooled = discriminate_backward(
              p, stage, std::span<const T>(pooled[us]),
              static_cast<T>(adv.d_logits[us] / n_all), options.grl_lambda, *grads);
          const BasicTensor<T> g = unpool_stage_gradient(
              stage, std::span<const T>(d_pooled), stage_features[s]->shape());
          scale_into(*stage_grads[s], g, 1.0);
        }
      }
    }

    if (options.mae) {
      require(item.mask.grid_h == grid_h && item.mask.grid_w == grid_w,
              ErrorCode::kShapeMismatch, "student_objective: mask pattern does not match grid");
      const FeatureMaps<T> masked = apply_mask(bt.features, item.mask);
      const DenseTrace<T> menc = encoder_forward(p, masked.semantic());
      const BasicTensor<T> filled = fill_mask_queries(menc.out, item.mask, p[kMaskQuery]);
      const DenseTrace<T> rec = mae_decode(p, filled);
      const BasicTensor<T> rec_map = from_cells(rec.out, grid_h, grid_w);
      const LossGrad<T> ml = mask_loss(rec_map, x2, item.mask, options.mask_loss_masked_only);
      parts.l_mask += ml.value / n_all;
      if (grads) {
        const double mask_scale = options.lambda_mask / n_all;
        // The target X_K is itself a function of the backbone: d/dX_K = -d/dX_hat.
        scale_into(d_x2, ml.grad, -mask_scale);
        BasicTensor<T> d_rec = to_cells(ml.grad);
        for (T& v : d_rec.data()) v *= static_cast<T>(mask_scale);
        const BasicTensor<T> d_filled = mae_decode_backward(p, rec, d_rec, *grads);
        const BasicTensor<T> d_menc = fill_mask_queries_backward(d_filled, item.mask, *grads);
        const BasicTensor<T> d_masked_cells = encoder_backward(p, menc, d_menc, *grads);
        // Masked cells were zeroed, so they pass no gradient back to X_K.
        BasicTensor<T> d_masked = from_cells(d_masked_cells, grid_h, grid_w);
        FeatureMaps<T> wrap;
        wrap.levels.push_back(std::move(d_masked));
        scale_into(d_x2, apply_mask(wrap, item.mask).semantic(), 1.0);
      }
    }

    if (grads) {
      BasicTensor<T> d_raw = det.grad;
      for (T& v : d_raw.data()) v *= static_cast<T>(det_scale);
      const BasicTensor<T> d_enc_head = detect_backward(p, enc.out, head, d_raw, d_hidden, *grads);
      scale_into(d_enc, d_enc_head, 1.0);
      const BasicTensor<T> d_x2_cells = encoder_backward(p, enc, d_enc, *grads);
      scale_into(d_x2, from_cells(d_x2_cells, grid_h, grid_w), 1.0);
      backbone_backward(p, bt, d_x2, *grads);
    }
  }
  return total_loss(parts, options.lambda_unsup, options.lambda_mask, options.mae, options.mode);
}

template <typename T>
std::array<double, kStageCount> domain_logits(const ParamSet<T>& p, const BasicTensor<T>& image) {
  const BackboneTrace<T> bt = backbone_forward(p, image);
  const DenseTrace<T> enc = encoder_forward(p, bt.features.semantic());
  const HeadTrace<T> head = detect_forward(p, enc.out);
  const BasicTensor<T>* features[kStageCount] = {&bt.features.semantic(), &enc.out,
                                                 &head.hidden.out};
  std::array<double, kStageCount> logits{};
  for (int s = 0; s < kStageCount; ++s) {
    const auto pooled = pool_stage_features(static_cast<Stage>(s), *features[s]);
    logits[static_cast<std::size_t>(s)] = static_cast<double>(
        discriminate(p, static_cast<Stage>(s), std::span<const T>(pooled)));
  }
  return logits;
}

template LossBreakdown student_objective(const ParamSet<float>&,
                                         std::span<const ObjectiveItem<float>>,
                                         const ObjectiveOptions&, ParamSet<float>*);
template LossBreakdown student_objective(const ParamSet<double>&,
                                         std::span<const ObjectiveItem<double>>,
                                         const ObjectiveOptions&, ParamSet<double>*);
template std::array<double, kStageCount> domain_logits(const ParamSet<float>&, const Tensor&);
template std::array<double, kStageCount> domain_logits(const ParamSet<double>&, const TensorD&);

}  // namespace uda

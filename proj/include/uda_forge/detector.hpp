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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uda_forge/param_set.hpp"
#include "uda_forge/rng.hpp"
#include "uda_forge/synthdata.hpp"
#include "uda_forge/tensor.hpp"

namespace uda {

// Toy dense detector: two stride-2 conv stages, a per-cell encoder, a per-cell
// detection head, the masked-reconstruction branch and three domain
// discriminators. The semantic feature level has one cell per 4x4 pixels.

inline constexpr int kCellPitch = 4;
inline constexpr int kLevel1Channels = 8;
inline constexpr int kChannels = 16;  // level-K channels and encoder width
inline constexpr int kHeadOutputs = 5;  // objectness logit, dx, dy, log w, log h

enum ParamId : std::size_t {
  kConv1W,
  kConv1B,
  kConv2W,
  kConv2B,
  kEncoderW,
  kEncoderB,
  kHiddenW,
  kHiddenB,
  kOutW,
  kOutB,
  kMaskQuery,
  kMaeW,
  kMaeB,
  kDiscBackboneW,
  kDiscBackboneB,
  kDiscEncoderW,
  kDiscEncoderB,
  kDiscDecoderW,
  kDiscDecoderB,
  kParamCount,
};

// Names in ParamId order. Backbone tensors start with "backbone.", encoder
// tensors with "encoder.".
const std::array<std::string, kParamCount>& detector_param_names();

template <typename T>
ParamSet<T> zero_detector_params();

// He-style random initialization; biases start at zero except the objectness
// bias, which starts at a low prior.
ParamSet<float> init_detector_params(Rng& rng);

// Throws kNotFound/kShapeMismatch unless `p` has exactly the detector layout.
template <typename T>
void validate_detector_params(const ParamSet<T>& p);

template <typename T>
struct FeatureMaps {
  std::vector<BasicTensor<T>> levels;  // X_1 [8 x H/2 x W/2], X_2 [16 x H/4 x W/4]
  const BasicTensor<T>& semantic() const { return levels.back(); }
  BasicTensor<T>& semantic() { return levels.back(); }
};

template <typename T>
struct BackboneTrace {
  BasicTensor<T> image;
  BasicTensor<T> pre1, pre2;
  FeatureMaps<T> features;
};

// Images are [1 x H x W] with H, W multiples of 4 (64 x 64 in practice).
template <typename T>
BackboneTrace<T> backbone_forward(const ParamSet<T>& p, const BasicTensor<T>& image);

// Accumulates parameter gradients given dL/dX_2.
template <typename T>
void backbone_backward(const ParamSet<T>& p, const BackboneTrace<T>& trace,
                       const BasicTensor<T>& d_semantic, ParamSet<T>& grads);

struct MaskPattern {
  int grid_h = 0;
  int grid_w = 0;
  std::vector<std::uint8_t> masked;  // 1 = masked, row-major over the grid
  int masked_count = 0;

  int cells() const { return grid_h * grid_w; }
  bool is_masked(int cell) const { return masked[static_cast<std::size_t>(cell)] != 0; }
};

// round(mu * cells) distinct cells chosen uniformly at random.
MaskPattern make_mask_pattern(int grid_h, int grid_w, double mu, Rng& rng);
MaskPattern empty_mask_pattern(int grid_h, int grid_w);

// Zeroes every channel of the masked semantic-level cells in a copy.
template <typename T>
FeatureMaps<T> apply_mask(const FeatureMaps<T>& f, const MaskPattern& pattern);

template <typename T>
std::pair<FeatureMaps<T>, MaskPattern> apply_mask(const FeatureMaps<T>& f, double mu,
                                                  Rng& rng);

// [C x H x W] <-> [H*W x C]
template <typename T>
BasicTensor<T> to_cells(const BasicTensor<T>& map);
template <typename T>
BasicTensor<T> from_cells(const BasicTensor<T>& cells, int grid_h, int grid_w);

// Per-cell linear layer, optionally followed by relu.
template <typename T>
struct DenseTrace {
  BasicTensor<T> input;
  BasicTensor<T> pre;
  BasicTensor<T> out;
};

template <typename T>
DenseTrace<T> encoder_forward(const ParamSet<T>& p, const BasicTensor<T>& semantic);

// Returns dL/dX_K in cell layout [cells x C]; reshape with from_cells.
template <typename T>
BasicTensor<T> encoder_backward(const ParamSet<T>& p, const DenseTrace<T>& trace,
                                const BasicTensor<T>& d_out, ParamSet<T>& grads);

template <typename T>
BasicTensor<T> fill_mask_queries(const BasicTensor<T>& encoded, const MaskPattern& pattern,
                                 const BasicTensor<T>& query);

// Routes masked-row gradients into the query; returns dL/d(encoded).
template <typename T>
BasicTensor<T> fill_mask_queries_backward(const BasicTensor<T>& d_filled,
                                          const MaskPattern& pattern, ParamSet<T>& grads);

// Per-cell linear projection back to the level-K channel count.
template <typename T>
DenseTrace<T> mae_decode(const ParamSet<T>& p, const BasicTensor<T>& filled);

template <typename T>
BasicTensor<T> mae_decode_backward(const ParamSet<T>& p, const DenseTrace<T>& trace,
                                   const BasicTensor<T>& d_out, ParamSet<T>& grads);

template <typename T>
struct HeadTrace {
  DenseTrace<T> hidden;
  BasicTensor<T> raw;  // [cells x 5]
};

template <typename T>
HeadTrace<T> detect_forward(const ParamSet<T>& p, const BasicTensor<T>& encoded);

// `d_hidden_extra` (may be empty) is added to the gradient reaching the hidden
// activations. Returns dL/d(encoded).
template <typename T>
BasicTensor<T> detect_backward(const ParamSet<T>& p, const BasicTensor<T>& encoded,
                               const HeadTrace<T>& trace, const BasicTensor<T>& d_raw,
                               const BasicTensor<T>& d_hidden_extra, ParamSet<T>& grads);

struct Detection {
  Box box;
  double score = 0;
  int cell = 0;
};

// Box decode of one raw row for `cell` on a grid of width grid_w.
Box decode_box(double dx, double dy, double log_w, double log_h, int cell, int grid_w);

// Inverse of decode_box: raw (dx, dy, log w, log h) regression targets.
std::array<double, 4> encode_box_target(const Box& box, int cell, int grid_w);

double box_iou(const Box& a, const Box& b);

// Sigmoid scores, score threshold, then greedy NMS (suppress IoU > nms_iou).
// Ties in score resolve toward the lower cell index.
std::vector<Detection> decode_detections(const Tensor& raw, int grid_w,
                                         double score_threshold, double nms_iou = 0.5);

enum class Stage { kBackbone = 0, kEncoder = 1, kDecoder = 2 };
inline constexpr int kStageCount = 3;

const char* stage_name(Stage s);
Stage parse_stage(const std::string& s);

// Mean over cells: backbone features are [C x H x W], encoder and decoder
// features are [cells x C].
template <typename T>
std::vector<T> pool_stage_features(Stage stage, const BasicTensor<T>& features);

template <typename T>
T discriminate(const ParamSet<T>& p, Stage stage, std::span<const T> pooled);

// Gradient-reversal contract: discriminator parameters receive the plain
// gradient d_logit * dlogit/dparam; the returned gradient for the pooled
// features is multiplied by -grl_lambda.
template <typename T>
std::vector<T> discriminate_backward(const ParamSet<T>& p, Stage stage,
                                     std::span<const T> pooled, T d_logit,
                                     double grl_lambda, ParamSet<T>& grads);

// Spreads a pooled-feature gradient uniformly back over the cells.
template <typename T>
BasicTensor<T> unpool_stage_gradient(Stage stage, std::span<const T> d_pooled,
                                     const std::vector<int>& feature_shape);

// Inference: raw head outputs for one image.
template <typename T>
BasicTensor<T> infer_raw(const ParamSet<T>& p, const BasicTensor<T>& image);

}  // namespace uda

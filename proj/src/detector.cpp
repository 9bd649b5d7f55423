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

#include "uda_forge/detector.hpp"

#include <algorithm>
#include <cmath>

#include "uda_forge/ops.hpp"

namespace uda {
namespace {

struct ParamShape {
  const char* name;
  std::vector<int> shape;
};

const std::array<ParamShape, kParamCount>& layout() {
  static const std::array<ParamShape, kParamCount> kLayout = {{
      {"backbone.conv1.w", {kLevel1Channels, 1, 3, 3}},
      {"backbone.conv1.b", {kLevel1Channels}},
      {"backbone.conv2.w", {kChannels, kLevel1Channels, 3, 3}},
      {"backbone.conv2.b", {kChannels}},
      {"encoder.w", {kChannels, kChannels}},
      {"encoder.b", {kChannels}},
      {"head.hidden.w", {kChannels, kChannels}},
      {"head.hidden.b", {kChannels}},
      {"head.out.w", {kChannels, kHeadOutputs}},
      {"head.out.b", {kHeadOutputs}},
      {"mae.query", {kChannels}},
      {"mae.decoder.w", {kChannels, kChannels}},
      {"mae.decoder.b", {kChannels}},
      {"disc.backbone.w", {kChannels, 1}},
      {"disc.backbone.b", {1}},
      {"disc.encoder.w", {kChannels, 1}},
      {"disc.encoder.b", {1}},
      {"disc.decoder.w", {kChannels, 1}},
      {"disc.decoder.b", {1}},
  }};
  return kLayout;
}

template <typename T>
void add_into(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
DenseTrace<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& w,
                            const BasicTensor<T>& b, bool relu) {
  DenseTrace<T> t;
  t.input = input;
  t.pre = linear(input, w, b);
  t.out = relu ? activate(Activation::kRelu, t.pre) : t.pre;
  return t;
}

template <typename T>
BasicTensor<T> dense_backward(const DenseTrace<T>& t, const BasicTensor<T>& w,
                              const BasicTensor<T>& d_out, bool relu, ParamSet<T>& grads,
                              ParamId w_id, ParamId b_id) {
  const BasicTensor<T> d_pre =
      relu ? activate_backward(Activation::kRelu, t.pre, t.out, d_out) : d_out;
  LinearGrads<T> g = linear_backward(t.input, w, d_pre);
  add_into(grads[w_id], g.dw);
  add_into(grads[b_id], g.db);
  return std::move(g.dx);
}

ParamId disc_weight(Stage s) {
  switch (s) {
    case Stage::kBackbone:
      return kDiscBackboneW;
    case Stage::kEncoder:
      return kDiscEncoderW;
    case Stage::kDecoder:
      return kDiscDecoderW;
  }
  fail(ErrorCode::kInvalidArgument, "unknown discriminator stage");
}

ParamId disc_bias(Stage s) { return static_cast<ParamId>(disc_weight(s) + 1); }

}  // namespace

const std::array<std::string, kParamCount>& detector_param_names() {
  static const std::array<std::string, kParamCount> kNames = [] {
    std::array<std::string, kParamCount> names;
    for (std::size_t i = 0; i < kParamCount; ++i) names[i] = layout()[i].name;
    return names;
  }();
  return kNames;
}

template <typename T>
ParamSet<T> zero_detector_params() {
  ParamSet<T> p;
  for (const auto& entry : layout()) p.add(entry.name, BasicTensor<T>(entry.shape));
  return p;
}

ParamSet<float> init_detector_params(Rng& rng) {
  ParamSet<float> p = zero_detector_params<float>();
  auto fill_normal = [&](ParamId id, double sd) {
    for (float& v : p[id].data()) v = static_cast<float>(rng.normal(0.0, sd));
  };
  fill_normal(kConv1W, std::sqrt(2.0 / 9.0));
  fill_normal(kConv2W, std::sqrt(2.0 / (9.0 * kLevel1Channels)));
  fill_normal(kEncoderW, std::sqrt(2.0 / kChannels));
  fill_normal(kHiddenW, std::sqrt(2.0 / kChannels));
  fill_normal(kOutW, 0.01);
  fill_normal(kMaskQuery, 0.02);
  fill_normal(kMaeW, std::sqrt(1.0 / kChannels));
  fill_normal(kDiscBackboneW, 0.01);
  fill_normal(kDiscEncoderW, 0.01);
  fill_normal(kDiscDecoderW, 0.01);
  // Lesion cells are rare; start objectness near p = 0.01.
  p[kOutB][0] = static_cast<float>(std::log(0.01 / 0.99));
  return p;
}

template <typename T>
void validate_detector_params(const ParamSet<T>& p) {
  require(p.size() == kParamCount, ErrorCode::kNotFound,
          "detector parameters: expected " + std::to_string(kParamCount) + " tensors, got " +
              std::to_string(p.size()));
  for (std::size_t i = 0; i < kParamCount; ++i) {
    require(p.name(i) == layout()[i].name, ErrorCode::kNotFound,
            std::string("detector parameters: expected '") + layout()[i].name + "' at slot " +
                std::to_string(i) + ", found '" + p.name(i) + "'");
    require_shape(p[i].shape(), layout()[i].shape, layout()[i].name);
  }
}

template <typename T>
BackboneTrace<T> backbone_forward(const ParamSet<T>& p, const BasicTensor<T>& image) {
  require(image.rank() == 3 && image.dim(0) == 1 && image.dim(1) % kCellPitch == 0 &&
              image.dim(2) % kCellPitch == 0 && image.dim(1) >= 12 && image.dim(2) >= 12,
          ErrorCode::kShapeMismatch,
          "backbone: expected a [1 x H x W] image with H, W multiples of 4, got " +
              Tensor::shape_string(image.shape()));
  BackboneTrace<T> t;
  t.image = image;
  t.pre1 = conv2d(image, p[kConv1W], 2, p[kConv1B]);
  t.features.levels.push_back(activate(Activation::kRelu, t.pre1));
  t.pre2 = conv2d(t.features.levels[0], p[kConv2W], 2, p[kConv2B]);
  t.features.levels.push_back(activate(Activation::kRelu, t.pre2));
  return t;
}

template <typename T>
void backbone_backward(const ParamSet<T>& p, const BackboneTrace<T>& t,
                       const BasicTensor<T>& d_semantic, ParamSet<T>& grads) {
  const auto& x1 = t.features.levels[0];
  const auto& x2 = t.features.levels[1];
  const BasicTensor<T> d_pre2 = activate_backward(Activation::kRelu, t.pre2, x2, d_semantic);
  Conv2dGrads<T> g2 = conv2d_backward(x1, p[kConv2W], 2, d_pre2, true);
  add_into(grads[kConv2W], g2.dk);
  add_into(grads[kConv2B], g2.db);
  const BasicTensor<T> d_pre1 = activate_backward(Activation::kRelu, t.pre1, x1, g2.dx);
  Conv2dGrads<T> g1 = conv2d_backward(t.image, p[kConv1W], 2, d_pre1, false);
  add_into(grads[kConv1W], g1.dk);
  add_into(grads[kConv1B], g1.db);
}

MaskPattern empty_mask_pattern(int grid_h, int grid_w) {
  MaskPattern m;
  m.grid_h = grid_h;
  m.grid_w = grid_w;
  m.masked.assign(static_cast<std::size_t>(grid_h * grid_w), 0);
  return m;
}

MaskPattern make_mask_pattern(int grid_h, int grid_w, double mu, Rng& rng) {
  require(mu >= 0.0 && mu <= 1.0, ErrorCode::kInvalidArgument,
          "mask ratio must lie in [0, 1]");
  MaskPattern m = empty_mask_pattern(grid_h, grid_w);
  const int cells = m.cells();
  m.masked_count = static_cast<int>(std::lround(mu * cells));
  const std::vector<int> order = rng.permutation(cells);
  for (int i = 0; i < m.masked_count; ++i) {
    m.masked[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  }
  return m;
}

template <typename T>
FeatureMaps<T> apply_mask(const FeatureMaps<T>& f, const MaskPattern& pattern) {
  FeatureMaps<T> out = f;
  BasicTensor<T>& x = out.semantic();
  require(x.dim(1) == pattern.grid_h && x.dim(2) == pattern.grid_w,
          ErrorCode::kShapeMismatch, "apply_mask: pattern does not match feature grid");
  const int plane = pattern.cells();
  for (int c = 0; c < x.dim(0); ++c) {
    T* ch = &x[static_cast<std::size_t>(c) * plane];
    for (int cell = 0; cell < plane; ++cell) {
      if (pattern.is_masked(cell)) ch[cell] = T(0);
    }
  }
  return out;
}

template <typename T>
std::pair<FeatureMaps<T>, MaskPattern> apply_mask(const FeatureMaps<T>& f, double mu,
                                                  Rng& rng) {
  const auto& x = f.semantic();
  MaskPattern pattern = make_mask_pattern(x.dim(1), x.dim(2), mu, rng);
  FeatureMaps<T> masked = apply_mask(f, pattern);
  return {std::move(masked), std::move(pattern)};
}

template <typename T>
BasicTensor<T> to_cells(const BasicTensor<T>& map) {
  const int c = map.dim(0), plane = map.dim(1) * map.dim(2);
  BasicTensor<T> cells({plane, c});
  for (int ch = 0; ch < c; ++ch) {
    const T* src = &map[static_cast<std::size_t>(ch) * plane];
    for (int i = 0; i < plane; ++i) cells.at(i, ch) = src[i];
  }
  return cells;
}

template <typename T>
BasicTensor<T> from_cells(const BasicTensor<T>& cells, int grid_h, int grid_w) {
  const int plane = grid_h * grid_w, c = cells.dim(1);
  require(cells.dim(0) == plane, ErrorCode::kShapeMismatch,
          "from_cells: row count does not match grid");
  BasicTensor<T> map({c, grid_h, grid_w});
  for (int ch = 0; ch < c; ++ch) {
    T* dst = &map[static_cast<std::size_t>(ch) * plane];
    for (int i = 0; i < plane; ++i) dst[i] = cells.at(i, ch);
  }
  return map;
}

template <typename T>
DenseTrace<T> encoder_forward(const ParamSet<T>& p, const BasicTensor<T>& semantic) {
  require(semantic.rank() == 3 && semantic.dim(0) == kChannels, ErrorCode::kShapeMismatch,
          "encoder: expected a [16 x H x W] level-K map");
  return dense_forward(to_cells(semantic), p[kEncoderW], p[kEncoderB], true);
}

template <typename T>
BasicTensor<T> encoder_backward(const ParamSet<T>& p, const DenseTrace<T>& trace,
                                const BasicTensor<T>& d_out, ParamSet<T>& grads) {
  return dense_backward(trace, p[kEncoderW], d_out, true, grads, kEncoderW, kEncoderB);
}

template <typename T>
BasicTensor<T> fill_mask_queries(const BasicTensor<T>& encoded, const MaskPattern& pattern,
                                 const BasicTensor<T>& query) {
  require(encoded.rank() == 2 && encoded.dim(0) == pattern.cells(), ErrorCode::kShapeMismatch,
          "fill_mask_queries: pattern does not match encoded rows");
  require_shape(query.shape(), {encoded.dim(1)}, "mask query");
  BasicTensor<T> out = encoded;
  for (int r = 0; r < pattern.cells(); ++r) {
    if (!pattern.is_masked(r)) continue;
    for (int c = 0; c < encoded.dim(1); ++c) out.at(r, c) = query[static_cast<std::size_t>(c)];
  }
  return out;
}

template <typename T>
BasicTensor<T> fill_mask_queries_backward(const BasicTensor<T>& d_filled,
                                          const MaskPattern& pattern, ParamSet<T>& grads) {
  BasicTensor<T> d_encoded = d_filled;
  auto& dq = grads[kMaskQuery];
  for (int r = 0; r < pattern.cells(); ++r) {
    if (!pattern.is_masked(r)) continue;
    for (int c = 0; c < d_filled.dim(1); ++c) {
      dq[static_cast<std::size_t>(c)] += d_filled.at(r, c);
      d_encoded.at(r, c) = T(0);
    }
  }
  return d_encoded;
}

template <typename T>
DenseTrace<T> mae_decode(const ParamSet<T>& p, const BasicTensor<T>& filled) {
  return dense_forward(filled, p[kMaeW], p[kMaeB], false);
}

template <typename T>
BasicTensor<T> mae_decode_backward(const ParamSet<T>& p, const DenseTrace<T>& trace,
                                   const BasicTensor<T>& d_out, ParamSet<T>& grads) {
  return dense_backward(trace, p[kMaeW], d_out, false, grads, kMaeW, kMaeB);
}

template <typename T>
HeadTrace<T> detect_forward(const ParamSet<T>& p, const BasicTensor<T>& encoded) {
  HeadTrace<T> t;
  t.hidden = dense_forward(encoded, p[kHiddenW], p[kHiddenB], true);
  t.raw = linear(t.hidden.out, p[kOutW], p[kOutB]);
  return t;
}

template <typename T>
BasicTensor<T> detect_backward(const ParamSet<T>& p, const BasicTensor<T>& encoded,
                               const HeadTrace<T>& trace, const BasicTensor<T>& d_raw,
                               const BasicTensor<T>& d_hidden_extra, ParamSet<T>& grads) {
  (void)encoded;
  LinearGrads<T> g = linear_backward(trace.hidden.out, p[kOutW], d_raw);
  add_into(grads[kOutW], g.dw);
  add_into(grads[kOutB], g.db);
  if (!d_hidden_extra.empty()) add_into(g.dx, d_hidden_extra);
  return dense_backward(trace.hidden, p[kHiddenW], g.dx, true, grads, kHiddenW, kHiddenB);
}

Box decode_box(double dx, double dy, double log_w, double log_h, int cell, int grid_w) {
  const int col = cell % grid_w, row = cell / grid_w;
  Box b;
  b.cx = (col + 0.5 + std::tanh(dx) / 2) * kCellPitch;
  b.cy = (row + 0.5 + std::tanh(dy) / 2) * kCellPitch;
  b.w = std::clamp(kCellPitch * std::exp(log_w), 2.0, 64.0);
  b.h = std::clamp(kCellPitch * std::exp(log_h), 2.0, 64.0);
  return b;
}

std::array<double, 4> encode_box_target(const Box& box, int cell, int grid_w) {
  const int col = cell % grid_w, row = cell / grid_w;
  auto offset = [](double center, int index) {
    const double frac = 2.0 * (center / kCellPitch - index - 0.5);
    return std::atanh(std::clamp(frac, -0.99, 0.99));
  };
  return {offset(box.cx, col), offset(box.cy, row),
          std::log(std::clamp(box.w, 2.0, 64.0) / kCellPitch),
          std::log(std::clamp(box.h, 2.0, 64.0) / kCellPitch)};
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x_hi(), b.x_hi()) - std::max(a.x_lo(), b.x_lo());
  const double ih = std::min(a.y_hi(), b.y_hi()) - std::max(a.y_lo(), b.y_lo());
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<Detection> decode_detections(const Tensor& raw, int grid_w,
                                         double score_threshold, double nms_iou) {
  require(raw.rank() == 2 && raw.dim(1) == kHeadOutputs && grid_w > 0 &&
              raw.dim(0) % grid_w == 0,
          ErrorCode::kShapeMismatch, "decode_detections: expected raw [cells x 5]");
  require(score_threshold >= 0 && nms_iou >= 0 && nms_iou <= 1, ErrorCode::kInvalidArgument,
          "decode_detections: thresholds must be non-negative and nms_iou <= 1");
  std::vector<Detection> candidates;
  for (int cell = 0; cell < raw.dim(0); ++cell) {
    const double score = sigmoid(static_cast<double>(raw.at(cell, 0)));
    if (score < score_threshold) continue;
    candidates.push_back({decode_box(raw.at(cell, 1), raw.at(cell, 2), raw.at(cell, 3),
                                     raw.at(cell, 4), cell, grid_w),
                          score, cell});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Detection& a, const Detection& b) {
    return a.score != b.score ? a.score > b.score : a.cell < b.cell;
  });
  std::vector<Detection> kept;
  for (const Detection& d : candidates) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (box_iou(d.box, k.box) > nms_iou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kBackbone:
      return "backbone";
    case Stage::kEncoder:
      return "encoder";
    case Stage::kDecoder:
      return "decoder";
  }
  return "unknown";
}

Stage parse_stage(const std::string& s) {
  if (s == "backbone") return Stage::kBackbone;
  if (s == "encoder") return Stage::kEncoder;
  if (s == "decoder") return Stage::kDecoder;
  fail(ErrorCode::kInvalidArgument, "unknown discriminator stage '" + s + "'");
}

template <typename T>
std::vector<T> pool_stage_features(Stage stage, const BasicTensor<T>& f) {
  std::vector<T> pooled(kChannels, T(0));
  if (stage == Stage::kBackbone) {
    require(f.rank() == 3 && f.dim(0) == kChannels, ErrorCode::kShapeMismatch,
            "backbone discriminator expects a [16 x H x W] map");
    const int plane = f.dim(1) * f.dim(2);
    for (int c = 0; c < kChannels; ++c) {
      T acc = 0;
      const T* src = &f[static_cast<std::size_t>(c) * plane];
      for (int i = 0; i < plane; ++i) acc += src[i];
      pooled[static_cast<std::size_t>(c)] = acc / static_cast<T>(plane);
    }
  } else {
    require(f.rank() == 2 && f.dim(1) == kChannels, ErrorCode::kShapeMismatch,
            std::string(stage_name(stage)) + " discriminator expects [cells x 16] features");
    for (int r = 0; r < f.dim(0); ++r) {
      for (int c = 0; c < kChannels; ++c) pooled[static_cast<std::size_t>(c)] += f.at(r, c);
    }
    for (T& v : pooled) v /= static_cast<T>(f.dim(0));
  }
  return pooled;
}

template <typename T>
T discriminate(const ParamSet<T>& p, Stage stage, std::span<const T> pooled) {
  const auto& w = p[disc_weight(stage)];
  require(pooled.size() == static_cast<std::size_t>(kChannels), ErrorCode::kShapeMismatch,
          "discriminator input must have 16 features");
  T logit = p[disc_bias(stage)][0];
  for (std::size_t c = 0; c < pooled.size(); ++c) logit += pooled[c] * w[c];
  return logit;
}

template <typename T>
std::vector<T> discriminate_backward(const ParamSet<T>& p, Stage stage,
                                     std::span<const T> pooled, T d_logit,
                                     double grl_lambda, ParamSet<T>& grads) {
  const auto& w = p[disc_weight(stage)];
  auto& dw = grads[disc_weight(stage)];
  grads[disc_bias(stage)][0] += d_logit;
  std::vector<T> d_pooled(pooled.size());
  const T reversal = static_cast<T>(-grl_lambda);
  for (std::size_t c = 0; c < pooled.size(); ++c) {
    dw[c] += d_logit * pooled[c];
    d_pooled[c] = reversal * d_logit * w[c];
  }
  return d_pooled;
}

template <typename T>
BasicTensor<T> unpool_stage_gradient(Stage stage, std::span<const T> d_pooled,
                                     const std::vector<int>& shape) {
  BasicTensor<T> g(shape);
  if (stage == Stage::kBackbone) {
    const int plane = shape[1] * shape[2];
    for (int c = 0; c < shape[0]; ++c) {
      const T v = d_pooled[static_cast<std::size_t>(c)] / static_cast<T>(plane);
      T* dst = &g[static_cast<std::size_t>(c) * plane];
      for (int i = 0; i < plane; ++i) dst[i] = v;
    }
  } else {
    for (int r = 0; r < shape[0]; ++r) {
      for (int c = 0; c < shape[1]; ++c) {
        g.at(r, c) = d_pooled[static_cast<std::size_t>(c)] / static_cast<T>(shape[0]);
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> infer_raw(const ParamSet<T>& p, const BasicTensor<T>& image) {
  BackboneTrace<T> bt = backbone_forward(p, image);
  DenseTrace<T> enc = encoder_forward(p, bt.features.semantic());
  return detect_forward(p, enc.out).raw;
}

#define UDA_INSTANTIATE_DETECTOR(T)                                                       \
  template ParamSet<T> zero_detector_params<T>();                                         \
  template void validate_detector_params(const ParamSet<T>&);                             \
  template BackboneTrace<T> backbone_forward(const ParamSet<T>&, const BasicTensor<T>&);  \
  template void backbone_backward(const ParamSet<T>&, const BackboneTrace<T>&,            \
                                  const BasicTensor<T>&, ParamSet<T>&);                   \
  template FeatureMaps<T> apply_mask(const FeatureMaps<T>&, const MaskPattern&);          \
  template std::pair<FeatureMaps<T>, MaskPattern> apply_mask(const FeatureMaps<T>&,       \
                                                             double, Rng&);               \
  template BasicTensor<T> to_cells(const BasicTensor<T>&);                                \
  template BasicTensor<T> from_cells(const BasicTensor<T>&, int, int);                    \
  template DenseTrace<T> encoder_forward(const ParamSet<T>&, const BasicTensor<T>&);      \
  template BasicTensor<T> encoder_backward(const ParamSet<T>&, const DenseTrace<T>&,      \
                                           const BasicTensor<T>&, ParamSet<T>&);          \
  template BasicTensor<T> fill_mask_queries(const BasicTensor<T>&, const MaskPattern&,    \
                                            const BasicTensor<T>&);                       \
  template BasicTensor<T> fill_mask_queries_backward(const BasicTensor<T>&,               \
                                                     const MaskPattern&, ParamSet<T>&);   \
  template DenseTrace<T> mae_decode(const ParamSet<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> mae_decode_backward(const ParamSet<T>&, const DenseTrace<T>&,   \
                                              const BasicTensor<T>&, ParamSet<T>&);       \
  template HeadTrace<T> detect_forward(const ParamSet<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> detect_backward(const ParamSet<T>&, const BasicTensor<T>&,      \
                                          const HeadTrace<T>&, const BasicTensor<T>&,     \
                                          const BasicTensor<T>&, ParamSet<T>&);           \
  template std::vector<T> pool_stage_features(Stage, const BasicTensor<T>&);              \
  template T discriminate(const ParamSet<T>&, Stage, std::span<const T>);                 \
  template std::vector<T> discriminate_backward(const ParamSet<T>&, Stage,                \
                                                std::span<const T>, T, double,            \
                                                ParamSet<T>&);                            \
  template BasicTensor<T> unpool_stage_gradient(Stage, std::span<const T>,                \
                                                const std::vector<int>&);                 \
  template BasicTensor<T> infer_raw(const ParamSet<T>&, const BasicTensor<T>&);

UDA_INSTANTIATE_DETECTOR(float)
UDA_INSTANTIATE_DETECTOR(double)

#undef UDA_INSTANTIATE_DETECTOR

}  // namespace uda

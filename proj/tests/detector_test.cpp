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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gtest/gtest.h"
#include "uda_forge/detector.hpp"
#include "uda_forge/fd_check.hpp"
#include "uda_forge/ops.hpp"

namespace uda {
namespace {

ParamSet<double> random_params(std::uint64_t seed) {
  Rng rng(seed);
  return init_detector_params(rng).cast<double>();
}

TensorD random_image(int h, int w, Rng& rng) {
  TensorD img({1, h, w});
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

TEST(BackboneTest, ZeroImageZeroBiasGivesZeroFeatures) {
  ParamSet<double> p = random_params(1);
  p[kConv1B].fill(0);
  p[kConv2B].fill(0);
  const auto trace = backbone_forward(p, TensorD({1, 64, 64}));
  for (const auto& level : trace.features.levels) {
    for (double v : level.data()) ASSERT_EQ(v, 0.0);
  }
}

TEST(BackboneTest, OutputShapes) {
  Rng rng(2);
  const auto trace = backbone_forward(random_params(2), random_image(64, 64, rng));
  ASSERT_EQ(trace.features.levels.size(), 2u);
  EXPECT_EQ(trace.features.levels[0].shape(), (std::vector<int>{8, 32, 32}));
  EXPECT_EQ(trace.features.levels[1].shape(), (std::vector<int>{16, 16, 16}));
}

TEST(BackboneTest, RejectsWrongImageShape) {
  EXPECT_THROW(backbone_forward(random_params(3), TensorD({1, 30, 30})), Error);
  EXPECT_THROW(backbone_forward(random_params(3), TensorD({2, 64, 64})), Error);
}

TEST(BackboneTest, GradientOfSumMatchesFiniteDifferences) {
  Rng rng(4);
  const TensorD image = random_image(12, 12, rng);
  ParamSet<double> base = random_params(4);
  ParamSet<double> conv;
  for (ParamId id : {kConv1W, kConv1B, kConv2W, kConv2B}) {
    conv.add(detector_param_names()[id], base[id]);
  }
  auto f = [&](std::span<const double> x, std::span<double> grad) {
    ParamSet<double> c = conv;
    unflatten(x, c);
    ParamSet<double> p = base;
    p[kConv1W] = c[0];
    p[kConv1B] = c[1];
    p[kConv2W] = c[2];
    p[kConv2B] = c[3];
    const auto trace = backbone_forward(p, image);
    const TensorD& x2 = trace.features.semantic();
    const double sum = std::accumulate(x2.data().begin(), x2.data().end(), 0.0);
    if (!grad.empty()) {
      ParamSet<double> g = p.zeros_like();
      backbone_backward(p, trace, TensorD(x2.shape(), 1.0), g);
      ParamSet<double> gc = conv.zeros_like();
      gc[0] = g[kConv1W];
      gc[1] = g[kConv1B];
      gc[2] = g[kConv2W];
      gc[3] = g[kConv2B];
      const auto flat = flatten(gc);
      std::copy(flat.begin(), flat.end(), grad.begin());
    }
    return sum;
  };
  const auto x = flatten(conv);
  EXPECT_LT(fd_check(f, x, 1e-5).max_rel_error, 1e-4);
}

TEST(MaskTest, CountsFollowRoundedRatio) {
  Rng rng(5);
  EXPECT_EQ(make_mask_pattern(16, 16, 0.0, rng).masked_count, 0);
  EXPECT_EQ(make_mask_pattern(16, 16, 1.0, rng).masked_count, 256);
  const MaskPattern quarter = make_mask_pattern(16, 16, 0.25, rng);
  EXPECT_EQ(quarter.masked_count, 64);
  EXPECT_EQ(std::count(quarter.masked.begin(), quarter.masked.end(), 1), 64);
  EXPECT_EQ(make_mask_pattern(16, 16, 0.3, rng).masked_count, 77);  // round(76.8)
}

TEST(MaskTest, RejectsRatioOutsideUnitInterval) {
  Rng rng(5);
  EXPECT_THROW(make_mask_pattern(16, 16, 1.5, rng), Error);
  EXPECT_THROW(make_mask_pattern(16, 16, -0.1, rng), Error);
}

TEST(MaskTest, ZeroesMaskedCellsAndKeepsTheRest) {
  Rng rng(6);
  const auto trace = backbone_forward(random_params(6), random_image(64, 64, rng));
  for (double mu : {0.0, 0.25, 1.0}) {
    auto [masked, pattern] = apply_mask(trace.features, mu, rng);
    const TensorD& before = trace.features.semantic();
    const TensorD& after = masked.semantic();
    for (int cell = 0; cell < 256; ++cell) {
      for (int c = 0; c < kChannels; ++c) {
        const double a = after.at(c, cell / 16, cell % 16);
        if (pattern.is_masked(cell)) {
          ASSERT_EQ(a, 0.0);
        } else {
          ASSERT_EQ(a, before.at(c, cell / 16, cell % 16));
        }
      }
    }
    EXPECT_EQ(masked.levels[0], trace.features.levels[0]);
  }
}

TEST(EncoderTest, ZeroInputZeroBiasGivesZeroOutput) {
  ParamSet<double> p = random_params(7);
  p[kEncoderB].fill(0);
  const auto out = encoder_forward(p, TensorD({16, 16, 16}));
  for (double v : out.out.data()) ASSERT_EQ(v, 0.0);
  EXPECT_EQ(out.out.shape(), (std::vector<int>{256, 16}));
}

TEST(EncoderTest, IdentityWeightsReproduceNonnegativeInput) {
  ParamSet<double> p = random_params(8);
  p[kEncoderW].fill(0);
  p[kEncoderB].fill(0);
  for (int i = 0; i < kChannels; ++i) p[kEncoderW].at(i, i) = 1.0;
  Rng rng(8);
  TensorD x({16, 16, 16});
  for (double& v : x.data()) v = rng.uniform();
  EXPECT_EQ(encoder_forward(p, x).out, to_cells(x));
}

TEST(CellLayoutTest, RoundTrip) {
  Rng rng(9);
  TensorD x({16, 4, 5});
  for (double& v : x.data()) v = rng.normal();
  const TensorD cells = to_cells(x);
  EXPECT_EQ(cells.shape(), (std::vector<int>{20, 16}));
  EXPECT_EQ(cells.at(7, 3), x.at(3, 1, 2));
  EXPECT_EQ(from_cells(cells, 4, 5), x);
}

TEST(MaskQueryTest, FillContracts) {
  Rng rng(10);
  TensorD encoded({256, 16});
  for (double& v : encoded.data()) v = rng.normal();
  TensorD query({16});
  for (double& v : query.data()) v = rng.normal();

  EXPECT_EQ(fill_mask_queries(encoded, empty_mask_pattern(16, 16), query), encoded);

  const TensorD full = fill_mask_queries(encoded, make_mask_pattern(16, 16, 1.0, rng), query);
  for (int r = 0; r < 256; ++r) {
    for (int c = 0; c < 16; ++c) ASSERT_EQ(full.at(r, c), query[static_cast<std::size_t>(c)]);
  }

  MaskPattern one = empty_mask_pattern(16, 16);
  one.masked[37] = 1;
  one.masked_count = 1;
  const TensorD filled = fill_mask_queries(encoded, one, query);
  int differing_rows = 0;
  for (int r = 0; r < 256; ++r) {
    bool differs = false;
    for (int c = 0; c < 16; ++c) differs |= filled.at(r, c) != encoded.at(r, c);
    differing_rows += differs;
  }
  EXPECT_EQ(differing_rows, 1);
}

TEST(MaeDecodeTest, ZeroWeightsGiveZeroMap) {
  ParamSet<double> p = random_params(11);
  p[kMaeW].fill(0);
  p[kMaeB].fill(0);
  Rng rng(11);
  TensorD filled({256, 16});
  for (double& v : filled.data()) v = rng.normal();
  const auto trace = mae_decode(p, filled);
  const TensorD map = from_cells(trace.out, 16, 16);
  EXPECT_EQ(map.shape(), (std::vector<int>{16, 16, 16}));
  for (double v : map.data()) ASSERT_EQ(v, 0.0);
}

TEST(HeadTest, ZeroWeightsGiveZeroLogitsAndCellBoxes) {
  ParamSet<double> p = zero_detector_params<double>();
  const auto trace = detect_forward(p, TensorD({256, 16}));
  ASSERT_EQ(trace.raw.shape(), (std::vector<int>{256, 5}));
  for (int cell = 0; cell < 256; ++cell) {
    ASSERT_EQ(trace.raw.at(cell, 0), 0.0);
    const Box b = decode_box(trace.raw.at(cell, 1), trace.raw.at(cell, 2), trace.raw.at(cell, 3),
                             trace.raw.at(cell, 4), cell, 16);
    EXPECT_DOUBLE_EQ(b.cx, (cell % 16 + 0.5) * 4);
    EXPECT_DOUBLE_EQ(b.cy, (cell / 16 + 0.5) * 4);
    EXPECT_DOUBLE_EQ(b.w, 4.0);
    EXPECT_DOUBLE_EQ(b.h, 4.0);
  }
}

TEST(BoxCodecTest, HandDecodedExample) {
  // cell 18 on a 16-wide grid is column 2, row 1.
  const Box b = decode_box(0.5, -0.25, std::log(2.0), std::log(0.75), 18, 16);
  EXPECT_NEAR(b.cx, (2 + 0.5 + std::tanh(0.5) / 2) * 4, 1e-12);
  EXPECT_NEAR(b.cy, (1 + 0.5 + std::tanh(-0.25) / 2) * 4, 1e-12);
  EXPECT_NEAR(b.w, 8.0, 1e-12);
  EXPECT_NEAR(b.h, 3.0, 1e-12);
}

TEST(BoxCodecTest, SizesAreClamped) {
  const Box big = decode_box(0, 0, 10.0, -10.0, 0, 16);
  EXPECT_EQ(big.w, 64.0);
  EXPECT_EQ(big.h, 2.0);
}

TEST(BoxCodecTest, EncodeInvertsDecode) {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const int cell = static_cast<int>(rng.below(256));
    const double dx = rng.uniform(-2, 2), dy = rng.uniform(-2, 2);
    const double lw = rng.uniform(-0.6, 2.7), lh = rng.uniform(-0.6, 2.7);
    const Box b = decode_box(dx, dy, lw, lh, cell, 16);
    const auto t = encode_box_target(b, cell, 16);
    const Box again = decode_box(t[0], t[1], t[2], t[3], cell, 16);
    EXPECT_NEAR(again.cx, b.cx, 0.03);  // offsets saturate near the cell edge
    EXPECT_NEAR(again.cy, b.cy, 0.03);
    EXPECT_NEAR(again.w, b.w, 1e-9);
    EXPECT_NEAR(again.h, b.h, 1e-9);
  }
}

TEST(BoxIouTest, KnownValues) {
  const Box a{10, 10, 4, 4};
  EXPECT_DOUBLE_EQ(box_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(box_iou(a, Box{12, 10, 4, 4}), 8.0 / 24.0);
  EXPECT_DOUBLE_EQ(box_iou(a, Box{20, 20, 4, 4}), 0.0);
}

Tensor raw_with(const std::vector<std::pair<int, double>>& logits) {
  Tensor raw({256, 5});
  for (int cell = 0; cell < 256; ++cell) raw.at(cell, 0) = -30.0f;
  for (auto [cell, logit] : logits) raw.at(cell, 0) = static_cast<float>(logit);
  return raw;
}

double logit(double p) { return std::log(p / (1 - p)); }

TEST(DecodeDetectionsTest, ThresholdAboveAllScoresGivesNothing) {
  const Tensor raw = raw_with({{3, logit(0.9)}, {40, logit(0.7)}});
  EXPECT_TRUE(decode_detections(raw, 16, 0.95).empty());
  EXPECT_EQ(decode_detections(raw, 16, 0.5).size(), 2u);
}

TEST(DecodeDetectionsTest, CoincidentBoxesKeepHigherScore) {
  Tensor raw = raw_with({{5, logit(0.9)}, {6, logit(0.8)}});
  // Both cells regress to 16 x 16 boxes centered 0.08 px apart at the shared edge.
  for (int cell : {5, 6}) {
    raw.at(cell, 1) = static_cast<float>(std::atanh(cell == 5 ? 0.98 : -0.98));
    raw.at(cell, 3) = raw.at(cell, 4) = static_cast<float>(std::log(4.0));
  }
  const auto dets = decode_detections(raw, 16, 0.05);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].cell, 5);
  EXPECT_NEAR(dets[0].score, 0.9, 1e-6);
}

// Exhaustive NMS reference: walk every (score desc, cell asc) candidate and
// compare it against every already-kept detection.
std::vector<int> reference_nms(const Tensor& raw, double threshold, double iou) {
  struct Cand {
    double score;
    int cell;
    Box box;
  };
  std::vector<Cand> cands;
  for (int cell = 0; cell < 256; ++cell) {
    const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(raw.at(cell, 0))));
    if (s < threshold) continue;
    cands.push_back({s, cell,
                     decode_box(raw.at(cell, 1), raw.at(cell, 2), raw.at(cell, 3), raw.at(cell, 4),
                                cell, 16)});
  }
  std::vector<int> kept;
  std::vector<bool> used(cands.size(), false);
  for (std::size_t round = 0; round < cands.size(); ++round) {
    int best = -1;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (used[i]) continue;
      if (best < 0 || cands[i].score > cands[static_cast<std::size_t>(best)].score ||
          (cands[i].score == cands[static_cast<std::size_t>(best)].score &&
           cands[i].cell < cands[static_cast<std::size_t>(best)].cell)) {
        best = static_cast<int>(i);
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    bool suppressed = false;
    for (int k : kept) {
      for (const Cand& c : cands) {
        if (c.cell == k && box_iou(c.box, cands[static_cast<std::size_t>(best)].box) > iou) {
          suppressed = true;
        }
      }
    }
    if (!suppressed) kept.push_back(cands[static_cast<std::size_t>(best)].cell);
  }
  return kept;
}

TEST(DecodeDetectionsTest, MatchesExhaustiveReferenceNms) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor raw = raw_with({});
    // Five boxes packed into a small region so that they overlap often.
    for (int k = 0; k < 5; ++k) {
      const int cell = static_cast<int>(rng.below(3)) * 16 + static_cast<int>(rng.below(3));
      raw.at(cell, 0) = static_cast<float>(rng.normal());
      for (int j = 1; j < 5; ++j) raw.at(cell, j) = static_cast<float>(rng.uniform(-1, 1.5));
    }
    const auto dets = decode_detections(raw, 16, 0.05, 0.5);
    std::vector<int> cells;
    for (const auto& d : dets) cells.push_back(d.cell);
    ASSERT_EQ(cells, reference_nms(raw, 0.05, 0.5)) << "trial " << trial;
  }
}

TEST(DecodeDetectionsTest, EqualScoresBreakTowardLowerCell) {
  const Tensor raw = raw_with({{9, 2.0}, {4, 2.0}});
  const auto dets = decode_detections(raw, 16, 0.5);
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_EQ(dets[0].cell, 4);
  EXPECT_EQ(dets[1].cell, 9);
}

TEST(DiscriminatorTest, ReversalContract) {
  const ParamSet<double> p = random_params(14);
  Rng rng(14);
  std::vector<double> pooled(kChannels);
  for (double& v : pooled) v = rng.normal();
  for (Stage stage : {Stage::kBackbone, Stage::kEncoder, Stage::kDecoder}) {
    ParamSet<double> g0 = p.zeros_like(), g1 = p.zeros_like(), gplain = p.zeros_like();
    const auto d0 = discriminate_backward<double>(p, stage, pooled, 0.7, 0.0, g0);
    const auto d1 = discriminate_backward<double>(p, stage, pooled, 0.7, 1.0, g1);
    const auto dplain = discriminate_backward<double>(p, stage, pooled, 0.7, -1.0, gplain);
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      EXPECT_EQ(d0[i], 0.0);
      EXPECT_EQ(d1[i], -dplain[i]);
    }
    // Discriminator parameters never see the reversal.
    EXPECT_EQ(g0, g1);
    EXPECT_EQ(g1, gplain);
  }
}

TEST(DiscriminatorTest, UnreversedFeatureGradientMatchesFiniteDifferences) {
  const ParamSet<double> p = random_params(15);
  for (Stage stage : {Stage::kBackbone, Stage::kEncoder, Stage::kDecoder}) {
    auto f = [&](std::span<const double> x, std::span<double> grad) {
      if (!grad.empty()) {
        ParamSet<double> g = p.zeros_like();
        // lambda = -1 undoes the reversal, leaving d logit / d pooled.
        const auto d = discriminate_backward<double>(p, stage, x, 1.0, -1.0, g);
        std::copy(d.begin(), d.end(), grad.begin());
      }
      return discriminate<double>(p, stage, x);
    };
    Rng rng(16);
    std::vector<double> x(kChannels);
    for (double& v : x) v = rng.normal();
    EXPECT_LT(fd_check(f, x).max_rel_error, 1e-6);
  }
}

TEST(DiscriminatorTest, StageNamesRoundTrip) {
  for (Stage s : {Stage::kBackbone, Stage::kEncoder, Stage::kDecoder}) {
    EXPECT_EQ(parse_stage(stage_name(s)), s);
  }
  EXPECT_THROW(parse_stage("neck"), Error);
}

TEST(DetectorParamsTest, LayoutValidation) {
  Rng rng(17);
  const ParamSet<float> p = init_detector_params(rng);
  EXPECT_NO_THROW(validate_detector_params(p));
  EXPECT_EQ(p.size(), static_cast<std::size_t>(kParamCount));
  ParamSet<float> broken;
  broken.add("backbone.conv1.w", Tensor({1}));
  EXPECT_THROW(validate_detector_params(broken), Error);
}

TEST(InferenceTest, PureFunctionOfParamsAndImage) {
  Rng rng(18);
  const ParamSet<float> p = init_detector_params(rng);
  Tensor img({1, 64, 64});
  for (float& v : img.data()) v = static_cast<float>(rng.uniform());
  EXPECT_EQ(infer_raw(p, img), infer_raw(p, img));
}

}  // namespace
}  // namespace uda

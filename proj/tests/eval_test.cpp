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

#include "froc_oracle.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"
#include "uda_forge/error.hpp"
#include "uda_forge/eval.hpp"

namespace uda {
namespace {

Detection at(double cx, double cy, double score) { return {Box{cx, cy, 4, 4}, score, 0}; }

const Box kTenBox{5, 5, 10, 10};  // spans [0, 10] x [0, 10]

TEST(MatchTest, CenterInsideIsTruePositive) {
  const auto r = match_detections({at(5, 5, 0.9)}, {kTenBox});
  EXPECT_TRUE(r.detection_is_tp[0]);
  EXPECT_EQ(r.tp, 1);
}

TEST(MatchTest, BoundaryIsInclusive) {
  EXPECT_EQ(match_detections({at(10, 5, 0.9)}, {kTenBox}).tp, 1);
  EXPECT_EQ(match_detections({at(0, 0, 0.9)}, {kTenBox}).tp, 1);
  EXPECT_EQ(match_detections({at(10.001, 5, 0.9)}, {kTenBox}).tp, 0);
}

TEST(MatchTest, HigherScoreClaimsTheBox) {
  const auto r = match_detections({at(4, 4, 0.8), at(6, 6, 0.9)}, {kTenBox});
  EXPECT_FALSE(r.detection_is_tp[0]);
  EXPECT_TRUE(r.detection_is_tp[1]);
  EXPECT_EQ(r.tp, 1);
  EXPECT_EQ(r.fp, 1);
  EXPECT_EQ(r.order, (std::vector<std::size_t>{1, 0}));
}

TEST(MatchTest, TiesResolveInListOrder) {
  const auto r = match_detections({at(4, 4, 0.5), at(6, 6, 0.5)}, {kTenBox});
  EXPECT_TRUE(r.detection_is_tp[0]);
  EXPECT_FALSE(r.detection_is_tp[1]);
}

TEST(MatchTest, LowestIndexBoxConsumedFirst) {
  const Box overlap{7, 7, 10, 10};
  const auto r = match_detections({at(6, 6, 0.9), at(7, 7, 0.8)}, {kTenBox, overlap});
  EXPECT_EQ(r.tp, 2);
  EXPECT_TRUE(r.gt_hit[0]);
  EXPECT_TRUE(r.gt_hit[1]);
}

TEST(MatchTest, EachBoxHitAtMostOnce) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d = uda::testing::random_micro_dataset(rng);
    for (std::size_t i = 0; i < d.dets.size(); ++i) {
      const auto r = match_detections(d.dets[i], d.gts[i]);
      EXPECT_EQ(r.tp, std::count(r.gt_hit.begin(), r.gt_hit.end(), true));
      EXPECT_EQ(r.tp + r.fp, static_cast<int>(d.dets[i].size()));
      EXPECT_EQ(r.tp, uda::testing::oracle_true_positives(d.dets[i], d.gts[i]));
    }
  }
}

TEST(FrocTest, NoDetectionsGiveZeroRecall) {
  const auto curve = froc({{}, {}}, {{kTenBox}, {}});
  for (const auto& p : curve.points) EXPECT_EQ(p.recall, 0.0);
  EXPECT_EQ(curve.n_images, 2);
  EXPECT_EQ(curve.n_gt_boxes, 1);
}

TEST(FrocTest, PerfectDetectorGivesFullRecall) {
  const auto curve = froc({{at(5, 5, 0.7)}, {at(30, 30, 0.6)}}, {{kTenBox}, {Box{30, 30, 6, 6}}});
  for (const auto& p : curve.points) EXPECT_EQ(p.recall, 1.0);
}

TEST(FrocTest, HandComputedCurve) {
  // Image 0: TP at 0.9, FP at 0.8. Image 1: FP at 0.7, TP at 0.6.
  const std::vector<std::vector<Detection>> dets = {{at(5, 5, 0.9), at(50, 50, 0.8)},
                                                    {at(50, 50, 0.7), at(30, 30, 0.6)}};
  const std::vector<std::vector<Box>> gts = {{kTenBox}, {Box{30, 30, 6, 6}}};
  const auto curve = froc(dets, gts, {0.0, 0.5, 1.0});
  EXPECT_DOUBLE_EQ(curve.points[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(curve.points[1].recall, 0.5);
  EXPECT_DOUBLE_EQ(curve.points[2].recall, 1.0);
  EXPECT_DOUBLE_EQ(recall_at(curve, 1.0), 1.0);
}

TEST(FrocTest, MatchesExhaustiveThresholdOracle) {
  Rng rng(2);
  const auto& points = default_fpi_points();
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = uda::testing::random_micro_dataset(rng);
    const auto curve = froc(d.dets, d.gts, points);
    const auto want = uda::testing::oracle_froc(d, points);
    for (std::size_t p = 0; p < points.size(); ++p) {
      ASSERT_EQ(curve.points[p].recall, want[p]) << "trial " << trial << " fpi " << points[p];
    }
  }
}

TEST(FrocTest, RecallMonotoneInAllowance) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = uda::testing::random_micro_dataset(rng);
    const auto curve = froc(d.dets, d.gts, {0.0, 0.05, 0.1, 0.3, 0.5, 1.0, 2.0, 5.0});
    for (std::size_t p = 1; p < curve.points.size(); ++p) {
      EXPECT_GE(curve.points[p].recall, curve.points[p - 1].recall);
      EXPECT_LE(curve.points[p].recall, 1.0);
    }
  }
}

TEST(FrocTest, ExtraFalsePositiveNeverHelps) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto d = uda::testing::random_micro_dataset(rng);
    const auto before = froc(d.dets, d.gts);
    // A detection far outside every box (boxes stay within [-1, 65]).
    d.dets[0].push_back({Box{200, 200, 4, 4}, rng.uniform(), 99});
    const auto after = froc(d.dets, d.gts);
    for (std::size_t p = 0; p < before.points.size(); ++p) {
      EXPECT_LE(after.points[p].recall, before.points[p].recall);
    }
  }
}

TEST(FrocTest, RejectsEmptyImageSet) {
  EXPECT_THROW(froc({}, {}), Error);
}

TEST(ImageMetricsTest, PerfectPredictor) {
  const auto m = image_metrics({{at(5, 5, 0.9)}, {}}, {{kTenBox}, {}});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(ImageMetricsTest, AllNegativeConvention) {
  const auto m = image_metrics({{}, {at(5, 5, 0.2)}}, {{}, {}});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 0.0);
}

TEST(ImageMetricsTest, MixedFourImages) {
  // TP, FP, FN, TN in that order.
  const auto m = image_metrics({{at(5, 5, 0.9)}, {at(5, 5, 0.6)}, {at(5, 5, 0.3)}, {}},
                               {{kTenBox}, {}, {kTenBox}, {}});
  EXPECT_EQ(m.tp, 1);
  EXPECT_EQ(m.fp, 1);
  EXPECT_EQ(m.fn, 1);
  EXPECT_EQ(m.tn, 1);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
}

TEST(FrocIoTest, SinglePointCsvHasOneDataRow) {
  const auto dir = uda::testing::scratch_dir();
  FrocCurve curve;
  curve.points = {{0.5, 0.75}};
  write_froc_csv(curve, dir / "froc.csv");
  const std::string text = uda::testing::read_file(dir / "froc.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(text.rfind("fpi,recall\n", 0), 0u);
}

TEST(FrocIoTest, CsvRoundTripIsExact) {
  const auto dir = uda::testing::scratch_dir();
  Rng rng(5);
  const auto d = uda::testing::random_micro_dataset(rng);
  FrocCurve curve = froc(d.dets, d.gts, {0.05, 0.1, 0.3, 0.5, 1.0, 2.0});
  curve.points[2].recall = 1.0 / 3.0;
  write_froc_csv(curve, dir / "froc.csv");
  const auto back = read_froc_csv(dir / "froc.csv");
  ASSERT_EQ(back.size(), curve.points.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].fpi, curve.points[i].fpi);
    EXPECT_EQ(back[i].recall, curve.points[i].recall);
  }
}

TEST(FrocIoTest, SvgHasOnePolylinePerCurve) {
  const std::string svg = render_froc_svg(
      {{"source only", {{0.1, 0.2}, {1.0, 0.6}}}, {"adapted", {{0.1, 0.4}, {1.0, 0.8}}}});
  std::size_t count = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
       pos = svg.find("<polyline", pos + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 2u);
  EXPECT_NE(svg.find("source only"), std::string::npos);
  EXPECT_NE(svg.find("adapted"), std::string::npos);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
}

TEST(FrocIoTest, DetectionsCsvRoundTrip) {
  const auto dir = uda::testing::scratch_dir();
  const std::vector<std::vector<Detection>> dets = {{at(5.25, 6.5, 0.875)}, {}, {at(1, 2, 0.5), at(3, 4, 0.25)}};
  write_detections_csv(dets, dir / "dets.csv");
  const auto back = read_detections_csv(dir / "dets.csv", 3);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].size(), 1u);
  EXPECT_TRUE(back[1].empty());
  ASSERT_EQ(back[2].size(), 2u);
  EXPECT_EQ(back[0][0].box.cx, 5.25);
  EXPECT_EQ(back[0][0].score, 0.875);
  EXPECT_EQ(back[2][1].box.cy, 4.0);
}

TEST(FrocIoTest, DetectionsCsvRejectsOutOfRangeImage) {
  const auto dir = uda::testing::scratch_dir();
  write_detections_csv({{}, {at(1, 1, 0.5)}}, dir / "dets.csv");
  EXPECT_THROW(read_detections_csv(dir / "dets.csv", 1), Error);
}

}  // namespace
}  // namespace uda

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

#include <filesystem>
#include <string>
#include <vector>

#include "uda_forge/detector.hpp"
#include "uda_forge/synthdata.hpp"

namespace uda {

inline const std::vector<double>& default_fpi_points() {
  static const std::vector<double> kPoints = {0.05, 0.1, 0.3, 0.5, 1.0, 2.0};
  return kPoints;
}

struct MatchResult {
  std::vector<bool> detection_is_tp;  // indexed like the input detections
  std::vector<bool> gt_hit;
  std::vector<std::size_t> order;  // detection indices by descending score
  int tp = 0;
  int fp = 0;
};

// A detection is a true positive when its center lies inside (boundary
// inclusive) a ground-truth box that no higher-scored detection has claimed.
// Detections are visited by descending score, equal scores in list order;
// the lowest-index qualifying box is consumed.
MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<Box>& gts);

struct FrocPoint {
  double fpi = 0;
  double recall = 0;
};

struct FrocCurve {
  std::vector<FrocPoint> points;  // at the requested FPI allowances, ascending
  std::vector<FrocPoint> operating;  // every distinct threshold of the sweep
  int n_images = 0;
  int n_gt_boxes = 0;
};

// Score-threshold sweep over all detections. Recall at an FPI allowance is the
// best recall of any threshold whose FPI does not exceed it.
FrocCurve froc(const std::vector<std::vector<Detection>>& dets_per_image,
               const std::vector<std::vector<Box>>& gts_per_image,
               const std::vector<double>& fpi_points = default_fpi_points());

double recall_at(const FrocCurve& curve, double fpi);

struct ImageMetrics {
  double accuracy = 0;
  double f1 = 0;
  int tp = 0, fp = 0, fn = 0, tn = 0;
};

// Image positive iff any detection scores >= threshold; truth positive iff
// the image has at least one box.
ImageMetrics image_metrics(const std::vector<std::vector<Detection>>& dets_per_image,
                           const std::vector<std::vector<Box>>& gts_per_image,
                           double score_threshold = 0.5);

// CSV with header fpi,recall.
void write_froc_csv(const FrocCurve& curve, const std::filesystem::path& path);
std::vector<FrocPoint> read_froc_csv(const std::filesystem::path& path);

struct LabeledCurve {
  std::string label;
  std::vector<FrocPoint> points;
};

// SVG plot: axes, one polyline per curve, legend.
std::string render_froc_svg(const std::vector<LabeledCurve>& curves);
void write_froc_svg(const std::vector<LabeledCurve>& curves, const std::filesystem::path& path);

// Interchange format: image_id,cx,cy,w,h,score.
void write_detections_csv(const std::vector<std::vector<Detection>>& dets_per_image,
                          const std::filesystem::path& path);
std::vector<std::vector<Detection>> read_detections_csv(const std::filesystem::path& path,
                                                        std::size_t n_images);

}  // namespace uda

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

#include <algorithm>
#include <set>
#include <vector>

#include "uda_forge/detector.hpp"
#include "uda_forge/rng.hpp"

namespace uda::testing {

struct MicroDataset {
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<Box>> gts;
};

// Up to 10 images with up to 5 boxes and 6 detections each. Scores are drawn
// from a coarse grid so that ties are common; roughly half the detections
// are centered inside a box.
inline MicroDataset random_micro_dataset(Rng& rng) {
  MicroDataset d;
  const int n_images = 1 + static_cast<int>(rng.below(10));
  for (int i = 0; i < n_images; ++i) {
    std::vector<Box> gts;
    const int n_gt = static_cast<int>(rng.below(6));
    for (int k = 0; k < n_gt; ++k) {
      gts.push_back({rng.uniform(5, 59), rng.uniform(5, 59), rng.uniform(4, 12), rng.uniform(4, 12)});
    }
    std::vector<Detection> dets;
    const int n_det = static_cast<int>(rng.below(7));
    for (int k = 0; k < n_det; ++k) {
      Detection det;
      if (!gts.empty() && rng.uniform() < 0.5) {
        const Box& g = gts[rng.below(gts.size())];
        det.box = {g.cx + rng.uniform(-g.w, g.w) * 0.4, g.cy + rng.uniform(-g.h, g.h) * 0.4, 6, 6};
      } else {
        det.box = {rng.uniform(0, 63), rng.uniform(0, 63), 6, 6};
      }
      det.score = 0.1 * static_cast<double>(1 + rng.below(9));
      det.cell = k;
      dets.push_back(det);
    }
    d.gts.push_back(std::move(gts));
    d.dets.push_back(std::move(dets));
  }
  return d;
}

// Greedy center-in-box matching written from the rule, counting true positives.
inline int oracle_true_positives(const std::vector<Detection>& dets, const std::vector<Box>& gts) {
  std::vector<std::size_t> idx(dets.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> hit(gts.size(), false);
  int tp = 0;
  for (std::size_t i : idx) {
    const double cx = dets[i].box.cx, cy = dets[i].box.cy;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (hit[g]) continue;
      if (cx >= gts[g].cx - gts[g].w / 2 && cx <= gts[g].cx + gts[g].w / 2 &&
          cy >= gts[g].cy - gts[g].h / 2 && cy <= gts[g].cy + gts[g].h / 2) {
        hit[g] = true;
        ++tp;
        break;
      }
    }
  }
  return tp;
}

// Enumerates every distinct score threshold (plus "keep nothing"), recounts
// TPs and FPs from scratch, and takes the best recall within each allowance.
inline std::vector<double> oracle_froc(const MicroDataset& d, const std::vector<double>& fpi_points) {
  std::set<double> thresholds = {2.0};
  int n_gt = 0;
  for (std::size_t i = 0; i < d.dets.size(); ++i) {
    for (const Detection& det : d.dets[i]) thresholds.insert(det.score);
    n_gt += static_cast<int>(d.gts[i].size());
  }
  std::vector<double> best(fpi_points.size(), 0.0);
  for (double t : thresholds) {
    int tp = 0, fp = 0;
    for (std::size_t i = 0; i < d.dets.size(); ++i) {
      std::vector<Detection> kept;
      for (const Detection& det : d.dets[i]) {
        if (det.score >= t) kept.push_back(det);
      }
      const int image_tp = oracle_true_positives(kept, d.gts[i]);
      tp += image_tp;
      fp += static_cast<int>(kept.size()) - image_tp;
    }
    const double fpi = static_cast<double>(fp) / static_cast<double>(d.dets.size());
    const double recall = n_gt == 0 ? 0.0 : static_cast<double>(tp) / n_gt;
    for (std::size_t p = 0; p < fpi_points.size(); ++p) {
      if (fpi <= fpi_points[p]) best[p] = std::max(best[p], recall);
    }
  }
  return best;
}

}  // namespace uda::testing

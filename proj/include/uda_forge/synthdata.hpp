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
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "uda_forge/rng.hpp"
#include "uda_forge/tensor.hpp"

namespace uda {

inline constexpr int kImageSize = 64;

// Axis-aligned box in pixel-index coordinates (pixel i sits at coordinate i).
// Every box is of the single malignant class.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  double x_lo() const { return cx - w / 2; }
  double x_hi() const { return cx + w / 2; }
  double y_lo() const { return cy - h / 2; }
  double y_hi() const { return cy + h / 2; }

  friend bool operator==(const Box&, const Box&) = default;
};

enum class Domain { kSource, kTarget };

const char* domain_name(Domain d);
Domain parse_domain(const std::string& s);

// Generation knobs of one imaging domain. Intensities are in [0, 1].
struct DomainSpec {
  double background_mean = 0.35;
  double background_noise_sd = 0.05;
  std::array<double, 2> lesion_intensity{0.5, 0.8};
  std::array<double, 2> lesion_radius{3.0, 6.0};
  std::array<double, 3> lesion_count_probs{0.4, 0.5, 0.1};  // P(0), P(1), P(2)
  double global_contrast = 1.0;
  double blur_sigma = 0.0;

  static DomainSpec default_source();
  static DomainSpec default_target();

  // Throws kInvalidArgument describing the first violated invariant.
  void validate() const;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

struct Sample {
  Tensor image;  // [1 x 64 x 64], values in [0, 1]
  Domain domain = Domain::kSource;
  std::vector<Box> boxes;  // empty for benign images
};

struct AugmentationRecord {
  bool flipped = false;
  double contrast_factor = 1.0;
  std::uint64_t noise_seed = 0;
  bool blur_applied = false;
  bool downscale_applied = false;
};

struct StrongAugmentOptions {
  double blur_sigma = 1.0;
  double contrast_lo = 0.7;
  double contrast_hi = 1.3;
  bool downscale = true;
};

Sample generate_sample(const DomainSpec& spec, Domain domain, Rng& rng);

// Per-sample seeds come from successive draws of a stream seeded with `seed`.
std::vector<Sample> generate_dataset(const DomainSpec& spec, Domain domain, int count,
                                     std::uint64_t seed);

// Horizontal flip of image and boxes (cx -> W - 1 - cx).
Sample flip_horizontal(const Sample& s);

// Flip with probability 0.5.
std::pair<Sample, AugmentationRecord> weak_augment(const Sample& s, Rng& rng);

// Applies the flip stored in `record`, then blur, mean-preserving contrast and a
// 2x down/up resolution drop. The contrast factor and applied steps are written
// back into `record`.
Sample strong_augment(const Sample& s, AugmentationRecord& record,
                      const StrongAugmentOptions& options, Rng& rng);

// Separable Gaussian blur with replicated borders; sigma <= 0 is a no-op.
void gaussian_blur(Tensor& image, double sigma);

// Dataset directory: images.bin (f32 LE, N x 1 x 64 x 64), labels.csv
// (image_id,cx,cy,w,h) and meta.txt (key=value).
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                   const DomainSpec& spec);
std::vector<Sample> read_dataset(const std::filesystem::path& dir);

}  // namespace uda

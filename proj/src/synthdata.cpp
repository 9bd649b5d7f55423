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

#include "uda_forge/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "uda_forge/binary_io.hpp"

namespace uda {
namespace {

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kParse, context + ": not a number: '" + s + "'");
}

void apply_contrast(Tensor& image, double center, double factor) {
  for (float& v : image.data()) v = clamp01(center + factor * (v - center));
}

}  // namespace

const char* domain_name(Domain d) { return d == Domain::kSource ? "source" : "target"; }

Domain parse_domain(const std::string& s) {
  if (s == "source") return Domain::kSource;
  if (s == "target") return Domain::kTarget;
  fail(ErrorCode::kParse, "unknown domain '" + s + "'");
}

DomainSpec DomainSpec::default_source() { return DomainSpec{}; }

DomainSpec DomainSpec::default_target() {
  DomainSpec s;
  s.background_mean = 0.55;
  s.background_noise_sd = 0.10;
  s.lesion_intensity = {0.35, 0.6};
  s.lesion_radius = {2.0, 5.0};
  s.global_contrast = 0.8;
  s.blur_sigma = 0.5;
  return s;
}

void DomainSpec::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    require(ok, ErrorCode::kInvalidArgument, "domain spec: " + msg);
  };
  check(background_mean >= 0 && background_mean <= 1, "background_mean must lie in [0,1]");
  check(background_noise_sd >= 0, "background_noise_sd must be non-negative");
  check(lesion_intensity[0] <= lesion_intensity[1], "lesion intensity range is not ordered");
  check(lesion_intensity[0] >= 0 && lesion_intensity[1] <= 1,
        "lesion intensities must lie in [0,1]");
  check(lesion_radius[0] <= lesion_radius[1], "lesion radius range is not ordered");
  check(lesion_radius[0] > 0, "lesion radius must be positive");
  check(lesion_radius[1] * 2 < kImageSize, "lesion radius too large for the image");
  double total = 0;
  for (double p : lesion_count_probs) {
    check(p >= 0, "lesion count probabilities must be non-negative");
    total += p;
  }
  check(std::abs(total - 1.0) < 1e-9, "lesion count probabilities must sum to 1");
  check(global_contrast > 0, "global_contrast must be positive");
  check(blur_sigma >= 0, "blur_sigma must be non-negative");
}

Sample generate_sample(const DomainSpec& spec, Domain domain, Rng& rng) {
  spec.validate();
  constexpr int n = kImageSize;

  const double u = rng.uniform();
  int lesions = 0;
  double cumulative = 0;
  for (int k = 0; k < 3; ++k) {
    cumulative += spec.lesion_count_probs[static_cast<std::size_t>(k)];
    if (u < cumulative || k == 2) {
      lesions = k;
      break;
    }
  }
  // Zero-probability tails can still be hit by rounding; skip them.
  while (lesions > 0 && spec.lesion_count_probs[static_cast<std::size_t>(lesions)] == 0) {
    --lesions;
  }

  struct Blob {
    double cx, cy, sigma, peak;
  };
  std::vector<Blob> blobs;
  for (int k = 0; k < lesions; ++k) {
    Blob b;
    b.sigma = rng.uniform(spec.lesion_radius[0], spec.lesion_radius[1]);
    b.peak = rng.uniform(spec.lesion_intensity[0], spec.lesion_intensity[1]);
    b.cx = rng.uniform(b.sigma, n - 1 - b.sigma);
    b.cy = rng.uniform(b.sigma, n - 1 - b.sigma);
    blobs.push_back(b);
  }

  Sample s;
  s.domain = domain;
  s.image = Tensor({1, n, n});
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double v = rng.normal(spec.background_mean, spec.background_noise_sd);
      v = std::clamp(v, 0.0, 1.0);
      for (const Blob& b : blobs) {
        const double dx = x - b.cx, dy = y - b.cy;
        v += b.peak * std::exp(-(dx * dx + dy * dy) / (2 * b.sigma * b.sigma));
      }
      s.image.at(0, y, x) = clamp01(v);
    }
  }
  gaussian_blur(s.image, spec.blur_sigma);
  if (spec.global_contrast != 1.0) {
    apply_contrast(s.image, spec.background_mean, spec.global_contrast);
  }

  for (const Blob& b : blobs) {
    const double x_lo = std::max(0.0, b.cx - 2 * b.sigma);
    const double x_hi = std::min(n - 1.0, b.cx + 2 * b.sigma);
    const double y_lo = std::max(0.0, b.cy - 2 * b.sigma);
    const double y_hi = std::min(n - 1.0, b.cy + 2 * b.sigma);
    s.boxes.push_back({(x_lo + x_hi) / 2, (y_lo + y_hi) / 2, x_hi - x_lo, y_hi - y_lo});
  }
  return s;
}

std::vector<Sample> generate_dataset(const DomainSpec& spec, Domain domain, int count,
                                     std::uint64_t seed) {
  require(count >= 0, ErrorCode::kInvalidArgument, "dataset size must be non-negative");
  Rng base(seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng r(base.next());
    out.push_back(generate_sample(spec, domain, r));
  }
  return out;
}

Sample flip_horizontal(const Sample& s) {
  Sample out = s;
  const int c = s.image.dim(0), h = s.image.dim(1), w = s.image.dim(2);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.image.at(ch, y, x) = s.image.at(ch, y, w - 1 - x);
    }
  }
  for (Box& b : out.boxes) b.cx = (w - 1) - b.cx;
  return out;
}

std::pair<Sample, AugmentationRecord> weak_augment(const Sample& s, Rng& rng) {
  AugmentationRecord record;
  record.flipped = rng.uniform() < 0.5;
  return {record.flipped ? flip_horizontal(s) : s, record};
}

Sample strong_augment(const Sample& s, AugmentationRecord& record,
                      const StrongAugmentOptions& options, Rng& rng) {
  record.noise_seed = rng.state();
  Sample out = record.flipped ? flip_horizontal(s) : s;

  record.blur_applied = options.blur_sigma > 0;
  gaussian_blur(out.image, options.blur_sigma);

  record.contrast_factor = rng.uniform(options.contrast_lo, options.contrast_hi);
  double mean = 0;
  for (float v : out.image.data()) mean += v;
  mean /= static_cast<double>(out.image.size());
  if (record.contrast_factor != 1.0) apply_contrast(out.image, mean, record.contrast_factor);

  record.downscale_applied = options.downscale;
  if (options.downscale) {
    const int c = out.image.dim(0), h = out.image.dim(1), w = out.image.dim(2);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y + 1 < h; y += 2) {
        for (int x = 0; x + 1 < w; x += 2) {
          const float avg = (out.image.at(ch, y, x) + out.image.at(ch, y, x + 1) +
                             out.image.at(ch, y + 1, x) + out.image.at(ch, y + 1, x + 1)) /
                            4.0f;
          out.image.at(ch, y, x) = out.image.at(ch, y, x + 1) = avg;
          out.image.at(ch, y + 1, x) = out.image.at(ch, y + 1, x + 1) = avg;
        }
      }
    }
  }
  return out;
}

void gaussian_blur(Tensor& image, double sigma) {
  if (sigma <= 0) return;
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-(i * i) / (2 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor tmp(image.shape());
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, w - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * image.at(ch, y, xx);
        }
        tmp.at(ch, y, x) = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, h - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(ch, yy, x);
        }
        image.at(ch, y, x) = clamp01(acc);
      }
    }
  }
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                   const DomainSpec& spec) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create directory " + dir.string());

  std::ofstream images(dir / "images.bin", std::ios::binary);
  std::ofstream labels(dir / "labels.csv");
  std::ofstream meta(dir / "meta.txt");
  require(images && labels && meta, ErrorCode::kIo, "cannot write dataset in " + dir.string());

  labels << "image_id,cx,cy,w,h\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require_shape(samples[i].image.shape(), {1, kImageSize, kImageSize}, "dataset image");
    binary_io::write_f32s(images, samples[i].image.data());
    for (const Box& b : samples[i].boxes) {
      labels << i << ',' << format_double(b.cx) << ',' << format_double(b.cy) << ','
             << format_double(b.w) << ',' << format_double(b.h) << '\n';
    }
  }

  const Domain domain = samples.empty() ? Domain::kSource : samples.front().domain;
  meta << "count=" << samples.size() << '\n'
       << "domain=" << domain_name(domain) << '\n'
       << "channels=1\nheight=" << kImageSize << "\nwidth=" << kImageSize << '\n'
       << "background_mean=" << format_double(spec.background_mean) << '\n'
       << "background_noise_sd=" << format_double(spec.background_noise_sd) << '\n'
       << "lesion_intensity_lo=" << format_double(spec.lesion_intensity[0]) << '\n'
       << "lesion_intensity_hi=" << format_double(spec.lesion_intensity[1]) << '\n'
       << "lesion_radius_lo=" << format_double(spec.lesion_radius[0]) << '\n'
       << "lesion_radius_hi=" << format_double(spec.lesion_radius[1]) << '\n'
       << "p_lesions_0=" << format_double(spec.lesion_count_probs[0]) << '\n'
       << "p_lesions_1=" << format_double(spec.lesion_count_probs[1]) << '\n'
       << "p_lesions_2=" << format_double(spec.lesion_count_probs[2]) << '\n'
       << "global_contrast=" << format_double(spec.global_contrast) << '\n'
       << "blur_sigma=" << format_double(spec.blur_sigma) << '\n';
  require(static_cast<bool>(images) && static_cast<bool>(labels) && static_cast<bool>(meta),
          ErrorCode::kIo, "write failure in " + dir.string());
}

std::vector<Sample> read_dataset(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "meta.txt");
  require(static_cast<bool>(meta), ErrorCode::kNotFound,
          "dataset missing: no meta.txt in " + dir.string());
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  require(kv.count("count") && kv.count("domain"), ErrorCode::kParse,
          "meta.txt lacks count/domain in " + dir.string());
  const auto count = static_cast<std::size_t>(parse_double(kv["count"], "meta.txt count"));
  const Domain domain = parse_domain(kv["domain"]);

  std::ifstream images(dir / "images.bin", std::ios::binary);
  require(static_cast<bool>(images), ErrorCode::kNotFound, "missing images.bin in " + dir.string());
  std::vector<Sample> samples(count);
  for (Sample& s : samples) {
    s.domain = domain;
    s.image = Tensor({1, kImageSize, kImageSize});
    binary_io::read_f32s(images, s.image.data());
  }

  std::ifstream labels(dir / "labels.csv");
  require(static_cast<bool>(labels), ErrorCode::kNotFound, "missing labels.csv in " + dir.string());
  std::string line;
  std::getline(labels, line);
  require(line == "image_id,cx,cy,w,h", ErrorCode::kParse, "labels.csv: unexpected header");
  int line_no = 1;
  while (std::getline(labels, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    const std::string where = "labels.csv line " + std::to_string(line_no);
    require(cells.size() == 5, ErrorCode::kParse, where + ": expected 5 fields");
    const auto id = static_cast<std::size_t>(parse_double(cells[0], where));
    require(id < count, ErrorCode::kParse, where + ": image_id out of range");
    samples[id].boxes.push_back({parse_double(cells[1], where), parse_double(cells[2], where),
                                 parse_double(cells[3], where), parse_double(cells[4], where)});
  }
  return samples;
}

}  // namespace uda

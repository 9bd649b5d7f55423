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

#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <string>

#include "uda_forge/ablate.hpp"
#include "uda_forge/checkpoint.hpp"
#include "uda_forge/config.hpp"
#include "uda_forge/grad_suite.hpp"
#include "uda_forge/rng.hpp"
#include "uda_forge/trainer.hpp"
#include "uda_forge/uda_forge.h"

struct uda_config {
  uda::RunConfig value;
};

struct uda_rng {
  uda::Rng value;
};

namespace {

thread_local std::string last_error;

uda_status to_status(uda::ErrorCode code) {
  switch (code) {
    case uda::ErrorCode::kInvalidArgument: return UDA_ERR_INVALID_ARGUMENT;
    case uda::ErrorCode::kShapeMismatch: return UDA_ERR_SHAPE_MISMATCH;
    case uda::ErrorCode::kNonFinite: return UDA_ERR_NON_FINITE;
    case uda::ErrorCode::kIo: return UDA_ERR_IO;
    case uda::ErrorCode::kParse: return UDA_ERR_PARSE;
    case uda::ErrorCode::kNotFound: return UDA_ERR_NOT_FOUND;
  }
  return UDA_ERR_INTERNAL;
}

// Runs fn, translating exceptions into a status and the thread's message.
template <typename Fn>
uda_status guarded(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return UDA_OK;
  } catch (const uda::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return UDA_ERR_IO;
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return UDA_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  uda::require(p != nullptr, uda::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

void copy_out(const std::string& text, char* buf, size_t cap, size_t* len) {
  if (len) *len = text.size();
  if (buf && cap > 0) {
    const size_t n = std::min(cap - 1, text.size());
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
  }
}

uda::Datasets datasets_for(const uda::RunConfig& config, const char* data_dir) {
  return data_dir ? uda::read_datasets(data_dir) : uda::make_datasets(config);
}

// data_dir may be a synth output (with target/) or a single dataset.
std::vector<uda::Sample> eval_set(const uda::RunConfig& config, const char* data_dir) {
  if (!data_dir) return uda::make_datasets(config).target;
  const std::filesystem::path dir(data_dir);
  if (std::filesystem::exists(dir / "meta.txt")) return uda::read_dataset(dir);
  return uda::read_dataset(dir / "target");
}

void fill_result(const uda::FrocCurve& curve, const uda::ImageMetrics& image,
                 uda_eval_result* out) {
  if (!out) return;
  *out = uda_eval_result{};
  out->n_points = curve.points.size();
  for (size_t i = 0; i < curve.points.size(); ++i) {
    out->fpi[i] = curve.points[i].fpi;
    out->recall[i] = curve.points[i].recall;
  }
  out->accuracy = image.accuracy;
  out->f1 = image.f1;
  out->n_images = curve.n_images;
  out->n_gt_boxes = curve.n_gt_boxes;
}

std::string metrics_text(const uda::FrocCurve& curve, const uda::ImageMetrics& image) {
  std::string out;
  char line[96];
  for (const uda::FrocPoint& p : curve.points) {
    std::snprintf(line, sizeof line, "R@%g=%.6f\n", p.fpi, p.recall);
    out += line;
  }
  std::snprintf(line, sizeof line, "accuracy=%.6f\nf1=%.6f\nimages=%d\ngt_boxes=%d\n",
                image.accuracy, image.f1, curve.n_images, curve.n_gt_boxes);
  return out + line;
}

void write_eval_outputs(const char* out_dir, const uda::FrocCurve& curve,
                        const uda::ImageMetrics& image,
                        const std::vector<std::vector<uda::Detection>>* dets) {
  if (!out_dir) return;
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  uda::write_froc_csv(curve, dir / "froc.csv");
  if (dets) uda::write_detections_csv(*dets, dir / "detections.csv");
  std::ofstream(dir / "metrics.txt") << metrics_text(curve, image);
}

void check_fpi_capacity(const uda::RunConfig& config) {
  uda::require(config.fpi_points.size() <= UDA_MAX_FPI_POINTS, uda::ErrorCode::kInvalidArgument,
               "at most " + std::to_string(UDA_MAX_FPI_POINTS) + " fpi points are supported");
}

}  // namespace

extern "C" {

const char* uda_version(void) { return "1.0.0"; }

const char* uda_last_error(void) { return last_error.c_str(); }

const char* uda_status_name(uda_status status) {
  switch (status) {
    case UDA_OK: return "ok";
    case UDA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case UDA_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case UDA_ERR_NON_FINITE: return "non-finite value";
    case UDA_ERR_IO: return "i/o error";
    case UDA_ERR_PARSE: return "parse error";
    case UDA_ERR_NOT_FOUND: return "not found";
    case UDA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

uda_status uda_config_new(uda_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new uda_config{};
  });
}

uda_status uda_config_load(const char* path, uda_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new uda_config{uda::load_config(path)};
  });
}

uda_status uda_config_parse(const char* text, uda_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new uda_config{uda::parse_config(text)};
  });
}

void uda_config_free(uda_config* config) { delete config; }

uda_status uda_config_set(uda_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    uda::set_config_value(config->value, key, value);
  });
}

uda_status uda_config_validate(const uda_config* config) {
  return guarded([&] {
    need(config, "config");
    config->value.validate();
  });
}

uda_status uda_config_dump(const uda_config* config, char* buf, size_t cap, size_t* len) {
  return guarded([&] {
    need(config, "config");
    copy_out(uda::dump_config(config->value), buf, cap, len);
  });
}

uda_status uda_rng_new(uint64_t seed, uda_rng** out) {
  return guarded([&] {
    need(out, "out");
    *out = new uda_rng{uda::Rng(seed)};
  });
}

uda_status uda_rng_next(uda_rng* rng, uint64_t* value) {
  return guarded([&] {
    need(rng, "rng");
    need(value, "value");
    *value = rng->value.next();
  });
}

void uda_rng_free(uda_rng* rng) { delete rng; }

uda_status uda_synth(const uda_config* config, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    need(out_dir, "out_dir");
    config->value.validate();
    uda::write_datasets(out_dir, uda::make_datasets(config->value), config->value);
  });
}

uda_status uda_pretrain(const uda_config* config, const char* data_dir, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    need(out_dir, "out_dir");
    config->value.validate();
    uda::pretrain_source(config->value, datasets_for(config->value, data_dir),
                         std::filesystem::path(out_dir));
  });
}

uda_status uda_adapt(const uda_config* config, const char* data_dir, const char* source_ckpt,
                     const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    need(source_ckpt, "source_ckpt");
    need(out_dir, "out_dir");
    config->value.validate();
    const uda::ParamSet<float> source = uda::load_model(source_ckpt, "source");
    uda::adapt(config->value, datasets_for(config->value, data_dir), source,
               std::filesystem::path(out_dir));
  });
}

uda_status uda_evaluate(const uda_config* config, const char* checkpoint, const char* model,
                        const char* data_dir, const char* out_dir, uda_eval_result* result) {
  return guarded([&] {
    need(config, "config");
    need(checkpoint, "checkpoint");
    const uda::RunConfig& c = config->value;
    c.validate();
    check_fpi_capacity(c);
    const uda::ParamSet<float> records = uda::read_checkpoint(checkpoint);
    std::string prefix = model ? model : "";
    if (prefix.empty()) {
      bool has_teacher = false;
      for (const std::string& name : records.names()) {
        has_teacher = has_teacher || name.rfind("teacher/", 0) == 0;
      }
      prefix = has_teacher ? "teacher" : "source";
    }
    const uda::ParamSet<float> params = uda::extract_model(records, prefix);
    const std::vector<uda::Sample> data = eval_set(c, data_dir);
    const uda::EvalResult ev = uda::evaluate(params, data, c);
    const auto dets = uda::detect_all(params, data, c.eval_score_threshold, c.nms_iou);
    write_eval_outputs(out_dir, ev.curve, ev.image, &dets);
    fill_result(ev.curve, ev.image, result);
  });
}

uda_status uda_evaluate_detections(const uda_config* config, const char* detections_csv,
                                   const char* data_dir, const char* out_dir,
                                   uda_eval_result* result) {
  return guarded([&] {
    need(config, "config");
    need(detections_csv, "detections_csv");
    need(data_dir, "data_dir");
    const uda::RunConfig& c = config->value;
    c.validate();
    check_fpi_capacity(c);
    const std::vector<uda::Sample> data = eval_set(c, data_dir);
    uda::require(!data.empty(), uda::ErrorCode::kInvalidArgument, "evaluate: empty dataset");
    const auto dets = uda::read_detections_csv(detections_csv, data.size());
    std::vector<std::vector<uda::Box>> gts;
    for (const uda::Sample& s : data) gts.push_back(s.boxes);
    const uda::FrocCurve curve = uda::froc(dets, gts, c.fpi_points);
    const uda::ImageMetrics image = uda::image_metrics(dets, gts, c.image_score_threshold);
    write_eval_outputs(out_dir, curve, image, nullptr);
    fill_result(curve, image, result);
  });
}

uda_status uda_froc_plot(const char* const* csv_paths, const char* const* labels, size_t n,
                         const char* out_svg) {
  return guarded([&] {
    need(csv_paths, "csv_paths");
    need(out_svg, "out_svg");
    uda::require(n > 0, uda::ErrorCode::kInvalidArgument, "froc_plot: no input curves");
    std::vector<uda::LabeledCurve> curves;
    for (size_t i = 0; i < n; ++i) {
      need(csv_paths[i], "csv path");
      uda::LabeledCurve curve;
      curve.label = labels && labels[i] ? labels[i] : std::filesystem::path(csv_paths[i]).stem().string();
      curve.points = uda::read_froc_csv(csv_paths[i]);
      curves.push_back(std::move(curve));
    }
    uda::write_froc_svg(curves, out_svg);
  });
}

uda_status uda_ablate(const uda_config* config, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    need(out_dir, "out_dir");
    const uda::AblationTable table = uda::run_ablation(config->value);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "ablation.csv") << uda::ablation_csv(table);
    std::ofstream(dir / "ablation_runs.csv") << uda::ablation_runs_csv(table);
  });
}

uda_status uda_grad_check(uint64_t seed, int instances, double* max_rel_error, char* report,
                          size_t cap, size_t* len) {
  return guarded([&] {
    need(max_rel_error, "max_rel_error");
    uda::require(instances > 0, uda::ErrorCode::kInvalidArgument, "instances must be positive");
    const auto results = uda::run_grad_suite(seed, instances);
    std::string text;
    char line[128];
    for (const auto& r : results) {
      std::snprintf(line, sizeof line, "%-20s instances=%d max_rel_error=%.3e\n", r.name.c_str(),
                    r.instances, r.max_rel_error);
      text += line;
    }
    *max_rel_error = uda::max_error(results);
    copy_out(text, report, cap, len);
  });
}

}  // extern "C"

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

/* C interface to the uda_forge library.
 *
 * Every function returns a uda_status. On failure, uda_last_error() holds a
 * message for the calling thread until its next library call. Handles are
 * opaque and owned by the caller; release them with the matching _free.
 * Paths are UTF-8. Optional pointer arguments may be NULL where noted.
 */
#ifndef UDA_FORGE_UDA_FORGE_H_
#define UDA_FORGE_UDA_FORGE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define UDA_FORGE_API __declspec(dllexport)
#else
#define UDA_FORGE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum uda_status {
  UDA_OK = 0,
  UDA_ERR_INVALID_ARGUMENT = 1,
  UDA_ERR_SHAPE_MISMATCH = 2,
  UDA_ERR_NON_FINITE = 3,
  UDA_ERR_IO = 4,
  UDA_ERR_PARSE = 5,
  UDA_ERR_NOT_FOUND = 6,
  UDA_ERR_INTERNAL = 7
} uda_status;

#define UDA_MAX_FPI_POINTS 16

typedef struct uda_config uda_config;
typedef struct uda_rng uda_rng;

typedef struct uda_eval_result {
  size_t n_points;
  double fpi[UDA_MAX_FPI_POINTS];
  double recall[UDA_MAX_FPI_POINTS];
  double accuracy; /* image level, benign vs malignant */
  double f1;
  int n_images;
  int n_gt_boxes;
} uda_eval_result;

UDA_FORGE_API const char* uda_version(void);
UDA_FORGE_API const char* uda_last_error(void);
UDA_FORGE_API const char* uda_status_name(uda_status status);

/* Configuration. A new config holds the documented defaults. */
UDA_FORGE_API uda_status uda_config_new(uda_config** out);
UDA_FORGE_API uda_status uda_config_load(const char* path, uda_config** out);
UDA_FORGE_API uda_status uda_config_parse(const char* text, uda_config** out);
UDA_FORGE_API void uda_config_free(uda_config* config);
/* key uses dotted names for sections, e.g. "target.blur_sigma". */
UDA_FORGE_API uda_status uda_config_set(uda_config* config, const char* key, const char* value);
UDA_FORGE_API uda_status uda_config_validate(const uda_config* config);
/* Writes at most cap bytes including the terminator; *len receives the
 * full text length (excluding the terminator). buf may be NULL when cap is 0. */
UDA_FORGE_API uda_status uda_config_dump(const uda_config* config, char* buf, size_t cap,
                                         size_t* len);

/* SplitMix64 stream. */
UDA_FORGE_API uda_status uda_rng_new(uint64_t seed, uda_rng** out);
UDA_FORGE_API uda_status uda_rng_next(uda_rng* rng, uint64_t* value);
UDA_FORGE_API void uda_rng_free(uda_rng* rng);

/* Writes out_dir/{source,source_holdout,target} for the config's seed. */
UDA_FORGE_API uda_status uda_synth(const uda_config* config, const char* out_dir);

/* data_dir may be NULL: the datasets are then generated from the config.
 * Writes source.ckpt, pretrain_log.csv, froc_source_holdout.csv, report.txt. */
UDA_FORGE_API uda_status uda_pretrain(const uda_config* config, const char* data_dir,
                                      const char* out_dir);

/* Loads the "source" model of source_ckpt. Writes train_log.csv,
 * froc_epoch_<n>.csv, adapt.ckpt (teacher and student) and report.txt. */
UDA_FORGE_API uda_status uda_adapt(const uda_config* config, const char* data_dir,
                                   const char* source_ckpt, const char* out_dir);

/* Evaluates one model of a checkpoint on the target set (data_dir/target, or
 * data_dir itself when it is a dataset directory, or generated when NULL).
 * model may be NULL: "teacher" when present, else "source". With out_dir
 * set, writes froc.csv, detections.csv and metrics.txt. result may be NULL. */
UDA_FORGE_API uda_status uda_evaluate(const uda_config* config, const char* checkpoint,
                                      const char* model, const char* data_dir,
                                      const char* out_dir, uda_eval_result* result);

/* Scores an image_id,cx,cy,w,h,score CSV against a dataset directory. */
UDA_FORGE_API uda_status uda_evaluate_detections(const uda_config* config,
                                                 const char* detections_csv,
                                                 const char* data_dir, const char* out_dir,
                                                 uda_eval_result* result);

/* Renders fpi,recall CSV files into one SVG. labels may be NULL. */
UDA_FORGE_API uda_status uda_froc_plot(const char* const* csv_paths, const char* const* labels,
                                       size_t n, const char* out_svg);

/* Runs the comparison table and writes ablation.csv and ablation_runs.csv. */
UDA_FORGE_API uda_status uda_ablate(const uda_config* config, const char* out_dir);

/* Runs the finite-difference suite; *max_rel_error receives the worst error.
 * report follows the uda_config_dump buffer convention and may be NULL. */
UDA_FORGE_API uda_status uda_grad_check(uint64_t seed, int instances, double* max_rel_error,
                                        char* report, size_t cap, size_t* len);

#ifdef __cplusplus
}
#endif

#endif /* UDA_FORGE_UDA_FORGE_H_ */

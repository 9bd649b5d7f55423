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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uda_forge/control.hpp"
#include "uda_forge/eval.hpp"
#include "uda_forge/losses.hpp"
#include "uda_forge/param_set.hpp"
#include "uda_forge/synthdata.hpp"

namespace uda {

struct RunConfig {
  std::uint64_t seed = 1;

  // Data.
  int n_source = 500;
  int n_target = 500;
  int n_source_holdout = 200;
  DomainSpec source = DomainSpec::default_source();
  DomainSpec target = DomainSpec::default_target();
  double strong_blur_sigma = 1.0;
  double strong_contrast_lo = 0.7;
  double strong_contrast_hi = 1.3;
  bool strong_downscale = true;

  // Optimization.
  int batch_size = 16;
  double lr = 2e-4;
  double lr_backbone = 2e-5;
  double pretrain_lr = 2e-3;
  double pretrain_lr_backbone = 2e-3;
  int e_pre = 30;
  int e_teach = 30;
  int e_decay = 10;
  int e_reinit = 20;

  // Mask annealing.
  double mu0 = 0.3;
  double mu_min = 0.05;
  double mu_max = 0.95;
  double eta_min = 0.05;
  double eta_max = 0.15;
  int t_i = 63;
  double ema_beta_lbar = 0.9;
  double fixed_mask_ratio = 0.3;

  // Teacher-student.
  double gamma_ema = 0.9996;
  double c_soft = 0.15;
  double c_hard = 0.80;
  double alpha_acr = 5.0;
  int e_total = 0;  // ACR horizon in iterations; 0 = all adaptation iterations

  // Loss weights.
  double lambda_unsup = 1.0;
  double lambda_mask = 1.0;
  double beta_bac = 0.3;
  double beta_enc = 1.0;
  double beta_dec = 1.0;
  double grl_lambda = 1.0;
  bool mask_loss_masked_only = true;

  // Ablation switches.
  bool enable_ma = true;
  bool enable_acr = true;
  bool enable_adv = true;
  bool enable_selective = true;

  // Evaluation.
  double eval_score_threshold = 0.05;
  double nms_iou = 0.5;
  double image_score_threshold = 0.5;
  std::vector<double> fpi_points = default_fpi_points();
  bool epoch_froc = true;

  std::vector<std::uint64_t> ablation_seeds = {1, 2, 3, 4, 5};

  // Throws kInvalidArgument naming the first violated invariant.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Row of train_log.csv.
struct LogRow {
  int iter = 0;
  int epoch = 0;
  LossBreakdown loss;
  double mu = 0;
  double eta_t = 0;
  double delta = 0;
  double threshold = 0;
  int n_pseudo = 0;
};

inline constexpr const char* kTrainLogHeader =
    "iter,epoch,l_sup,l_unsup,l_adv,l_mask,l_total,mu,eta_t,delta,C,n_pseudo";

std::string format_log_row(const LogRow& row);
void write_train_log(const std::vector<LogRow>& rows, const std::filesystem::path& path);

struct Datasets {
  std::vector<Sample> source;  // labeled training images
  std::vector<Sample> source_holdout;
  std::vector<Sample> target;  // adaptation and evaluation images
};

Datasets make_datasets(const RunConfig& config);

// Directory layout shared with the synth command: <dir>/source,
// <dir>/source_holdout and <dir>/target, each a dataset directory.
void write_datasets(const std::filesystem::path& dir, const Datasets& data, const RunConfig& config);
Datasets read_datasets(const std::filesystem::path& dir);

struct EvalResult {
  FrocCurve curve;
  ImageMetrics image;
};

// Inference with the given weights, decode at eval_score_threshold, FROC sweep.
EvalResult evaluate(const ParamSet<float>& model, const std::vector<Sample>& dataset,
                    const RunConfig& config);

std::vector<std::vector<Detection>> detect_all(const ParamSet<float>& model,
                                               const std::vector<Sample>& dataset,
                                               double score_threshold, double nms_iou);

struct PretrainResult {
  ParamSet<float> model;
  std::vector<LogRow> log;
};

// Source-only training: detection loss plus masked reconstruction.
PretrainResult pretrain_source(const RunConfig& config, const Datasets& data,
                               const std::optional<std::filesystem::path>& out_dir = {});

struct TrainReport {
  std::vector<LogRow> log;
  std::vector<FrocCurve> epoch_curves;  // teacher on target, one per epoch
  std::vector<int> pseudo_per_epoch;
  ParamSet<float> teacher;
  ParamSet<float> student;
  // Student backbone/encoder right after each selective retrain.
  std::vector<ParamSet<float>> retrain_snapshots;
  double probe_accuracy_before = 0;
  double probe_accuracy_after = 0;
};

// Teacher-student adaptation starting from the source checkpoint. With
// out_dir set, writes train_log.csv, froc_epoch_<n>.csv, adapt.ckpt and
// report.txt there.
TrainReport adapt(const RunConfig& config, const Datasets& data, const ParamSet<float>& source,
                  const std::optional<std::filesystem::path>& out_dir = {});

// Accuracy of a freshly fitted linear domain probe on pooled backbone
// features of a fixed set of source and target images.
double domain_probe_accuracy(const ParamSet<float>& model, const Datasets& data, int per_domain);

}  // namespace uda

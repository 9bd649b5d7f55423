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

#include <vector>

#include "uda_forge/detector.hpp"
#include "uda_forge/param_set.hpp"

namespace uda {

// Mask-annealing curriculum state. The mask ratio moves up by the current
// cosine step when the reconstruction loss beats its running mean, and down
// otherwise.
struct AnnealState {
  double mu = 0.3;
  double mu_min = 0.05;
  double mu_max = 0.95;
  double eta_min = 0.05;
  double eta_max = 0.15;
  int period = 100;  // T_i, iterations per warm restart
  int since_restart = 0;  // T_c
  double running_loss = 0.0;  // L-bar
  bool running_loss_valid = false;
  double running_beta = 0.9;

  void validate() const;
};

// eta_min + (eta_max - eta_min) * (1 + cos(pi * T_c / T_i)) / 2
double cosine_step(const AnnealState& s);

AnnealState anneal_update(const AnnealState& s, double loss);

// Same update with the step supplied by the caller instead of cosine_step.
AnnealState anneal_update_with_step(const AnnealState& s, double loss, double step);

// 2 / (1 + exp(-alpha * t / e)) - 1
double acr_delta(double t, double e, double alpha);

struct AcrState {
  double c_soft = 0.15;
  double c_hard = 0.80;
  double alpha = 5.0;
  double t = 0;
  double e = 1;

  void validate() const;
};

double acr_threshold(double delta, double c_soft, double c_hard);
double acr_threshold(const AcrState& s);

// Keeps detections scoring strictly above `threshold`, order preserved.
std::vector<Detection> filter_pseudo_labels(const std::vector<Detection>& dets,
                                            double threshold);

// teacher <- gamma * teacher + (1 - gamma) * student, elementwise.
void ema_update(ParamSet<float>& teacher, const ParamSet<float>& student, double gamma);

// Copies every backbone.* and encoder.* tensor of `source` into `student`.
void selective_retrain(ParamSet<float>& student, const ParamSet<float>& source);

bool is_retrained_param(const std::string& name);

inline bool mae_branch_active(int epoch, int decay_epoch) { return epoch < decay_epoch; }

}  // namespace uda

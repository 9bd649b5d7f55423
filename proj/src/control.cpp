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

#include "uda_forge/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace uda {

void AnnealState::validate() const {
  auto check = [](bool ok, const char* msg) {
    require(ok, ErrorCode::kInvalidArgument, std::string("anneal state: ") + msg);
  };
  check(0 <= mu_min && mu_min <= mu_max && mu_max <= 1, "need 0 <= mu_min <= mu_max <= 1");
  check(mu_min <= mu && mu <= mu_max, "mu outside [mu_min, mu_max]");
  check(0 <= eta_min && eta_min <= eta_max, "need 0 <= eta_min <= eta_max");
  check(period > 0, "warm-restart period T_i must be positive");
  check(0 <= since_restart && since_restart <= period, "T_c outside [0, T_i]");
  check(0 <= running_beta && running_beta < 1, "running-mean beta must lie in [0, 1)");
}

double cosine_step(const AnnealState& s) {
  require(s.period > 0, ErrorCode::kInvalidArgument, "cosine_step: T_i must be positive");
  const double phase = static_cast<double>(s.since_restart) / s.period;
  return s.eta_min +
         0.5 * (s.eta_max - s.eta_min) * (1.0 + std::cos(std::numbers::pi * phase));
}

AnnealState anneal_update_with_step(const AnnealState& s, double loss, double step) {
  require(std::isfinite(loss) && loss >= 0, ErrorCode::kNonFinite,
          "anneal_update: reconstruction loss must be finite and non-negative");
  AnnealState next = s;
  // The running mean starts at the first observed loss.
  const double mean = s.running_loss_valid ? s.running_loss : loss;
  const double moved = loss < mean ? s.mu + step : s.mu - step;
  next.mu = std::clamp(moved, s.mu_min, s.mu_max);
  next.running_loss = s.running_beta * mean + (1.0 - s.running_beta) * loss;
  next.running_loss_valid = true;
  next.since_restart = s.since_restart + 1;
  if (next.since_restart >= s.period) next.since_restart = 0;
  return next;
}

AnnealState anneal_update(const AnnealState& s, double loss) {
  return anneal_update_with_step(s, loss, cosine_step(s));
}

double acr_delta(double t, double e, double alpha) {
  require(e > 0, ErrorCode::kInvalidArgument, "acr_delta: total iterations must be positive");
  return 2.0 / (1.0 + std::exp(-alpha * t / e)) - 1.0;
}

void AcrState::validate() const {
  require(0 <= c_soft && c_soft <= c_hard && c_hard <= 1, ErrorCode::kInvalidArgument,
          "ACR: need 0 <= c_soft <= c_hard <= 1");
  require(e > 0 && t >= 0 && t <= e, ErrorCode::kInvalidArgument, "ACR: need 0 <= t <= e, e > 0");
}

double acr_threshold(double delta, double c_soft, double c_hard) {
  return (1.0 - delta) * c_soft + delta * c_hard;
}

double acr_threshold(const AcrState& s) {
  return acr_threshold(acr_delta(s.t, s.e, s.alpha), s.c_soft, s.c_hard);
}

std::vector<Detection> filter_pseudo_labels(const std::vector<Detection>& dets,
                                            double threshold) {
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    if (d.score > threshold) kept.push_back(d);
  }
  return kept;
}

void ema_update(ParamSet<float>& teacher, const ParamSet<float>& student, double gamma) {
  require_same_layout(teacher, student, "ema_update");
  const double keep = gamma, take = 1.0 - gamma;
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    auto t = teacher[i].data();
    auto s = student[i].data();
    for (std::size_t j = 0; j < t.size(); ++j) {
      t[j] = static_cast<float>(keep * t[j] + take * s[j]);
    }
  }
}

bool is_retrained_param(const std::string& name) {
  return name.rfind("backbone.", 0) == 0 || name.rfind("encoder.", 0) == 0;
}

void selective_retrain(ParamSet<float>& student, const ParamSet<float>& source) {
  for (std::size_t i = 0; i < student.size(); ++i) {
    if (!is_retrained_param(student.name(i))) continue;
    const std::size_t j = source.find(student.name(i));
    require(j < source.size(), ErrorCode::kNotFound,
            "selective_retrain: source checkpoint lacks '" + student.name(i) + "'");
    require(source[j].same_shape(student[i]), ErrorCode::kShapeMismatch,
            "selective_retrain: shape mismatch for '" + student.name(i) + "'");
    student[i] = source[j];
  }
}

}  // namespace uda

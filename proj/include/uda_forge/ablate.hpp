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

#include "uda_forge/trainer.hpp"

namespace uda {

// One row of the comparison table.
struct AblationVariant {
  std::string name;
  bool adapt = true;  // false: evaluate the source checkpoint only
  bool enable_ma = false;
  bool enable_acr = false;
};

// source-only, baseline teacher-student, +MA, +ACR, +MA+ACR.
std::vector<AblationVariant> ablation_variants();

struct AblationRun {
  std::uint64_t seed = 0;
  std::vector<double> recalls;  // at config.fpi_points
  std::vector<double> thresholds;  // per iteration, empty for source-only
  std::vector<int> pseudo_counts;  // per iteration
  std::vector<int> pseudo_per_epoch;
  double seconds = 0;  // wall time including this seed's pretraining
};

struct AblationRow {
  AblationVariant variant;
  std::vector<AblationRun> runs;  // in seed order
  std::vector<double> median;  // per FPI point
};

struct AblationTable {
  std::vector<double> fpi_points;
  std::vector<AblationRow> rows;
};

double median(std::vector<double> values);

// Runs every variant for every seed in config.ablation_seeds. Each seed
// pretrains once with the base config; the adapting variants start from that
// checkpoint with MA/ACR overridden. Seeds run on up to `workers` threads
// (0 = UDA_FORGE_THREADS, else 1); results do not depend on the count.
AblationTable run_ablation(const RunConfig& config, int workers = 0);

// Columns: variant,ma,acr,seeds,R@<fpi>... with median recalls.
std::string ablation_csv(const AblationTable& table);

// Per-seed recalls, one line per (variant, seed).
std::string ablation_runs_csv(const AblationTable& table);

// Worker cap from UDA_FORGE_THREADS; 1 when unset or invalid.
int worker_count_from_env();

}  // namespace uda

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

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "uda_forge/param_set.hpp"

namespace uda {

// Scalar objective over a flat double vector. When `grad` is non-empty the
// callee writes the analytic gradient into it.
using GradObjective =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// |a - b| / max(1e-8, |a| + |b|)
double fd_relative_error(double analytic, double numeric);

// Central differences with step eps * (|x_i| + 1) on every coordinate.
FdReport fd_check(const GradObjective& f, std::span<const double> x, double eps = 1e-3);

std::vector<double> flatten(const ParamSet<double>& params);
void unflatten(std::span<const double> flat, ParamSet<double>& params);

}  // namespace uda

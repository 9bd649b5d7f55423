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

#include "uda_forge/fd_check.hpp"

#include <algorithm>
#include <cmath>

namespace uda {

double fd_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

FdReport fd_check(const GradObjective& f, std::span<const double> x, double eps) {
  require(eps > 0.0, ErrorCode::kInvalidArgument, "fd_check: eps must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> analytic(point.size());
  f(point, analytic);

  FdReport report;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    const double h = eps * (std::abs(saved) + 1.0);
    point[i] = saved + h;
    const double up = f(point, {});
    point[i] = saved - h;
    const double down = f(point, {});
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = fd_relative_error(analytic[i], numeric);
    if (i == 0 || err > report.max_rel_error) {
      report = {err, i, analytic[i], numeric};
    }
  }
  return report;
}

std::vector<double> flatten(const ParamSet<double>& params) {
  std::vector<double> flat;
  flat.reserve(params.scalar_count());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto d = params[i].data();
    flat.insert(flat.end(), d.begin(), d.end());
  }
  return flat;
}

void unflatten(std::span<const double> flat, ParamSet<double>& params) {
  require(flat.size() == params.scalar_count(), ErrorCode::kShapeMismatch,
          "unflatten: length does not match parameter count");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto d = params[i].data();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), d.size(), d.begin());
    offset += d.size();
  }
}

}  // namespace uda

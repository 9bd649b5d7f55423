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

#include "uda_forge/ablate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace uda {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<double> recalls_of(const FrocCurve& curve) {
  std::vector<double> out;
  for (const FrocPoint& p : curve.points) out.push_back(p.recall);
  return out;
}

// Every variant for one seed.
std::vector<AblationRun> run_seed(const RunConfig& base, std::uint64_t seed,
                                  const std::vector<AblationVariant>& variants) {
  RunConfig config = base;
  config.seed = seed;
  config.epoch_froc = false;
  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
  };
  const Clock::time_point start = Clock::now();
  const Datasets data = make_datasets(config);
  const PretrainResult pre = pretrain_source(config, data);
  const double pretrain_seconds = seconds_since(start);

  std::vector<AblationRun> runs;
  for (const AblationVariant& v : variants) {
    const Clock::time_point variant_start = Clock::now();
    AblationRun run;
    run.seed = seed;
    if (!v.adapt) {
      run.recalls = recalls_of(evaluate(pre.model, data.target, config).curve);
    } else {
      RunConfig c = config;
      c.enable_ma = v.enable_ma;
      c.enable_acr = v.enable_acr;
      const TrainReport report = adapt(c, data, pre.model);
      run.recalls = recalls_of(evaluate(report.teacher, data.target, c).curve);
      for (const LogRow& row : report.log) {
        run.thresholds.push_back(row.threshold);
        run.pseudo_counts.push_back(row.n_pseudo);
      }
      run.pseudo_per_epoch = report.pseudo_per_epoch;
    }
    run.seconds = pretrain_seconds + seconds_since(variant_start);
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace

std::vector<AblationVariant> ablation_variants() {
  return {{"source_only", false, false, false},
          {"baseline", true, false, false},
          {"ma", true, true, false},
          {"acr", true, false, true},
          {"ma_acr", true, true, true}};
}

double median(std::vector<double> values) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int worker_count_from_env() {
  const char* env = std::getenv("UDA_FORGE_THREADS");
  if (env == nullptr) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

AblationTable run_ablation(const RunConfig& config, int workers) {
  config.validate();
  const std::vector<AblationVariant> variants = ablation_variants();
  const std::vector<std::uint64_t>& seeds = config.ablation_seeds;
  if (workers <= 0) workers = worker_count_from_env();
  workers = std::min<int>(workers, static_cast<int>(seeds.size()));

  std::vector<std::vector<AblationRun>> per_seed(seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        per_seed[i] = run_seed(config, seeds[i], variants);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  AblationTable table;
  table.fpi_points = config.fpi_points;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    AblationRow row;
    row.variant = variants[v];
    for (auto& runs : per_seed) row.runs.push_back(runs[v]);
    for (std::size_t k = 0; k < config.fpi_points.size(); ++k) {
      std::vector<double> at_k;
      for (const AblationRun& r : row.runs) at_k.push_back(r.recalls[k]);
      row.median.push_back(median(at_k));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string ablation_csv(const AblationTable& table) {
  std::string out = "variant,ma,acr,seeds";
  for (double f : table.fpi_points) out += ",R@" + fmt(f);
  out += '\n';
  for (const AblationRow& row : table.rows) {
    out += row.variant.name + ',' + (row.variant.enable_ma ? '1' : '0') + ',' +
           (row.variant.enable_acr ? '1' : '0') + ',' + std::to_string(row.runs.size());
    for (double m : row.median) out += ',' + fmt(m);
    out += '\n';
  }
  return out;
}

std::string ablation_runs_csv(const AblationTable& table) {
  std::string out = "variant,seed";
  for (double f : table.fpi_points) out += ",R@" + fmt(f);
  out += '\n';
  for (const AblationRow& row : table.rows) {
    for (const AblationRun& run : row.runs) {
      out += row.variant.name + ',' + std::to_string(run.seed);
      for (double r : run.recalls) out += ',' + fmt(r);
      out += '\n';
    }
  }
  return out;
}

}  // namespace uda

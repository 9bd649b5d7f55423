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

// Command-line front end. Talks to the library through the C API only.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uda_forge/uda_forge.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct RuntimeFailure {
  std::string message;
};

void check(uda_status status, const std::string& what) {
  if (status != UDA_OK) {
    throw RuntimeFailure{what + ": " + uda_status_name(status) + ": " + uda_last_error()};
  }
}

using ConfigPtr = std::unique_ptr<uda_config, decltype(&uda_config_free)>;

// Options shared by the training and evaluation commands.
struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string fpi;
  bool no_ma = false;
  bool no_acr = false;
  bool no_adv = false;
  bool no_selective = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool ablation_flags) {
  cmd->add_option("--config", o.config, "Run config file (TOML subset)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--fpi", o.fpi, "Comma-separated FPI points, e.g. 0.05,0.1,0.3,0.5,1.0,2.0");
  if (ablation_flags) {
    cmd->add_flag("--no-ma", o.no_ma, "Disable mask annealing (fixed mask ratio)");
    cmd->add_flag("--no-acr", o.no_acr, "Disable adaptive confidence refinement");
    cmd->add_flag("--no-adv", o.no_adv, "Disable adversarial alignment");
    cmd->add_flag("--no-selective", o.no_selective, "Disable selective retraining");
  }
}

ConfigPtr make_config(const CommonOptions& o) {
  uda_config* raw = nullptr;
  if (o.config.empty()) {
    check(uda_config_new(&raw), "config");
  } else {
    check(uda_config_load(o.config.c_str(), &raw), "config");
  }
  ConfigPtr config(raw, &uda_config_free);
  auto set = [&](const char* key, const std::string& value) {
    check(uda_config_set(config.get(), key, value.c_str()), std::string("--") + key);
  };
  if (o.seed) set("seed", std::to_string(*o.seed));
  if (!o.fpi.empty()) set("fpi_points", "[" + o.fpi + "]");
  if (o.no_ma) set("enable_ma", "false");
  if (o.no_acr) set("enable_acr", "false");
  if (o.no_adv) set("enable_adv", "false");
  if (o.no_selective) set("enable_selective", "false");
  check(uda_config_validate(config.get()), "config");
  return config;
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void print_eval(const uda_eval_result& r) {
  for (size_t i = 0; i < r.n_points; ++i) std::printf("R@%g=%.6f\n", r.fpi[i], r.recall[i]);
  std::printf("accuracy=%.6f\nf1=%.6f\nimages=%d\ngt_boxes=%d\n", r.accuracy, r.f1, r.n_images,
              r.n_gt_boxes);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teacher-student domain adaptation for small-lesion detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", uda_version());

  CommonOptions common;
  std::string out, data, source_ckpt, checkpoint, model, detections, labels;
  std::vector<std::string> inputs;
  int instances = 20;
  std::uint64_t grad_seed = 7;

  CLI::App* synth = app.add_subcommand("synth", "Generate source, holdout and target datasets");
  add_common(synth, common, false);
  synth->add_option("--out", out, "Output directory")->required();

  CLI::App* pretrain = app.add_subcommand("pretrain", "Source-only pretraining with the MAE branch");
  add_common(pretrain, common, true);
  pretrain->add_option("--out", out, "Output directory")->required();
  pretrain->add_option("--data", data, "Dataset directory written by synth (default: generate)");

  CLI::App* adapt = app.add_subcommand("adapt", "Teacher-student adaptation to the target domain");
  add_common(adapt, common, true);
  adapt->add_option("--out", out, "Output directory")->required();
  adapt->add_option("--source-ckpt", source_ckpt, "Checkpoint from pretrain")
      ->required()
      ->check(CLI::ExistingFile);
  adapt->add_option("--data", data, "Dataset directory written by synth (default: generate)");

  CLI::App* eval = app.add_subcommand("eval", "FROC and image metrics on the target set");
  add_common(eval, common, false);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->check(CLI::ExistingFile);
  eval->add_option("--model", model, "Model prefix in the checkpoint (teacher, student, source)");
  eval->add_option("--detections", detections, "Score a detections CSV instead of a checkpoint")
      ->check(CLI::ExistingFile);
  eval->add_option("--data", data, "Dataset directory (default: generated target set)");
  eval->add_option("--out", out, "Directory for froc.csv, detections.csv, metrics.txt");

  CLI::App* plot = app.add_subcommand("froc-plot", "Render FROC CSV files as SVG");
  plot->add_option("--input", inputs, "fpi,recall CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("--labels", labels, "Comma-separated legend labels");
  plot->add_option("--out", out, "Output SVG path")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "Run the MA/ACR comparison table over seeds");
  add_common(ablate, common, true);
  ablate->add_option("--out", out, "Output directory")->required();

  CLI::App* grad = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  grad->add_option("--seed", grad_seed, "Seed for the random instances");
  grad->add_option("--instances", instances, "Random instances per check")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      ConfigPtr config = make_config(common);
      check(uda_synth(config.get(), out.c_str()), "synth");
      std::printf("wrote datasets to %s\n", out.c_str());
    } else if (pretrain->parsed()) {
      ConfigPtr config = make_config(common);
      check(uda_pretrain(config.get(), opt(data), out.c_str()), "pretrain");
      std::printf("wrote %s/source.ckpt\n", out.c_str());
    } else if (adapt->parsed()) {
      ConfigPtr config = make_config(common);
      check(uda_adapt(config.get(), opt(data), source_ckpt.c_str(), out.c_str()), "adapt");
      std::printf("wrote %s/adapt.ckpt\n", out.c_str());
    } else if (eval->parsed()) {
      if (checkpoint.empty() == detections.empty()) {
        std::fprintf(stderr, "eval: give exactly one of --checkpoint or --detections\n");
        return kExitUsage;
      }
      if (!detections.empty() && data.empty()) {
        std::fprintf(stderr, "eval: --detections requires --data\n");
        return kExitUsage;
      }
      ConfigPtr config = make_config(common);
      uda_eval_result result{};
      if (!checkpoint.empty()) {
        check(uda_evaluate(config.get(), checkpoint.c_str(), opt(model), opt(data), opt(out),
                           &result),
              "eval");
      } else {
        check(uda_evaluate_detections(config.get(), detections.c_str(), data.c_str(), opt(out),
                                      &result),
              "eval");
      }
      print_eval(result);
    } else if (plot->parsed()) {
      const std::vector<std::string> names = split_commas(labels);
      if (!names.empty() && names.size() != inputs.size()) {
        std::fprintf(stderr, "froc-plot: --labels must name every --input\n");
        return kExitUsage;
      }
      std::vector<const char*> paths, label_ptrs;
      for (const auto& p : inputs) paths.push_back(p.c_str());
      for (const auto& l : names) label_ptrs.push_back(l.c_str());
      check(uda_froc_plot(paths.data(), names.empty() ? nullptr : label_ptrs.data(), paths.size(),
                          out.c_str()),
            "froc-plot");
      std::printf("wrote %s\n", out.c_str());
    } else if (ablate->parsed()) {
      ConfigPtr config = make_config(common);
      check(uda_ablate(config.get(), out.c_str()), "ablate");
      std::ifstream table(out + "/ablation.csv");
      std::cout << table.rdbuf();
    } else if (grad->parsed()) {
      double worst = 0;
      size_t len = 0;
      std::string report(8192, '\0');
      check(uda_grad_check(grad_seed, instances, &worst, report.data(), report.size(), &len),
            "grad-check");
      report.resize(std::min(len, report.size() - 1));
      std::printf("%smax_rel_error=%.3e\n", report.c_str(), worst);
      return worst < 1e-4 ? kExitOk : kExitRuntime;
    }
  } catch (const RuntimeFailure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return kExitRuntime;
  }
  return kExitOk;
}

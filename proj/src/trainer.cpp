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

#include "uda_forge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "uda_forge/adam.hpp"
#include "uda_forge/checkpoint.hpp"
#include "uda_forge/detector.hpp"
#include "uda_forge/objective.hpp"
#include "uda_forge/ops.hpp"

namespace uda {
namespace {

// Stream tags for derive_seed.
enum SeedTag : std::uint64_t {
  kTagInit = 1,
  kTagSourceData,
  kTagSourceHoldout,
  kTagTargetData,
  kTagPretrainShuffle,
  kTagPretrainAugment,
  kTagAdaptShuffle,
  kTagAdaptAugment,
};

constexpr int kGrid = kImageSize / kCellPitch;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

AdamState make_optimizer(const ParamSet<float>& params, double lr, double lr_backbone) {
  AdamHyper hyper;
  hyper.lr = lr;
  AdamState state = make_adam_state(params, hyper);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.name(i).rfind("backbone.", 0) == 0) state.lr[i] = lr_backbone;
  }
  return state;
}

AnnealState make_anneal(const RunConfig& c) {
  AnnealState s;
  s.mu = c.mu0;
  s.mu_min = c.mu_min;
  s.mu_max = c.mu_max;
  s.eta_min = c.eta_min;
  s.eta_max = c.eta_max;
  s.period = c.t_i;
  s.running_beta = c.ema_beta_lbar;
  s.validate();
  return s;
}

StrongAugmentOptions strong_options(const RunConfig& c) {
  StrongAugmentOptions o;
  o.blur_sigma = c.strong_blur_sigma;
  o.contrast_lo = c.strong_contrast_lo;
  o.contrast_hi = c.strong_contrast_hi;
  o.downscale = c.strong_downscale;
  return o;
}

void check_loss(const LossBreakdown& loss, const LogRow& row,
                const std::optional<std::filesystem::path>& out_dir,
                const std::vector<int>& batch_indices) {
  const double parts[] = {loss.l_sup, loss.l_unsup, loss.l_adv, loss.l_mask, loss.l_total};
  if (std::all_of(std::begin(parts), std::end(parts), [](double v) { return std::isfinite(v); })) {
    return;
  }
  std::ostringstream dump;
  dump << "non-finite loss at iteration " << row.iter << " (epoch " << row.epoch << ")\n"
       << "mu=" << row.mu << " C=" << row.threshold << '\n'
       << "l_sup=" << loss.l_sup << " l_unsup=" << loss.l_unsup << " l_dis_bac=" << loss.l_dis[0]
       << " l_dis_enc=" << loss.l_dis[1] << " l_dis_dec=" << loss.l_dis[2]
       << " l_adv=" << loss.l_adv << " l_mask=" << loss.l_mask << " l_total=" << loss.l_total
       << "\nbatch indices:";
  for (int i : batch_indices) dump << ' ' << i;
  dump << '\n';
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream(*out_dir / "diagnostic.txt") << dump.str();
  }
  fail(ErrorCode::kNonFinite, dump.str());
}

ObjectiveOptions objective_options(const RunConfig& c, TrainMode mode, bool mae) {
  ObjectiveOptions o;
  o.mode = mode;
  o.lambda_unsup = c.lambda_unsup;
  o.lambda_mask = c.lambda_mask;
  o.betas = {c.beta_bac, c.beta_enc, c.beta_dec};
  o.grl_lambda = c.grl_lambda;
  o.adversarial = c.enable_adv;
  o.mae = mae;
  o.mask_loss_masked_only = c.mask_loss_masked_only;
  return o;
}

std::filesystem::path ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create directory " + dir.string());
  return dir;
}

}  // namespace

void RunConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    require(ok, ErrorCode::kInvalidArgument, "config: " + msg);
  };
  check(n_source > 0 && n_target > 0 && n_source_holdout >= 0, "dataset sizes must be positive");
  source.validate();
  target.validate();
  check(strong_blur_sigma >= 0, "strong_blur_sigma must be non-negative");
  check(0 < strong_contrast_lo && strong_contrast_lo <= strong_contrast_hi,
        "strong contrast range must satisfy 0 < lo <= hi");
  check(batch_size >= 2 && batch_size % 2 == 0, "batch_size must be an even number >= 2");
  check(lr > 0 && lr_backbone >= 0 && pretrain_lr > 0 && pretrain_lr_backbone >= 0,
        "learning rates must be positive");
  check(e_pre >= 0 && e_teach >= 0, "epoch counts must be non-negative");
  check(e_decay >= 0 && e_decay <= e_teach, "need 0 <= e_decay <= e_teach");
  check(e_reinit >= 0 && e_reinit <= e_teach, "need 0 <= e_reinit <= e_teach");
  check(0 <= mu_min && mu_min <= mu_max && mu_max <= 1, "need 0 <= mu_min <= mu_max <= 1");
  check(mu_min <= mu0 && mu0 <= mu_max, "mu0 must lie in [mu_min, mu_max]");
  check(0 <= eta_min && eta_min <= eta_max, "need 0 <= eta_min <= eta_max");
  check(t_i > 0, "t_i must be positive");
  check(0 <= ema_beta_lbar && ema_beta_lbar < 1, "ema_beta_lbar must lie in [0, 1)");
  check(0 <= fixed_mask_ratio && fixed_mask_ratio <= 1, "fixed_mask_ratio must lie in [0, 1]");
  check(gamma_ema > 0 && gamma_ema <= 1, "gamma_ema must lie in (0, 1]");
  check(0 <= c_soft && c_soft <= c_hard && c_hard <= 1, "need 0 <= c_soft <= c_hard <= 1");
  check(alpha_acr >= 0, "alpha_acr must be non-negative");
  check(e_total >= 0, "e_total must be non-negative");
  check(lambda_unsup >= 0 && lambda_mask >= 0, "loss coefficients must be non-negative");
  check(beta_bac >= 0 && beta_enc >= 0 && beta_dec >= 0, "beta coefficients must be non-negative");
  check(grl_lambda >= 0, "grl_lambda must be non-negative");
  check(0 <= eval_score_threshold && eval_score_threshold <= 1,
        "eval_score_threshold must lie in [0, 1]");
  check(0 <= nms_iou && nms_iou <= 1, "nms_iou must lie in [0, 1]");
  check(0 <= image_score_threshold && image_score_threshold <= 1,
        "image_score_threshold must lie in [0, 1]");
  check(!fpi_points.empty() && std::is_sorted(fpi_points.begin(), fpi_points.end()) &&
            fpi_points.front() >= 0,
        "fpi points must be non-negative and ascending");
  check(!ablation_seeds.empty(), "ablation_seeds must not be empty");
}

std::string format_log_row(const LogRow& r) {
  std::ostringstream out;
  out << r.iter << ',' << r.epoch << ',' << fmt(r.loss.l_sup) << ',' << fmt(r.loss.l_unsup) << ','
      << fmt(r.loss.l_adv) << ',' << fmt(r.loss.l_mask) << ',' << fmt(r.loss.l_total) << ','
      << fmt(r.mu) << ',' << fmt(r.eta_t) << ',' << fmt(r.delta) << ',' << fmt(r.threshold) << ','
      << r.n_pseudo;
  return out.str();
}

void write_train_log(const std::vector<LogRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << kTrainLogHeader << '\n';
  for (const LogRow& r : rows) out << format_log_row(r) << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failure on " + path.string());
}

Datasets make_datasets(const RunConfig& c) {
  Datasets d;
  d.source = generate_dataset(c.source, Domain::kSource, c.n_source,
                              derive_seed(c.seed, kTagSourceData));
  d.source_holdout = generate_dataset(c.source, Domain::kSource, c.n_source_holdout,
                                      derive_seed(c.seed, kTagSourceHoldout));
  d.target = generate_dataset(c.target, Domain::kTarget, c.n_target,
                              derive_seed(c.seed, kTagTargetData));
  return d;
}

void write_datasets(const std::filesystem::path& dir, const Datasets& data, const RunConfig& c) {
  ensure_dir(dir);
  write_dataset(ensure_dir(dir / "source"), data.source, c.source);
  write_dataset(ensure_dir(dir / "source_holdout"), data.source_holdout, c.source);
  write_dataset(ensure_dir(dir / "target"), data.target, c.target);
}

Datasets read_datasets(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorCode::kNotFound,
          "dataset directory not found: " + dir.string());
  Datasets d;
  d.source = read_dataset(dir / "source");
  if (std::filesystem::exists(dir / "source_holdout" / "meta.txt")) {
    d.source_holdout = read_dataset(dir / "source_holdout");
  }
  d.target = read_dataset(dir / "target");
  return d;
}

std::vector<std::vector<Detection>> detect_all(const ParamSet<float>& model,
                                               const std::vector<Sample>& dataset,
                                               double score_threshold, double nms_iou) {
  std::vector<std::vector<Detection>> out;
  out.reserve(dataset.size());
  for (const Sample& s : dataset) {
    const Tensor raw = infer_raw(model, s.image);
    out.push_back(decode_detections(raw, s.image.dim(2) / kCellPitch, score_threshold, nms_iou));
  }
  return out;
}

EvalResult evaluate(const ParamSet<float>& model, const std::vector<Sample>& dataset,
                    const RunConfig& config) {
  require(!dataset.empty(), ErrorCode::kInvalidArgument, "evaluate: empty dataset");
  validate_detector_params(model);
  const auto dets = detect_all(model, dataset, config.eval_score_threshold, config.nms_iou);
  std::vector<std::vector<Box>> gts;
  gts.reserve(dataset.size());
  for (const Sample& s : dataset) gts.push_back(s.boxes);
  EvalResult r;
  r.curve = froc(dets, gts, config.fpi_points);
  r.image = image_metrics(dets, gts, config.image_score_threshold);
  return r;
}

PretrainResult pretrain_source(const RunConfig& config, const Datasets& data,
                               const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  require(!data.source.empty(), ErrorCode::kNotFound, "pretrain: source dataset missing");
  Rng init_rng(derive_seed(config.seed, kTagInit));
  PretrainResult result{init_detector_params(init_rng), {}};
  ParamSet<float>& params = result.model;
  AdamState adam = make_optimizer(params, config.pretrain_lr, config.pretrain_lr_backbone);
  AnnealState anneal = make_anneal(config);
  Rng shuffle(derive_seed(config.seed, kTagPretrainShuffle));
  Rng augment(derive_seed(config.seed, kTagPretrainAugment));
  const ObjectiveOptions options = objective_options(config, TrainMode::kSourcePretrain, true);

  const int n = static_cast<int>(data.source.size());
  int iter = 0;
  for (int epoch = 0; epoch < config.e_pre; ++epoch) {
    const std::vector<int> order = shuffle.permutation(n);
    for (int start = 0; start < n; start += config.batch_size) {
      const int stop = std::min(n, start + config.batch_size);
      const double mu = config.enable_ma ? anneal.mu : config.fixed_mask_ratio;
      std::vector<ObjectiveItem<float>> batch;
      std::vector<int> indices;
      for (int k = start; k < stop; ++k) {
        const int idx = order[static_cast<std::size_t>(k)];
        indices.push_back(idx);
        auto [view, record] = weak_augment(data.source[static_cast<std::size_t>(idx)], augment);
        (void)record;
        ObjectiveItem<float> item;
        item.image = std::move(view.image);
        item.domain = Domain::kSource;
        item.targets = std::move(view.boxes);
        item.mask = make_mask_pattern(kGrid, kGrid, mu, augment);
        batch.push_back(std::move(item));
      }
      ParamSet<float> grads = params.zeros_like();
      const LossBreakdown loss = student_objective(
          params, std::span<const ObjectiveItem<float>>(batch), options, &grads);
      LogRow row;
      row.iter = iter;
      row.epoch = epoch;
      row.loss = loss;
      row.mu = mu;
      row.eta_t = config.enable_ma ? cosine_step(anneal) : 0.0;
      check_loss(loss, row, out_dir, indices);
      adam_step(params, grads, adam);
      if (config.enable_ma) anneal = anneal_update(anneal, loss.l_mask);
      result.log.push_back(row);
      ++iter;
    }
  }

  if (out_dir) {
    ensure_dir(*out_dir);
    write_checkpoint(*out_dir / "source.ckpt", {{"source", &params}});
    write_train_log(result.log, *out_dir / "pretrain_log.csv");
    if (!data.source_holdout.empty()) {
      const EvalResult ev = evaluate(params, data.source_holdout, config);
      write_froc_csv(ev.curve, *out_dir / "froc_source_holdout.csv");
      std::ofstream report(*out_dir / "report.txt");
      report << "stage=pretrain\nseed=" << config.seed << "\nepochs=" << config.e_pre
             << "\niterations=" << iter << '\n';
      for (const FrocPoint& p : ev.curve.points) {
        report << "source_holdout_R@" << fmt(p.fpi) << '=' << fmt(p.recall) << '\n';
      }
      report << "source_holdout_accuracy=" << fmt(ev.image.accuracy)
             << "\nsource_holdout_f1=" << fmt(ev.image.f1) << '\n';
    }
  }
  return result;
}

double domain_probe_accuracy(const ParamSet<float>& model, const Datasets& data, int per_domain) {
  std::vector<std::vector<double>> features;
  std::vector<double> labels;
  auto collect = [&](const std::vector<Sample>& set, double label) {
    const int n = std::min<int>(per_domain, static_cast<int>(set.size()));
    for (int i = 0; i < n; ++i) {
      const BackboneTrace<float> bt = backbone_forward(model, set[static_cast<std::size_t>(i)].image);
      const std::vector<float> pooled = pool_stage_features(Stage::kBackbone, bt.features.semantic());
      features.emplace_back(pooled.begin(), pooled.end());
      labels.push_back(label);
    }
  };
  collect(data.source, kSourceLabel);
  collect(data.target, kTargetLabel);
  require(!features.empty(), ErrorCode::kInvalidArgument, "domain probe: no images");

  // Standardize, then full-batch gradient descent on logistic loss.
  const std::size_t dims = features.front().size();
  std::vector<double> mean(dims, 0.0), sd(dims, 0.0);
  for (const auto& f : features) {
    for (std::size_t j = 0; j < dims; ++j) mean[j] += f[j];
  }
  for (double& m : mean) m /= static_cast<double>(features.size());
  for (const auto& f : features) {
    for (std::size_t j = 0; j < dims; ++j) sd[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
  }
  for (double& s : sd) s = std::sqrt(s / static_cast<double>(features.size())) + 1e-8;
  for (auto& f : features) {
    for (std::size_t j = 0; j < dims; ++j) f[j] = (f[j] - mean[j]) / sd[j];
  }
  std::vector<double> w(dims, 0.0);
  double b = 0.0;
  const double inv_n = 1.0 / static_cast<double>(features.size());
  for (int step = 0; step < 500; ++step) {
    std::vector<double> gw(dims, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      double z = b;
      for (std::size_t j = 0; j < dims; ++j) z += w[j] * features[i][j];
      const double d = sigmoid(z) - labels[i];
      for (std::size_t j = 0; j < dims; ++j) gw[j] += d * features[i][j];
      gb += d;
    }
    for (std::size_t j = 0; j < dims; ++j) w[j] -= 0.5 * gw[j] * inv_n;
    b -= 0.5 * gb * inv_n;
  }
  int correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    double z = b;
    for (std::size_t j = 0; j < dims; ++j) z += w[j] * features[i][j];
    if ((z > 0 ? 1.0 : 0.0) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) * inv_n;
}

TrainReport adapt(const RunConfig& config, const Datasets& data, const ParamSet<float>& source,
                  const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  validate_detector_params(source);
  require(!data.source.empty() && !data.target.empty(), ErrorCode::kNotFound,
          "adapt: source and target datasets are required");

  TrainReport report;
  report.teacher = source;
  report.student = source;
  ParamSet<float>& teacher = report.teacher;
  ParamSet<float>& student = report.student;
  AdamState adam = make_optimizer(student, config.lr, config.lr_backbone);
  AnnealState anneal = make_anneal(config);
  Rng shuffle(derive_seed(config.seed, kTagAdaptShuffle));
  Rng augment(derive_seed(config.seed, kTagAdaptAugment));
  const StrongAugmentOptions strong = strong_options(config);

  const int half = config.batch_size / 2;
  const int n_s = static_cast<int>(data.source.size());
  const int n_t = static_cast<int>(data.target.size());
  const int iters_per_epoch = (std::max(n_s, n_t) + half - 1) / half;
  const int total_iters = iters_per_epoch * config.e_teach;
  const double horizon = config.e_total > 0 ? config.e_total : std::max(1, total_iters);
  report.probe_accuracy_before = domain_probe_accuracy(teacher, data, 32);

  int iter = 0;
  for (int epoch = 0; epoch < config.e_teach; ++epoch) {
    if (config.enable_selective && epoch == config.e_reinit && epoch > 0) {
      selective_retrain(student, source);
      ParamSet<float> snap;
      for (std::size_t i = 0; i < student.size(); ++i) {
        if (is_retrained_param(student.name(i))) snap.add(student.name(i), student[i]);
      }
      report.retrain_snapshots.push_back(std::move(snap));
    }
    const bool mae_active = mae_branch_active(epoch, config.e_decay);
    const ObjectiveOptions options = objective_options(config, TrainMode::kAdapt, mae_active);
    const std::vector<int> order_s = shuffle.permutation(n_s);
    const std::vector<int> order_t = shuffle.permutation(n_t);
    int epoch_pseudo = 0;

    for (int it = 0; it < iters_per_epoch; ++it, ++iter) {
      LogRow row;
      row.iter = iter;
      row.epoch = epoch;
      if (config.enable_acr) {
        row.delta = acr_delta(std::min<double>(iter, horizon), horizon, config.alpha_acr);
        row.threshold = acr_threshold(row.delta, config.c_soft, config.c_hard);
      } else {
        row.delta = 1.0;
        row.threshold = config.c_hard;
      }
      const double mu = config.enable_ma ? anneal.mu : config.fixed_mask_ratio;
      row.mu = mu;
      row.eta_t = config.enable_ma && mae_active ? cosine_step(anneal) : 0.0;

      std::vector<ObjectiveItem<float>> batch;
      std::vector<int> indices;
      for (int k = 0; k < half; ++k) {
        const int idx = order_s[static_cast<std::size_t>((it * half + k) % n_s)];
        indices.push_back(idx);
        auto [weak, record] = weak_augment(data.source[static_cast<std::size_t>(idx)], augment);
        (void)weak;
        Sample view = strong_augment(data.source[static_cast<std::size_t>(idx)], record, strong, augment);
        ObjectiveItem<float> item;
        item.image = std::move(view.image);
        item.domain = Domain::kSource;
        item.targets = std::move(view.boxes);
        if (mae_active) item.mask = make_mask_pattern(kGrid, kGrid, mu, augment);
        batch.push_back(std::move(item));
      }
      for (int k = 0; k < half; ++k) {
        const int idx = order_t[static_cast<std::size_t>((it * half + k) % n_t)];
        indices.push_back(n_s + idx);
        const Sample& raw_sample = data.target[static_cast<std::size_t>(idx)];
        auto [weak, record] = weak_augment(raw_sample, augment);
        const Tensor teacher_raw = infer_raw(teacher, weak.image);
        const std::vector<Detection> pseudo = filter_pseudo_labels(
            decode_detections(teacher_raw, kGrid, row.threshold, config.nms_iou), row.threshold);
        row.n_pseudo += static_cast<int>(pseudo.size());
        Sample view = strong_augment(raw_sample, record, strong, augment);
        ObjectiveItem<float> item;
        item.image = std::move(view.image);
        item.domain = Domain::kTarget;
        for (const Detection& d : pseudo) item.targets.push_back(d.box);
        if (mae_active) item.mask = make_mask_pattern(kGrid, kGrid, mu, augment);
        batch.push_back(std::move(item));
      }

      ParamSet<float> grads = student.zeros_like();
      row.loss = student_objective(student, std::span<const ObjectiveItem<float>>(batch), options,
                                   &grads);
      check_loss(row.loss, row, out_dir, indices);
      adam_step(student, grads, adam);
      if (config.enable_ma && mae_active) anneal = anneal_update(anneal, row.loss.l_mask);
      ema_update(teacher, student, config.gamma_ema);
      epoch_pseudo += row.n_pseudo;
      report.log.push_back(row);
    }
    report.pseudo_per_epoch.push_back(epoch_pseudo);

    if (config.epoch_froc) {
      const EvalResult ev = evaluate(teacher, data.target, config);
      report.epoch_curves.push_back(ev.curve);
      if (out_dir) {
        ensure_dir(*out_dir);
        write_froc_csv(ev.curve, *out_dir / ("froc_epoch_" + std::to_string(epoch) + ".csv"));
      }
    }
  }
  report.probe_accuracy_after = domain_probe_accuracy(teacher, data, 32);

  if (out_dir) {
    ensure_dir(*out_dir);
    write_train_log(report.log, *out_dir / "train_log.csv");
    write_checkpoint(*out_dir / "adapt.ckpt", {{"teacher", &teacher}, {"student", &student}});
    const EvalResult src = evaluate(source, data.target, config);
    const EvalResult ev = evaluate(teacher, data.target, config);
    std::ofstream txt(*out_dir / "report.txt");
    txt << "stage=adapt\nseed=" << config.seed << "\nepochs=" << config.e_teach
        << "\niterations=" << iter << "\nenable_ma=" << config.enable_ma
        << "\nenable_acr=" << config.enable_acr << "\nenable_adv=" << config.enable_adv
        << "\nenable_selective=" << config.enable_selective << '\n';
    for (std::size_t i = 0; i < ev.curve.points.size(); ++i) {
      txt << "target_R@" << fmt(ev.curve.points[i].fpi) << " source_only="
          << fmt(src.curve.points[i].recall) << " adapted=" << fmt(ev.curve.points[i].recall)
          << '\n';
    }
    txt << "target_accuracy source_only=" << fmt(src.image.accuracy)
        << " adapted=" << fmt(ev.image.accuracy) << "\ntarget_f1 source_only=" << fmt(src.image.f1)
        << " adapted=" << fmt(ev.image.f1) << "\nprobe_accuracy before="
        << fmt(report.probe_accuracy_before) << " after=" << fmt(report.probe_accuracy_after)
        << '\n';
  }
  return report;
}

}  // namespace uda

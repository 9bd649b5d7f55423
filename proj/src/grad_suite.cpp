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

#include "uda_forge/grad_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "uda_forge/detector.hpp"
#include "uda_forge/fd_check.hpp"
#include "uda_forge/losses.hpp"
#include "uda_forge/objective.hpp"
#include "uda_forge/ops.hpp"
#include "uda_forge/rng.hpp"

namespace uda {
namespace {

constexpr double kStep = 1e-3;
constexpr int kSmallImage = 12;

TensorD random_tensor(std::vector<int> shape, Rng& rng, double sd = 1.0) {
  TensorD t(std::move(shape));
  for (double& v : t.data()) v = rng.normal(0.0, sd);
  return t;
}

int randint(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// Views a flat vector as consecutive tensors of the given shapes.
std::vector<TensorD> split(std::span<const double> x, const std::vector<std::vector<int>>& shapes) {
  std::vector<TensorD> out;
  std::size_t offset = 0;
  for (const auto& s : shapes) {
    TensorD t(s);
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.data().begin());
    offset += t.size();
    out.push_back(std::move(t));
  }
  return out;
}

void join(const std::vector<const TensorD*>& parts, std::span<double> out) {
  std::size_t offset = 0;
  for (const TensorD* t : parts) {
    std::copy(t->data().begin(), t->data().end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += t->size();
  }
}

std::vector<double> concat(const std::vector<const TensorD*>& parts) {
  std::size_t n = 0;
  for (const TensorD* t : parts) n += t->size();
  std::vector<double> out(n);
  join(parts, out);
  return out;
}

double dot(const TensorD& a, const TensorD& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Box random_box(Rng& rng) {
  Box b;
  b.cx = rng.uniform(0.0, kSmallImage - 1.0);
  b.cy = rng.uniform(0.0, kSmallImage - 1.0);
  b.w = rng.uniform(2.0, 8.0);
  b.h = rng.uniform(2.0, 8.0);
  return b;
}

double check_linear(Rng& rng) {
  const int n = randint(rng, 1, 4), din = randint(rng, 1, 6), dout = randint(rng, 1, 6);
  const std::vector<std::vector<int>> shapes = {{n, din}, {din, dout}, {dout}};
  const TensorD r = random_tensor({n, dout}, rng);
  const TensorD x0 = random_tensor({n, din}, rng), w0 = random_tensor({din, dout}, rng),
                b0 = random_tensor({dout}, rng);
  auto f = [&](std::span<const double> x, std::span<double> grad) {
    const auto t = split(x, shapes);
    const double value = dot(linear(t[0], t[1], t[2]), r);
    if (!grad.empty()) {
      const LinearGrads<double> g = linear_backward(t[0], t[1], r);
      join({&g.dx, &g.dw, &g.db}, grad);
    }
    return value;
  };
  return fd_check(f, concat({&x0, &w0, &b0}), kStep).max_rel_error;
}

double check_conv(Rng& rng, int stride) {
  const int cin = randint(rng, 1, 3), cout = randint(rng, 1, 3);
  const int h = randint(rng, 3, 7), w = randint(rng, 3, 7);
  const int oh = (h + stride - 1) / stride, ow = (w + stride - 1) / stride;
  const std::vector<std::vector<int>> shapes = {{cin, h, w}, {cout, cin, 3, 3}, {cout}};
  const TensorD r = random_tensor({cout, oh, ow}, rng);
  const TensorD x0 = random_tensor(shapes[0], rng), k0 = random_tensor(shapes[1], rng),
                b0 = random_tensor(shapes[2], rng);
  auto f = [&](std::span<const double> x, std::span<double> grad) {
    const auto t = split(x, shapes);
    const double value = dot(conv2d(t[0], t[1], stride, t[2]), r);
    if (!grad.empty()) {
      const Conv2dGrads<double> g = conv2d_backward(t[0], t[1], stride, r);
      join({&g.dx, &g.dk, &g.db}, grad);
    }
    return value;
  };
  return fd_check(f, concat({&x0, &k0, &b0}), kStep).max_rel_error;
}

double check_activation(Rng& rng, Activation kind) {
  const int n = randint(rng, 1, 12);
  TensorD x0 = random_tensor({n}, rng);
  // Keep relu inputs off the kink by more than the difference step.
  for (double& v : x0.data()) {
    if (std::abs(v) < 0.05) v += v < 0 ? -0.05 : 0.05;
  }
  const TensorD r = random_tensor({n}, rng);
  auto f = [&](std::span<const double> x, std::span<double> grad) {
    const TensorD xt({n}, std::vector<double>(x.begin(), x.end()));
    const TensorD y = activate(kind, xt);
    if (!grad.empty()) {
      const TensorD g = activate_backward(kind, xt, y, r);
      join({&g}, grad);
    }
    return dot(y, r);
  };
  return fd_check(f, x0.data(), kStep).max_rel_error;
}

double check_detection_loss(Rng& rng, bool pseudo) {
  const int grid = kSmallImage / kCellPitch;
  const TensorD raw0 = random_tensor({grid * grid, kHeadOutputs}, rng);
  std::vector<Box> boxes;
  std::vector<Detection> dets;
  const int n_boxes = randint(rng, 0, 3);
  for (int i = 0; i < n_boxes; ++i) {
    boxes.push_back(random_box(rng));
    dets.push_back({boxes.back(), rng.uniform(), 0});
  }
  auto f = [&](std::span<const double> x, std::span<double> grad) {
    const TensorD raw({grid * grid, kHeadOutputs}, std::vector<double>(x.begin(), x.end()));
    const LossGrad<double> l = pseudo ? unsupervised_loss(raw, dets, grid)
                                      : supervised_loss(raw, std::span<const Box>(boxes), grid);
    if (!grad.empty()) join({&l.grad}, grad);
    return l.value;
  };
  return fd_check(f, raw0.data(), kStep).max_rel_error;
}

double check_adversarial(Rng& rng) {
  std::array<double, kStageCount> betas{};
  for (double& b : betas) b = rng.uniform(0.1, 2.0);
  const double label = rng.uniform() < 0.5 ? kSourceLabel : kTargetLabel;
  std::vector<double> x0(kStageCount);
  for (double& v : x0) v = rng.normal(0.0, 2.0);
  auto f = [&](std::span<const double> x, std::span<double> grad) {
    std::array<double, kStageCount> logits{};
    std::copy(x.begin(), x.end(), logits.begin());
    const AdversarialLoss l = adversarial_losses(logits, label, betas);
    if (!grad.empty()) std::copy(l.d_logits.begin(), l.d_logits.end(), grad.begin());
    return l.combined;
  };
  return fd_check(f, x0, kStep).max_rel_error;
}

double check_mask_loss(Rng& rng) {
  const int c = randint(rng, 1, 4), h = randint(rng, 2, 5), w = randint(rng, 2, 5);
  const TensorD orig = random_tensor({c, h, w}, rng);
  const TensorD rec0 = random_tensor({c, h, w}, rng);
  MaskPattern pattern = make_mask_pattern(h, w, rng.uniform(0.1, 0.9), rng);
  const bool masked_only = rng.uniform() < 0.5;
  auto f = [&](std::span<const double> x, std::span<double> grad) {
    const TensorD rec({c, h, w}, std::vector<double>(x.begin(), x.end()));
    const LossGrad<double> l = mask_loss(rec, orig, pattern, masked_only);
    if (!grad.empty()) join({&l.grad}, grad);
    return l.value;
  };
  return fd_check(f, rec0.data(), kStep).max_rel_error;
}

ParamSet<double> random_detector(Rng& rng) {
  ParamSet<double> p = init_detector_params(rng).cast<double>();
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (double& v : p[i].data()) v += rng.normal(0.0, 0.05);
  }
  return p;
}

ObjectiveItem<double> random_item(Rng& rng, Domain domain, bool mae) {
  const int grid = kSmallImage / kCellPitch;
  ObjectiveItem<double> item;
  item.image = TensorD({1, kSmallImage, kSmallImage});
  for (double& v : item.image.data()) v = rng.uniform();
  item.domain = domain;
  const int n_boxes = randint(rng, 0, 2);
  for (int i = 0; i < n_boxes; ++i) item.targets.push_back(random_box(rng));
  item.mask = mae ? make_mask_pattern(grid, grid, rng.uniform(0.2, 0.8), rng)
                  : empty_mask_pattern(grid, grid);
  return item;
}

// Sign pattern of every relu pre-activation the objective evaluates.
std::vector<bool> relu_signature(const ParamSet<double>& p,
                                 const std::vector<ObjectiveItem<double>>& batch, bool mae) {
  std::vector<bool> sig;
  auto add = [&sig](const TensorD& pre) {
    for (double v : pre.data()) sig.push_back(v > 0);
  };
  for (const auto& item : batch) {
    const BackboneTrace<double> bt = backbone_forward(p, item.image);
    add(bt.pre1);
    add(bt.pre2);
    const DenseTrace<double> enc = encoder_forward(p, bt.features.semantic());
    add(enc.pre);
    add(detect_forward(p, enc.out).hidden.pre);
    if (mae) add(encoder_forward(p, apply_mask(bt.features, item.mask).semantic()).pre);
  }
  return sig;
}

// Central differences of several scalar terms per coordinate. The step is
// eps * (|x| + 1), shrunk tenfold (down to 1e-7) while x +/- h would flip a
// relu, since the difference quotient only estimates the derivative when the
// interval holds no kink. `numeric` folds the term derivatives into the value
// compared with analytic[i].
double kinked_fd_check(
    const ParamSet<double>& params, const std::vector<ObjectiveItem<double>>& batch, bool mae,
    const std::function<std::vector<double>(const ParamSet<double>&)>& terms,
    const std::vector<double>& analytic,
    const std::function<double(std::size_t, const std::vector<double>&)>& numeric) {
  std::vector<double> x = flatten(params);
  ParamSet<double> p = params;
  const std::vector<bool> base = relu_signature(params, batch, mae);
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    double h = kStep * (std::abs(saved) + 1.0);
    std::vector<double> up, down;
    for (;;) {
      x[i] = saved + h;
      unflatten(x, p);
      const bool up_ok = relu_signature(p, batch, mae) == base;
      up = terms(p);
      x[i] = saved - h;
      unflatten(x, p);
      const bool down_ok = relu_signature(p, batch, mae) == base;
      down = terms(p);
      if ((up_ok && down_ok) || h < 1e-7) break;
      h *= 0.1;
    }
    x[i] = saved;
    std::vector<double> d(up.size());
    for (std::size_t k = 0; k < up.size(); ++k) d[k] = (up[k] - down[k]) / (2 * h);
    worst = std::max(worst, fd_relative_error(analytic[i], numeric(i, d)));
  }
  return worst;
}

LossBreakdown objective(const ParamSet<double>& p, const std::vector<ObjectiveItem<double>>& batch,
                        const ObjectiveOptions& options, ParamSet<double>* grads) {
  return student_objective(p, std::span<const ObjectiveItem<double>>(batch), options, grads);
}

// Plain gradient of the pretraining objective (no reversal involved).
double check_objective_pretrain(Rng& rng) {
  const ParamSet<double> params = random_detector(rng);
  const std::vector<ObjectiveItem<double>> batch = {random_item(rng, Domain::kSource, true),
                                                    random_item(rng, Domain::kSource, true)};
  ObjectiveOptions options;
  options.mode = TrainMode::kSourcePretrain;
  options.adversarial = false;
  options.lambda_mask = rng.uniform(0.5, 2.0);
  options.mask_loss_masked_only = rng.uniform() < 0.5;
  ParamSet<double> g = params.zeros_like();
  objective(params, batch, options, &g);
  return kinked_fd_check(
      params, batch, true,
      [&](const ParamSet<double>& p) {
        return std::vector<double>{objective(p, batch, options, nullptr).l_total};
      },
      flatten(g), [](std::size_t, const std::vector<double>& d) { return d[0]; });
}

// Adaptation objective with the reversal layer. Oracle: differences of the
// task part (l_total - l_adv) and of l_adv, recombined as task + adv on
// discriminator tensors and task - lambda * adv everywhere else.
double check_objective_adapt(Rng& rng) {
  const ParamSet<double> params = random_detector(rng);
  const std::vector<ObjectiveItem<double>> batch = {random_item(rng, Domain::kSource, true),
                                                    random_item(rng, Domain::kTarget, true)};
  ObjectiveOptions options;
  options.mode = TrainMode::kAdapt;
  options.adversarial = true;
  options.grl_lambda = rng.uniform(0.5, 2.0);
  options.lambda_unsup = rng.uniform(0.5, 2.0);
  options.lambda_mask = rng.uniform(0.5, 2.0);
  for (double& b : options.betas) b = rng.uniform(0.2, 2.0);
  ParamSet<double> g = params.zeros_like();
  objective(params, batch, options, &g);

  std::vector<bool> is_disc;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const bool disc = params.name(i).rfind("disc.", 0) == 0;
    is_disc.insert(is_disc.end(), params[i].size(), disc);
  }
  return kinked_fd_check(
      params, batch, true,
      [&](const ParamSet<double>& p) {
        const LossBreakdown l = objective(p, batch, options, nullptr);
        return std::vector<double>{l.l_total - l.l_adv, l.l_adv};
      },
      flatten(g), [&](std::size_t i, const std::vector<double>& d) {
        return is_disc[i] ? d[0] + d[1] : d[0] - options.grl_lambda * d[1];
      });
}

}  // namespace

std::vector<GradCheckResult> run_grad_suite(std::uint64_t seed, int instances) {
  using Check = std::function<double(Rng&)>;
  const std::vector<std::pair<std::string, Check>> checks = {
      {"linear", check_linear},
      {"conv2d_stride1", [](Rng& r) { return check_conv(r, 1); }},
      {"conv2d_stride2", [](Rng& r) { return check_conv(r, 2); }},
      {"relu", [](Rng& r) { return check_activation(r, Activation::kRelu); }},
      {"sigmoid", [](Rng& r) { return check_activation(r, Activation::kSigmoid); }},
      {"supervised_loss", [](Rng& r) { return check_detection_loss(r, false); }},
      {"unsupervised_loss", [](Rng& r) { return check_detection_loss(r, true); }},
      {"adversarial_losses", check_adversarial},
      {"mask_loss", check_mask_loss},
      {"objective_pretrain", check_objective_pretrain},
      {"objective_adapt_grl", check_objective_adapt},
  };
  std::vector<GradCheckResult> results;
  for (std::size_t c = 0; c < checks.size(); ++c) {
    Rng rng(derive_seed(seed, c + 1));
    GradCheckResult r{checks[c].first, instances, 0.0};
    for (int i = 0; i < instances; ++i) r.max_rel_error = std::max(r.max_rel_error, checks[c].second(rng));
    results.push_back(r);
  }
  return results;
}

double max_error(const std::vector<GradCheckResult>& results) {
  double worst = 0;
  for (const auto& r : results) worst = std::max(worst, r.max_rel_error);
  return worst;
}

}  // namespace uda

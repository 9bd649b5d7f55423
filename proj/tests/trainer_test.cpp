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

#include <algorithm>
#include <cmath>

#include "gtest/gtest.h"
#include "test_util.hpp"
#include "uda_forge/checkpoint.hpp"
#include "uda_forge/error.hpp"
#include "uda_forge/trainer.hpp"

namespace uda {
namespace {

using uda::testing::tiny_config;

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    config_ = new RunConfig(tiny_config());
    data_ = new Datasets(make_datasets(*config_));
    source_ = new ParamSet<float>(pretrain_source(*config_, *data_).model);
  }
  static void TearDownTestSuite() {
    delete config_;
    delete data_;
    delete source_;
  }

  static RunConfig* config_;
  static Datasets* data_;
  static ParamSet<float>* source_;
};

RunConfig* TrainerTest::config_ = nullptr;
Datasets* TrainerTest::data_ = nullptr;
ParamSet<float>* TrainerTest::source_ = nullptr;

TEST_F(TrainerTest, DatasetsFollowConfig) {
  EXPECT_EQ(data_->source.size(), 24u);
  EXPECT_EQ(data_->target.size(), 24u);
  EXPECT_EQ(data_->source_holdout.size(), 8u);
  EXPECT_EQ(data_->target[0].domain, Domain::kTarget);
}

TEST_F(TrainerTest, DatasetDirectoryRoundTrip) {
  const auto dir = uda::testing::scratch_dir();
  write_datasets(dir, *data_, *config_);
  const Datasets back = read_datasets(dir);
  ASSERT_EQ(back.source.size(), data_->source.size());
  ASSERT_EQ(back.target.size(), data_->target.size());
  EXPECT_EQ(back.source_holdout.size(), data_->source_holdout.size());
  for (std::size_t i = 0; i < back.target.size(); ++i) {
    EXPECT_EQ(back.target[i].image, data_->target[i].image);
  }
}

TEST_F(TrainerTest, ZeroPretrainEpochsKeepInitialization) {
  RunConfig c = *config_;
  c.e_pre = 0;
  const PretrainResult r = pretrain_source(c, *data_);
  Rng rng(derive_seed(c.seed, 1));
  EXPECT_EQ(r.model, init_detector_params(rng));
  EXPECT_TRUE(r.log.empty());
}

TEST_F(TrainerTest, PretrainIsDeterministic) {
  const PretrainResult again = pretrain_source(*config_, *data_);
  EXPECT_EQ(again.model, *source_);
}

TEST_F(TrainerTest, PretrainLogHasOneRowPerIteration) {
  RunConfig c = *config_;
  c.e_pre = 2;
  const PretrainResult r = pretrain_source(c, *data_);
  ASSERT_EQ(r.log.size(), 2u * 3);  // 24 images, batch 8
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    EXPECT_EQ(r.log[i].iter, static_cast<int>(i));
    EXPECT_EQ(r.log[i].loss.l_unsup, 0.0);
    EXPECT_TRUE(std::isfinite(r.log[i].loss.l_total));
  }
}

TEST_F(TrainerTest, PretrainWritesArtifacts) {
  const auto dir = uda::testing::scratch_dir();
  pretrain_source(*config_, *data_, dir);
  for (const char* f : {"source.ckpt", "pretrain_log.csv", "froc_source_holdout.csv", "report.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_EQ(load_model(dir / "source.ckpt", "source"), *source_);
  const std::string log = uda::testing::read_file(dir / "pretrain_log.csv");
  EXPECT_EQ(log.rfind(std::string(kTrainLogHeader) + "\n", 0), 0u);
}

TEST_F(TrainerTest, MissingSourceDataIsAnError) {
  Datasets empty;
  try {
    pretrain_source(*config_, empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
  EXPECT_THROW(adapt(*config_, empty, *source_), Error);
}

TEST_F(TrainerTest, ZeroTeachEpochsTeacherEqualsSource) {
  RunConfig c = *config_;
  c.enable_ma = c.enable_acr = c.enable_adv = false;
  c.e_teach = c.e_decay = c.e_reinit = 0;
  const TrainReport r = adapt(c, *data_, *source_);
  EXPECT_EQ(r.teacher, *source_);
  EXPECT_TRUE(r.log.empty());
}

TEST_F(TrainerTest, GammaOneFreezesTeacher) {
  RunConfig c = *config_;
  c.gamma_ema = 1.0;
  const TrainReport r = adapt(c, *data_, *source_);
  EXPECT_EQ(r.teacher, *source_);
  EXPECT_NE(r.student, *source_);
}

TEST_F(TrainerTest, AdaptLogAndTraces) {
  const TrainReport r = adapt(*config_, *data_, *source_);
  // 24 images per domain, 4 per half-batch: 6 iterations per epoch.
  ASSERT_EQ(r.log.size(), 2u * 6);
  EXPECT_EQ(r.pseudo_per_epoch.size(), 2u);
  EXPECT_EQ(r.epoch_curves.size(), 2u);
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    EXPECT_GE(r.log[i].threshold, r.log[i - 1].threshold);
  }
  EXPECT_GE(r.log.front().threshold, config_->c_soft);
  EXPECT_LE(r.log.back().threshold, config_->c_hard);
  int pseudo = 0;
  for (const LogRow& row : r.log) {
    if (row.epoch == 0) pseudo += row.n_pseudo;
    // The MAE branch is dropped from epoch e_decay = 1 on.
    if (row.epoch >= 1) EXPECT_EQ(row.loss.l_mask, 0.0);
  }
  EXPECT_EQ(pseudo, r.pseudo_per_epoch[0]);
}

TEST_F(TrainerTest, AcrOffUsesHardThreshold) {
  RunConfig c = *config_;
  c.enable_acr = false;
  c.e_teach = 1;
  c.e_decay = c.e_reinit = 1;
  for (const LogRow& row : adapt(c, *data_, *source_).log) EXPECT_EQ(row.threshold, c.c_hard);
}

TEST_F(TrainerTest, MaOffUsesFixedRatio) {
  RunConfig c = *config_;
  c.enable_ma = false;
  c.fixed_mask_ratio = 0.4;
  c.e_teach = 1;
  c.e_decay = c.e_reinit = 1;
  for (const LogRow& row : adapt(c, *data_, *source_).log) EXPECT_EQ(row.mu, 0.4);
}

TEST_F(TrainerTest, SelectiveRetrainRestoresSourceBytes) {
  const TrainReport r = adapt(*config_, *data_, *source_);
  ASSERT_EQ(r.retrain_snapshots.size(), 1u);
  const ParamSet<float>& snap = r.retrain_snapshots[0];
  EXPECT_GT(snap.size(), 0u);
  for (std::size_t i = 0; i < snap.size(); ++i) {
    EXPECT_TRUE(is_retrained_param(snap.name(i)));
    EXPECT_EQ(snap[i], source_->get(snap.name(i))) << snap.name(i);
  }
}

TEST_F(TrainerTest, SelectiveRetrainCanBeDisabled) {
  RunConfig c = *config_;
  c.enable_selective = false;
  EXPECT_TRUE(adapt(c, *data_, *source_).retrain_snapshots.empty());
}

TEST_F(TrainerTest, AdaptIsDeterministicAndWritesArtifacts) {
  const auto a = uda::testing::scratch_dir("_a");
  const auto b = uda::testing::scratch_dir("_b");
  adapt(*config_, *data_, *source_, a);
  adapt(*config_, *data_, *source_, b);
  for (const char* f : {"train_log.csv", "adapt.ckpt", "froc_epoch_0.csv", "froc_epoch_1.csv",
                        "report.txt"}) {
    ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
    EXPECT_EQ(uda::testing::read_file(a / f), uda::testing::read_file(b / f)) << f;
  }
}

TEST_F(TrainerTest, EvaluateIsDeterministicAndRejectsEmptySet) {
  const EvalResult e1 = evaluate(*source_, data_->target, *config_);
  const EvalResult e2 = evaluate(*source_, data_->target, *config_);
  ASSERT_EQ(e1.curve.points.size(), config_->fpi_points.size());
  for (std::size_t i = 0; i < e1.curve.points.size(); ++i) {
    EXPECT_EQ(e1.curve.points[i].recall, e2.curve.points[i].recall);
  }
  EXPECT_THROW(evaluate(*source_, {}, *config_), Error);
}

TEST_F(TrainerTest, NonFiniteLossWritesDiagnostic) {
  const auto dir = uda::testing::scratch_dir();
  RunConfig c = *config_;
  c.pretrain_lr = c.pretrain_lr_backbone = 1e30;
  c.e_pre = 3;
  try {
    pretrain_source(c, *data_, dir);
    FAIL() << "expected a non-finite failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
  const std::string diag = uda::testing::read_file(dir / "diagnostic.txt");
  EXPECT_NE(diag.find("mu="), std::string::npos);
  EXPECT_NE(diag.find("l_total="), std::string::npos);
  EXPECT_NE(diag.find("batch indices:"), std::string::npos);
}

TEST(RunConfigTest, ValidationRejectsBrokenInvariants) {
  EXPECT_NO_THROW(RunConfig{}.validate());
  RunConfig c;
  c.e_reinit = c.e_teach + 1;
  EXPECT_THROW(c.validate(), Error);
  c = RunConfig{};
  c.batch_size = 3;
  EXPECT_THROW(c.validate(), Error);
  c = RunConfig{};
  c.gamma_ema = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(LogFormatTest, RowMatchesHeaderColumns) {
  LogRow row;
  row.iter = 3;
  row.loss.l_total = 0.5;
  const std::string line = format_log_row(row);
  const std::string header = kTrainLogHeader;
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), std::count(header.begin(), header.end(), ','));
  EXPECT_EQ(line.rfind("3,0,", 0), 0u);
}

}  // namespace
}  // namespace uda

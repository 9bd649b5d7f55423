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

// Exercises the shared library through its C interface only.
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "gtest/gtest.h"
#include "uda_forge/uda_forge.h"

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "uda_forge_tests" / ("capi." + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kTinyConfig = R"(
n_source = 16
n_target = 16
n_source_holdout = 8
batch_size = 8
e_pre = 1
e_teach = 1
e_decay = 1
e_reinit = 1
t_i = 3
)";

TEST(CApiTest, VersionAndStatusNames) {
  EXPECT_STREQ(uda_version(), "1.0.0");
  EXPECT_STREQ(uda_status_name(UDA_OK), "ok");
  EXPECT_STREQ(uda_status_name(UDA_ERR_PARSE), "parse error");
}

TEST(CApiTest, RngReferenceValue) {
  uda_rng* rng = nullptr;
  ASSERT_EQ(uda_rng_new(0, &rng), UDA_OK);
  uint64_t v = 0;
  ASSERT_EQ(uda_rng_next(rng, &v), UDA_OK);
  EXPECT_EQ(v, 0xE220A8397B1DCDAFull);
  uda_rng_free(rng);
}

TEST(CApiTest, NullArgumentsAreRejected) {
  EXPECT_EQ(uda_config_new(nullptr), UDA_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(uda_rng_next(nullptr, nullptr), UDA_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(uda_last_error()), "");
  uda_config_free(nullptr);
  uda_rng_free(nullptr);
}

TEST(CApiTest, ConfigErrorsCarryMessages) {
  uda_config* cfg = nullptr;
  EXPECT_EQ(uda_config_parse("gamma_ema = 1.5\n", &cfg), UDA_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(cfg, nullptr);
  EXPECT_NE(std::string(uda_last_error()).find("gamma_ema"), std::string::npos);
  EXPECT_EQ(uda_config_parse("bogus = 1\n", &cfg), UDA_ERR_PARSE);
  EXPECT_NE(std::string(uda_last_error()).find(":1"), std::string::npos);
  EXPECT_EQ(uda_config_load("/nonexistent/run.toml", &cfg), UDA_ERR_NOT_FOUND);
}

TEST(CApiTest, ConfigSetAndDump) {
  uda_config* cfg = nullptr;
  ASSERT_EQ(uda_config_new(&cfg), UDA_OK);
  ASSERT_EQ(uda_config_set(cfg, "seed", "99"), UDA_OK);
  ASSERT_EQ(uda_config_set(cfg, "target.blur_sigma", "0.75"), UDA_OK);
  EXPECT_EQ(uda_config_set(cfg, "nope", "1"), UDA_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(uda_config_validate(cfg), UDA_OK);

  size_t len = 0;
  ASSERT_EQ(uda_config_dump(cfg, nullptr, 0, &len), UDA_OK);
  std::string text(len + 1, '\0');
  ASSERT_EQ(uda_config_dump(cfg, text.data(), text.size(), &len), UDA_OK);
  text.resize(len);
  EXPECT_NE(text.find("seed = 99"), std::string::npos);
  EXPECT_NE(text.find("blur_sigma = 0.75"), std::string::npos);

  uda_config* again = nullptr;
  ASSERT_EQ(uda_config_parse(text.c_str(), &again), UDA_OK);
  size_t len2 = 0;
  std::string text2(len + 1, '\0');
  ASSERT_EQ(uda_config_dump(again, text2.data(), text2.size(), &len2), UDA_OK);
  text2.resize(len2);
  EXPECT_EQ(text, text2);
  uda_config_free(again);
  uda_config_free(cfg);
}

TEST(CApiTest, TinyPipeline) {
  const fs::path dir = fresh_dir("pipeline");
  uda_config* cfg = nullptr;
  ASSERT_EQ(uda_config_parse(kTinyConfig, &cfg), UDA_OK);

  ASSERT_EQ(uda_synth(cfg, (dir / "data").c_str()), UDA_OK) << uda_last_error();
  EXPECT_TRUE(fs::exists(dir / "data" / "target" / "images.bin"));

  ASSERT_EQ(uda_pretrain(cfg, (dir / "data").c_str(), (dir / "pre").c_str()), UDA_OK)
      << uda_last_error();
  ASSERT_EQ(uda_adapt(cfg, (dir / "data").c_str(), (dir / "pre" / "source.ckpt").c_str(),
                      (dir / "adapt").c_str()),
            UDA_OK)
      << uda_last_error();

  uda_eval_result r{};
  ASSERT_EQ(uda_evaluate(cfg, (dir / "adapt" / "adapt.ckpt").c_str(), nullptr,
                         (dir / "data").c_str(), (dir / "eval").c_str(), &r),
            UDA_OK)
      << uda_last_error();
  EXPECT_EQ(r.n_points, 6u);
  EXPECT_EQ(r.n_images, 16);
  for (const char* f : {"froc.csv", "detections.csv", "metrics.txt"}) {
    EXPECT_TRUE(fs::exists(dir / "eval" / f)) << f;
  }

  // Re-scoring the written detections reproduces the checkpoint evaluation.
  uda_eval_result r2{};
  ASSERT_EQ(uda_evaluate_detections(cfg, (dir / "eval" / "detections.csv").c_str(),
                                    (dir / "data" / "target").c_str(), nullptr, &r2),
            UDA_OK)
      << uda_last_error();
  for (size_t i = 0; i < r.n_points; ++i) EXPECT_EQ(r.recall[i], r2.recall[i]);

  const std::string froc_csv = (dir / "eval" / "froc.csv").string();
  const char* stable[] = {froc_csv.c_str()};
  const char* labels[] = {"adapted"};
  ASSERT_EQ(uda_froc_plot(stable, labels, 1, (dir / "froc.svg").c_str()), UDA_OK);
  EXPECT_NE(slurp(dir / "froc.svg").find("adapted"), std::string::npos);

  EXPECT_EQ(uda_evaluate(cfg, (dir / "adapt" / "adapt.ckpt").c_str(), "nobody", nullptr, nullptr,
                         nullptr),
            UDA_ERR_NOT_FOUND);
  EXPECT_EQ(uda_adapt(cfg, nullptr, (dir / "missing.ckpt").c_str(), (dir / "x").c_str()),
            UDA_ERR_NOT_FOUND);
  uda_config_free(cfg);
}

TEST(CApiTest, GradCheckReport) {
  double worst = 1;
  size_t len = 0;
  ASSERT_EQ(uda_grad_check(3, 1, &worst, nullptr, 0, &len), UDA_OK);
  EXPECT_LT(worst, 1e-4);
  EXPECT_GT(len, 0u);
}

}  // namespace

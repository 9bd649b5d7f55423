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

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "gtest/gtest.h"
#include "uda_forge/trainer.hpp"

namespace uda::testing {

// Fresh directory under the system temp dir, named after the running test.
inline std::filesystem::path scratch_dir(const std::string& tag = "") {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "uda_forge_tests" /
                              (std::string(info->test_suite_name()) + "." + info->name() + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A run small enough for unit tests: a few dozen images, one or two epochs.
inline RunConfig tiny_config() {
  RunConfig c;
  c.n_source = 24;
  c.n_target = 24;
  c.n_source_holdout = 8;
  c.batch_size = 8;
  c.e_pre = 1;
  c.e_teach = 2;
  c.e_decay = 1;
  c.e_reinit = 1;
  c.t_i = 3;
  c.ablation_seeds = {1};
  return c;
}

}  // namespace uda::testing

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

#include <cstring>

#include "gtest/gtest.h"
#include "test_util.hpp"
#include "uda_forge/checkpoint.hpp"
#include "uda_forge/detector.hpp"
#include "uda_forge/error.hpp"

namespace uda {
namespace {

TEST(CheckpointTest, HeaderBytes) {
  const auto dir = uda::testing::scratch_dir();
  ParamSet<float> p;
  p.add("w", Tensor({2}, {1.5f, -2.0f}));
  write_checkpoint(dir / "m.ckpt", {{"source", &p}});
  const std::string bytes = uda::testing::read_file(dir / "m.ckpt");
  // magic + version + (len + "source/w") + rank + dim + 2 floats
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 4 + 4 + 8);
  EXPECT_EQ(bytes.substr(0, 4), "DMST");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(8, 4), std::string("\x08\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(12, 8), "source/w");
  float first = 0;
  std::memcpy(&first, bytes.data() + 28, 4);
  EXPECT_EQ(first, 1.5f);
}

TEST(CheckpointTest, TeacherAndStudentRoundTrip) {
  const auto dir = uda::testing::scratch_dir();
  Rng rng(1);
  const ParamSet<float> teacher = init_detector_params(rng);
  const ParamSet<float> student = init_detector_params(rng);
  write_checkpoint(dir / "adapt.ckpt", {{"teacher", &teacher}, {"student", &student}});
  EXPECT_EQ(load_model(dir / "adapt.ckpt", "teacher"), teacher);
  EXPECT_EQ(load_model(dir / "adapt.ckpt", "student"), student);
  EXPECT_EQ(read_checkpoint(dir / "adapt.ckpt").size(), 2 * teacher.size());
}

TEST(CheckpointTest, MissingPrefixIsNotFound) {
  const auto dir = uda::testing::scratch_dir();
  ParamSet<float> p;
  p.add("w", Tensor({1}));
  write_checkpoint(dir / "m.ckpt", {{"source", &p}});
  try {
    load_model(dir / "m.ckpt", "teacher");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
}

TEST(CheckpointTest, CorruptFilesAreRejected) {
  const auto dir = uda::testing::scratch_dir();
  ParamSet<float> p;
  p.add("w", Tensor({4}));
  write_checkpoint(dir / "m.ckpt", {{"source", &p}});
  std::string bytes = uda::testing::read_file(dir / "m.ckpt");
  {
    std::ofstream out(dir / "truncated.ckpt", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 3);
  }
  EXPECT_THROW(read_checkpoint(dir / "truncated.ckpt"), Error);
  bytes[0] = 'X';
  {
    std::ofstream out(dir / "magic.ckpt", std::ios::binary);
    out << bytes;
  }
  EXPECT_THROW(read_checkpoint(dir / "magic.ckpt"), Error);
  EXPECT_THROW(read_checkpoint(dir / "absent.ckpt"), Error);
}

}  // namespace
}  // namespace uda

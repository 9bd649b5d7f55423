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

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "uda_forge/param_set.hpp"

namespace uda {

inline constexpr char kCheckpointMagic[4] = {'D', 'M', 'S', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout: magic "DMST", u32 version, then records until EOF of
// (u32 name length, name bytes, u32 rank, u32 dims..., f32 data), all
// little-endian. Each model is stored under "<prefix>/<tensor name>".
struct NamedModel {
  std::string prefix;
  const ParamSet<float>* params;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedModel>& models);

// Every record in file order, names including their prefixes.
ParamSet<float> read_checkpoint(const std::filesystem::path& path);

// The tensors stored under `prefix/`, with the prefix stripped.
ParamSet<float> extract_model(const ParamSet<float>& records, const std::string& prefix);

ParamSet<float> load_model(const std::filesystem::path& path, const std::string& prefix);

}  // namespace uda

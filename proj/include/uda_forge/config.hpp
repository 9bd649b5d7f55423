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
#include <string>
#include <string_view>

#include "uda_forge/trainer.hpp"

namespace uda {

// Reads the TOML-compatible subset used for run configs: top-level
// `key = value` lines, [source] and [target] sections holding domain specs,
// numbers, booleans, quoted strings, flat number arrays and `#` comments.
// Keys not present keep their defaults. Unknown keys and malformed lines
// raise kParse naming the line; the result is validated before returning.
RunConfig parse_config(std::string_view text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

// Writes every key, so parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

// Sets one key from its textual value, e.g. ("target.blur_sigma", "0.7").
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

}  // namespace uda

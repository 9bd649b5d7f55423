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

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>

#include "uda_forge/error.hpp"

namespace uda::binary_io {

inline std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const std::uint32_t le = to_little(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof le);
}

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t le = 0;
  in.read(reinterpret_cast<char*>(&le), sizeof le);
  require(static_cast<bool>(in), ErrorCode::kIo, "unexpected end of binary stream");
  return to_little(le);
}

inline void write_f32s(std::ostream& out, std::span<const float> values) {
  for (float f : values) write_u32(out, std::bit_cast<std::uint32_t>(f));
}

inline void read_f32s(std::istream& in, std::span<float> values) {
  for (float& f : values) f = std::bit_cast<float>(read_u32(in));
}

}  // namespace uda::binary_io

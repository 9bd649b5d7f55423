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

#include "uda_forge/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "uda_forge/binary_io.hpp"

namespace uda {

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedModel>& models) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  binary_io::write_u32(out, kCheckpointVersion);
  for (const NamedModel& m : models) {
    for (std::size_t i = 0; i < m.params->size(); ++i) {
      const std::string name = m.prefix + "/" + m.params->name(i);
      const Tensor& t = (*m.params)[i];
      binary_io::write_u32(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      binary_io::write_u32(out, static_cast<std::uint32_t>(t.rank()));
      for (int d : t.shape()) binary_io::write_u32(out, static_cast<std::uint32_t>(d));
      binary_io::write_f32s(out, t.data());
    }
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failure on " + path.string());
}

ParamSet<float> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kNotFound, "cannot open checkpoint " + path.string());
  char magic[4] = {};
  in.read(magic, sizeof magic);
  require(in && std::memcmp(magic, kCheckpointMagic, sizeof magic) == 0, ErrorCode::kParse,
          path.string() + " is not a checkpoint (bad magic)");
  const std::uint32_t version = binary_io::read_u32(in);
  require(version == kCheckpointVersion, ErrorCode::kParse,
          path.string() + ": unsupported checkpoint version " + std::to_string(version));

  ParamSet<float> records;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = binary_io::read_u32(in);
    require(name_len > 0 && name_len < 4096, ErrorCode::kParse, path.string() + ": bad record name");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = binary_io::read_u32(in);
    require(rank >= 1 && rank <= 8, ErrorCode::kParse, path.string() + ": bad rank for " + name);
    std::vector<int> shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = binary_io::read_u32(in);
      require(d > 0 && d < (1u << 24), ErrorCode::kParse, path.string() + ": bad dim for " + name);
      shape.push_back(static_cast<int>(d));
    }
    Tensor t(shape);
    binary_io::read_f32s(in, t.data());
    records.add(std::move(name), std::move(t));
  }
  return records;
}

ParamSet<float> extract_model(const ParamSet<float>& records, const std::string& prefix) {
  const std::string lead = prefix + "/";
  ParamSet<float> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records.name(i).rfind(lead, 0) == 0) {
      out.add(records.name(i).substr(lead.size()), records[i]);
    }
  }
  require(out.size() > 0, ErrorCode::kNotFound, "checkpoint holds no model '" + prefix + "'");
  return out;
}

ParamSet<float> load_model(const std::filesystem::path& path, const std::string& prefix) {
  return extract_model(read_checkpoint(path), prefix);
}

}  // namespace uda

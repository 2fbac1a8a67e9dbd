// src/checkpoint.cc

// Copyright 2026  The plcadapt Authors
//
// See ../LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "plcadapt/checkpoint.h"

#include "plcadapt/errors.h"
#include "plcadapt/io_util.h"

namespace plcadapt {

namespace {
constexpr char kMagic[4] = {'P', 'L', 'C', 'K'};
constexpr uint32_t kVersion = 1;
}  // namespace

std::string encode_checkpoint(const nlohmann::json& meta,
                              const std::map<std::string, Matrix>& tensors) {
  nlohmann::json index = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, m] : tensors) {
    index.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<uint64_t>(m.size()) * 4;
  }
  nlohmann::json header = {{"meta", meta}, {"tensors", index}, {"dtype", "float32-le"}};
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& [_, m] : tensors) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(out, static_cast<float>(m(r, c)));
    }
  }
  return out;
}

CheckpointData decode_checkpoint(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 16 || bytes.compare(0, 4, kMagic, 4) != 0) {
    throw DataError("not a checkpoint file: " + origin);
  }
  const uint32_t version = get_u32(bytes.data() + 4);
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + origin);
  }
  const uint64_t hlen = get_u64(bytes.data() + 8);
  if (16 + hlen > bytes.size()) throw DataError("truncated checkpoint header: " + origin);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint header in " + origin + ": " + e.what());
  }
  CheckpointData out;
  out.meta = header.value("meta", nlohmann::json::object());
  const size_t base = 16 + hlen;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name");
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    const uint64_t offset = entry.at("offset");
    if (base + offset + static_cast<uint64_t>(rows * cols) * 4 > bytes.size()) {
      throw DataError("truncated tensor '" + name + "' in " + origin);
    }
    Matrix m(rows, cols);
    const char* p = bytes.data() + base + offset;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c, p += 4) m(r, c) = get_f32(p);
    }
    out.tensors.emplace(name, std::move(m));
  }
  return out;
}

void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                      const std::map<std::string, Matrix>& tensors) {
  write_file_atomic(path, encode_checkpoint(meta, tensors));
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

}  // namespace plcadapt

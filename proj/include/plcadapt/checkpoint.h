// include/plcadapt/checkpoint.h

// Copyright 2026  The plcadapt Authors
//
// See ../../LICENSE for clarification regarding multiple authors
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

#ifndef PLCADAPT_CHECKPOINT_H_
#define PLCADAPT_CHECKPOINT_H_

// Self-describing parameter container:
//   "PLCK" | u32 version | u64 header length | JSON header | tensor data
// The header carries free-form metadata plus an index of
// {name, shape [rows, cols], offset}; tensor data is little-endian float32,
// row-major, laid out in index order.

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "plcadapt/param_set.h"

namespace plcadapt {

struct CheckpointData {
  nlohmann::json meta;
  std::map<std::string, Matrix> tensors;
};

std::string encode_checkpoint(const nlohmann::json& meta,
                              const std::map<std::string, Matrix>& tensors);
CheckpointData decode_checkpoint(const std::string& bytes, const std::string& origin);

// Atomic (temp file + rename).
void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                      const std::map<std::string, Matrix>& tensors);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace plcadapt

#endif  // PLCADAPT_CHECKPOINT_H_

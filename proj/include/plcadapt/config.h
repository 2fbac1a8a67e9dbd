// include/plcadapt/config.h

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

#ifndef PLCADAPT_CONFIG_H_
#define PLCADAPT_CONFIG_H_

// Experiment configuration: a TOML file with the sections [frontend],
// [corruption], [adapter], [train], [reference], [backends.<id>] and [eval]
// plus a top-level `seed`. Unknown keys are rejected. Environment variables
// PLCADAPT_<SECTION>__<KEY> (or PLCADAPT_SEED) override file values; their
// text is read as a TOML value, falling back to a plain string.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcadapt/adapter.h"
#include "plcadapt/asr_backend.h"
#include "plcadapt/corruption.h"
#include "plcadapt/features.h"
#include "plcadapt/training.h"

namespace plcadapt {

struct EvalConfig {
  std::vector<double> plrs = {0.0, 0.2, 0.4};
  int beam_size = 5;
  std::string normalizer = "default";
  int workers = 1;
  nlohmann::json to_json() const;
};

struct ExperimentConfig {
  uint64_t seed = 0;
  FrontendConfig frontend;
  CorruptionConfig corruption;
  AdapterConfig adapter;
  uint64_t adapter_seed = 0;
  TrainConfig train;
  ReferenceSpec reference;
  double reference_wer_bar = 0.10;
  std::map<std::string, BackendEntry> backends;
  EvalConfig eval;

  nlohmann::json to_json() const;
  // SHA-256 of the canonical (sorted-key, compact) JSON form.
  std::string hash() const;
  const BackendEntry& backend(const std::string& id) const;
};

// Seeds left unset in a section inherit the top-level seed. Relative paths
// resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& toml_text, const std::string& origin,
                              const std::filesystem::path& base_dir, bool use_env = true);
ExperimentConfig load_config(const std::filesystem::path& path, bool use_env = true);
// Defaults only (plus environment overrides when requested).
ExperimentConfig default_config(bool use_env = false);

}  // namespace plcadapt

#endif  // PLCADAPT_CONFIG_H_

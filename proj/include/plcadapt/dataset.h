// include/plcadapt/dataset.h

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

#ifndef PLCADAPT_DATASET_H_
#define PLCADAPT_DATASET_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcadapt/features.h"

namespace plcadapt {

// One JSONL row. The corrupted-manifest fields are only present on copies
// produced by the corruption tools.
struct ManifestRow {
  std::string utterance_id;
  std::string audio_path;  // absolute after loading
  std::string transcript;
  std::string language;
  double duration_s = 0.0;

  std::optional<std::string> features_path;
  std::optional<std::string> mask_path;
  std::optional<double> plr;
  std::optional<double> realized_plr;

  nlohmann::json to_json() const;
  static ManifestRow from_json(const nlohmann::json& j);
};

struct DatasetManifest {
  std::string id;  // dataset name: the file stem, or the directory of a manifest.jsonl
  std::vector<ManifestRow> rows;
};

// Relative audio/feature/mask paths resolve against the manifest directory.
// Throws DataError for duplicate ids, missing audio or malformed tags.
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_audio = true);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
std::string manifest_to_jsonl(const DatasetManifest& m);

bool is_language_tag(const std::string& tag);

// Builds a manifest from every .wav/.flac under `root`; the transcript of
// a/b.wav is read from a/b.txt when present.
DatasetManifest manifest_from_tree(const std::filesystem::path& root, const std::string& language);

struct Utterance {
  std::string id;
  MelSpectrogram features;
  std::string transcript;
  std::string language;
};

// Decodes audio and runs the frontend for every row, in manifest order.
std::vector<Utterance> load_utterances(const DatasetManifest& m, const FrontendConfig& cfg,
                                       int workers = 1);

}  // namespace plcadapt

#endif  // PLCADAPT_DATASET_H_

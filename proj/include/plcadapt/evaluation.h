// include/plcadapt/evaluation.h

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

#ifndef PLCADAPT_EVALUATION_H_
#define PLCADAPT_EVALUATION_H_

// WER-vs-PLR evaluation of recognizer front ends: the zero-fill baseline and
// trained adapters, optionally paired with a backend other than the one they
// were trained against.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcadapt/adapter.h"
#include "plcadapt/asr_backend.h"
#include "plcadapt/corruption.h"
#include "plcadapt/dataset.h"
#include "plcadapt/wer.h"

namespace plcadapt {

enum class SystemKind { kBaselineZeroFill, kAdapter };

struct SystemUnderTest {
  std::string id;
  SystemKind kind = SystemKind::kBaselineZeroFill;
  std::shared_ptr<const AdapterParams> adapter;  // adapter systems only
  std::string adapter_checkpoint;                // informational
  std::string train_backend_id;                  // backend the adapter was trained with
  std::string backend_id;                        // backend used for decoding
  DecodeConfig decode;

  // Adapter systems decoded with a backend other than their training one.
  bool is_bta() const { return kind == SystemKind::kAdapter && train_backend_id != backend_id; }
  nlohmann::json to_json() const;
};

// One utterance prepared for evaluation: clean features plus the persisted
// mask for the rate under test (absent at rate 0).
struct EvalItem {
  std::string utterance_id;
  std::string transcript;
  std::string language;
  const MelSpectrogram* clean = nullptr;
  std::optional<LossMask> mask;
};

struct UtteranceResult {
  std::string utterance_id;
  std::string hypothesis;
  WerBreakdown breakdown;
  bool undefined = false;  // empty reference, excluded from aggregation
  std::string mask_hash;
};

// Features the system hands to its backend for one item.
MelSpectrogram system_input(const SystemUnderTest& s, const EvalItem& item, FillPolicy fill);

std::vector<UtteranceResult> evaluate_system(const SystemUnderTest& s,
                                             const std::vector<EvalItem>& items,
                                             const AsrBackend& b,
                                             const TextNormalizer& normalizer = {},
                                             FillPolicy fill = FillPolicy::kZeroFill,
                                             int workers = 1);

struct ReportRow {
  std::string system;
  std::string dataset;
  std::string language;
  double plr = 0.0;
  WerBreakdown breakdown;
  int64_t utterances = 0;
  int64_t undefined = 0;

  double wer() const { return breakdown.wer(); }
  bool operator==(const ReportRow&) const = default;
};

struct CellFailure {
  std::string system;
  std::string dataset;
  double plr = 0.0;
  std::string error;
  bool operator==(const CellFailure&) const = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<CellFailure> failures;
  nlohmann::json provenance = nlohmann::json::object();

  // Sorts rows by (dataset, system, plr).
  void canonicalize();
  const ReportRow* find(const std::string& system, const std::string& dataset, double plr) const;
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  bool operator==(const EvalReport&) const = default;
};

ReportRow aggregate(const std::string& system, const std::string& dataset,
                    const std::string& language, double plr,
                    const std::vector<UtteranceResult>& results);

struct EvalDataset {
  DatasetManifest manifest;
  std::vector<MelSpectrogram> clean;  // parallel to manifest.rows
};

// Computes (or reads) clean features for every row.
EvalDataset load_eval_dataset(const DatasetManifest& m, const FrontendConfig& frontend,
                              int workers = 1);

struct SweepOptions {
  std::filesystem::path mask_dir;  // masks persisted under <mask_dir>/<dataset>/plr_*/
  FrontendConfig frontend;
  TextNormalizer normalizer;
  int workers = 1;
  bool force = false;
  nlohmann::json provenance = nlohmann::json::object();
};

// Full systems x datasets x plrs cross product. Masks are built once per
// (dataset, plr) and shared by every system. Cell failures are recorded and
// the sweep continues.
EvalReport sweep(const std::vector<SystemUnderTest>& systems,
                 const std::vector<EvalDataset>& datasets, const std::vector<double>& plrs,
                 const CorruptionConfig& cfg,
                 const std::map<std::string, const AsrBackend*>& backends,
                 const SweepOptions& options);

std::string report_csv(const EvalReport& r);
// Line plot of WER against PLR for one dataset, one polyline per system.
std::string report_svg(const EvalReport& r, const std::string& dataset);

struct EmittedFiles {
  std::filesystem::path csv;
  std::filesystem::path json;
  std::vector<std::filesystem::path> svg;
};
// Writes <dir>/<stem>.csv, <stem>.json and <stem>_<dataset>.svg.
EmittedFiles emit_report(const EvalReport& r, const std::filesystem::path& dir,
                         const std::string& stem = "report");

}  // namespace plcadapt

#endif  // PLCADAPT_EVALUATION_H_

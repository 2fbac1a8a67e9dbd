// include/plcadapt/corruption.h

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

#ifndef PLCADAPT_CORRUPTION_H_
#define PLCADAPT_CORRUPTION_H_

// Packet-loss simulation on log-mel frames.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcadapt/dataset.h"
#include "plcadapt/features.h"
#include "plcadapt/rng.h"

namespace plcadapt {

struct LossSpan {
  int start = 0;   // first lost frame
  int length = 0;  // consecutive lost frames
  bool operator==(const LossSpan&) const = default;
};

struct LossMask {
  std::vector<LossSpan> spans;  // sorted, disjoint, never adjacent
  int total_frames = 0;
  // Set when a positive target could not be met at all (utterance shorter
  // than the minimum span).
  bool infeasible = false;

  std::vector<bool> expand() const;
  static LossMask from_flags(const std::vector<bool>& lost);
  // Throws DataError when the span invariants do not hold.
  void validate() const;
  bool operator==(const LossMask& o) const {
    return spans == o.spans && total_frames == o.total_frames;
  }
};

double realized_plr(const LossMask& mask);

// Span-length law over positive integers.
struct SpanDistribution {
  enum class Kind { kGeometric, kConstant, kUniform };
  Kind kind = Kind::kGeometric;
  double mean = 4.0;  // geometric: untruncated mean
  int max_length = 50;  // geometric truncation point
  int low = 1, high = 1;  // uniform bounds (inclusive); constant uses `low`

  int sample(Rng& rng) const;
  int min_length() const;
  // Mean of the distribution actually sampled (after truncation).
  double expected_mean() const;
  // "geometric(mean=4,max=50)", "constant(3)", "uniform(2,6)".
  std::string describe() const;
  static SpanDistribution parse(const std::string& text);
};

// Per-utterance drop-rate law used on the fly during training.
struct PlrDistribution {
  double low = 0.0;
  double high = 0.6;
  double sample(Rng& rng) const { return low == high ? low : rng.uniform(low, high); }
  std::string describe() const;
  static PlrDistribution parse(const std::string& text);
};

enum class FillPolicy { kZeroFill };

struct CorruptionConfig {
  std::optional<double> plr_target;  // fixed rate; otherwise plr_distribution
  PlrDistribution plr_distribution;
  SpanDistribution span_distribution;
  uint64_t seed = 0;
  FillPolicy fill_policy = FillPolicy::kZeroFill;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
};

constexpr double kMaxPlr = 0.95;

// Places round(plr * T) lost frames. Span lengths are drawn from the span
// law (the last one truncated to the remaining budget) and the clean frames
// are spread uniformly over the gaps, with at least one clean frame between
// spans. Deterministic in (seed, utterance_id, T, plr, span law).
LossMask sample_loss_mask(int total_frames, double plr, const SpanDistribution& spans,
                          uint64_t seed, std::string_view utterance_id);
// Uses cfg.plr_target, or draws a rate from cfg.plr_distribution.
LossMask sample_loss_mask(int total_frames, const CorruptionConfig& cfg,
                          std::string_view utterance_id);

double fill_value(FillPolicy fill);
MelSpectrogram apply_mask(const MelSpectrogram& m, const LossMask& mask,
                          FillPolicy fill = FillPolicy::kZeroFill);

// Mask file: {"utterance_id", "T", "seed", "spans": [[k, j], ...]} plus
// provenance fields.
nlohmann::json mask_to_json(const LossMask& mask, const std::string& utterance_id,
                            uint64_t seed, const nlohmann::json& provenance = {});
LossMask mask_from_json(const nlohmann::json& j);
LossMask read_mask(const std::filesystem::path& path);
std::string mask_hash(const LossMask& mask);

struct FixedPlrCopy {
  double plr = 0.0;
  DatasetManifest manifest;
  std::filesystem::path manifest_path;
};

struct FixedPlrOptions {
  std::filesystem::path out_dir;
  FrontendConfig frontend;
  nlohmann::json provenance;  // embedded in every mask file
  int workers = 1;
  bool force = false;  // otherwise existing copies are reused
};

// Writes, per rate, out_dir/plr_<rate>/{manifest.jsonl, <id>.mask.json,
// <id>.mel}. Rate 0 copies carry empty masks and bit-identical features.
std::vector<FixedPlrCopy> build_fixed_plr_testset(const DatasetManifest& manifest,
                                                  const std::vector<double>& plrs,
                                                  const CorruptionConfig& cfg,
                                                  const FixedPlrOptions& options);

std::string plr_dir_name(double plr);

}  // namespace plcadapt

#endif  // PLCADAPT_CORRUPTION_H_

// include/plcadapt/training.h

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

#ifndef PLCADAPT_TRAINING_H_
#define PLCADAPT_TRAINING_H_

// Adapter optimization against
//   total = lambda * CE(backend(adapter(corrupted)), y) + (1 - lambda) * L1(clean, adapter(corrupted))
// with the backend frozen.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcadapt/adapter.h"
#include "plcadapt/asr_backend.h"
#include "plcadapt/corruption.h"
#include "plcadapt/dataset.h"
#include "plcadapt/optimizer.h"

namespace plcadapt {

enum class LossMode { kCeOnly, kL1Only, kCombined };

std::string to_string(LossMode mode);
// Accepts "ce", "ce_only", "l1", "l1_only" and "combined".
LossMode parse_loss_mode(const std::string& s);

struct TrainConfig {
  double lambda_ce = 0.1;
  double learning_rate = 0.0005;
  double lr_decay_per_epoch = 0.10;
  int epochs = 10;
  int batch_size = 4;
  CorruptionConfig corruption;
  std::string backend_id = "tiny-a";
  LossMode loss_mode = LossMode::kCombined;
  uint64_t seed = 0;
  double clip_norm = 1.0;
  int max_consecutive_skips = 3;
  // Stops after this many optimizer steps when positive.
  int64_t max_steps = 0;

  // 1 for ce_only, 0 for l1_only, lambda_ce otherwise.
  double effective_lambda() const;
  void validate() const;
  nlohmann::json to_json() const;
};

// learning_rate * (1 - lr_decay_per_epoch)^epoch
double lr_at_epoch(const TrainConfig& cfg, int epoch);

struct LossTerms {
  double total = 0.0;
  double ce = 0.0;
  double l1 = 0.0;
};

// lambda * ce + (1 - lambda) * l1.
double compose_loss(double lambda, double ce, double l1);

// Forward-only evaluation of the objective. Throws DataError on shape
// mismatch and NumericError naming the non-finite term.
LossTerms combined_loss(const AsrBackend& b, const AdapterParams& p, const MelSpectrogram& clean,
                        const MelSpectrogram& corrupted, const TokenSequence& y, double lambda);

struct LossRecord {
  int64_t step = 0;
  int epoch = 0;
  LossTerms loss;
  bool skipped = false;
  nlohmann::json to_json() const;
};

struct TrainState {
  AdapterParams adapter;
  Adam optimizer;
  int epoch = 0;
  int64_t step = 0;
  double current_lr = 0.0;
  std::vector<LossRecord> history;
  int64_t skipped_steps = 0;
  int consecutive_skips = 0;
};

TrainState init_train_state(const AdapterParams& adapter, const TrainConfig& cfg);

struct TrainExample {
  const MelSpectrogram* clean = nullptr;
  MelSpectrogram corrupted;
  TokenSequence target;
};

// Differentiable objective for one example. Only the terms with a non-zero
// weight are built; l1_only never calls the backend.
struct LossGraph {
  ag::Var total;
  LossTerms terms;
};
LossGraph loss_graph(const AsrBackend& b, const AdapterParams& p, ParamBinding& bind,
                     const TrainExample& ex, double lambda);

// Batch-mean gradient of the objective with respect to the adapter
// parameters.
struct BatchGradient {
  GradMap grads;
  LossTerms mean;
};
BatchGradient batch_gradient(const AsrBackend& b, const AdapterParams& p,
                             const std::vector<TrainExample>& batch, double lambda);

// One optimizer step. Non-finite losses or gradients skip the update (the
// record is still appended); too many consecutive skips raise NumericError.
void train_step(TrainState& state, const std::vector<TrainExample>& batch, const TrainConfig& cfg,
                const AsrBackend& b);

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // per-epoch checkpoints; empty disables them
  std::filesystem::path output;          // final checkpoint; empty skips it
  bool resume = true;
  bool verbose = false;
  nlohmann::json provenance;  // embedded in checkpoints and the report
  std::string expected_fingerprint;  // registered fingerprint of the backend
};

struct TrainResult {
  AdapterParams adapter;
  nlohmann::json report;
  TrainState state;
};

// Corruption is drawn on the fly per (epoch, utterance). The backend must
// match the adapter's input layout and the configured backend id.
TrainResult train_loop(const std::vector<Utterance>& data, const TrainConfig& cfg,
                       const AdapterParams& init, const AsrBackend& b,
                       const FrontendConfig& frontend, const TrainOptions& options = {});

std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& dir, int epoch);

}  // namespace plcadapt

#endif  // PLCADAPT_TRAINING_H_

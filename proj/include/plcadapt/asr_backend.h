// include/plcadapt/asr_backend.h

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

#ifndef PLCADAPT_ASR_BACKEND_H_
#define PLCADAPT_ASR_BACKEND_H_

// Frozen recognizers behind one contract: teacher-forced cross entropy with
// a gradient for the input features, and beam-search decoding to text.

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcadapt/dataset.h"
#include "plcadapt/features.h"
#include "plcadapt/param_set.h"

namespace plcadapt {

struct TokenSequence {
  std::vector<int> ids;  // transcript characters, without sentinels
  std::string language;
  std::string text;  // normalized transcript the ids were made from
  size_t size() const { return ids.size(); }
};

struct DecodeConfig {
  int beam_size = 5;
  std::string language = "en";
  // Timestamps are never produced; setting this is a configuration error.
  bool emit_timestamps = false;
  // Hard cap on emitted tokens; 0 derives it from the input length.
  int max_tokens = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct LossResult {
  double loss = 0.0;
  Matrix input_grad;  // [n_mels x T], empty when not requested
};

class AsrBackend {
 public:
  virtual ~AsrBackend() = default;

  virtual const std::string& id() const = 0;
  virtual std::string kind() const = 0;
  virtual const FrontendConfig& frontend() const = 0;
  virtual int vocab_size() const = 0;
  // Throws ConfigError for characters or languages outside the vocabulary.
  virtual TokenSequence tokenize(const std::string& text, const std::string& language) const = 0;
  // Token-mean cross entropy over the transcript plus end marker.
  virtual LossResult ce_loss(const MelSpectrogram& m, const TokenSequence& y,
                             bool want_grad = true) const = 0;
  virtual std::string decode(const MelSpectrogram& m, const DecodeConfig& d) const = 0;
  // SHA-256 over every frozen parameter.
  virtual std::string fingerprint() const = 0;

  uint64_t loss_calls() const { return loss_calls_.load(); }
  uint64_t decode_calls() const { return decode_calls_.load(); }

 protected:
  void count_loss() const { ++loss_calls_; }
  void count_decode() const { ++decode_calls_; }
  // Shared argument checks: frame layout and finiteness.
  void check_input(const MelSpectrogram& m) const;

 private:
  mutable std::atomic<uint64_t> loss_calls_{0};
  mutable std::atomic<uint64_t> decode_calls_{0};
};

// Hyperparameters of the small attention recognizer.
struct ReferenceSpec {
  int encoder_channels = 192;
  int encoder_kernel = 5;
  std::vector<int> encoder_pools = {2, 2, 1};  // one conv per entry
  std::string pooling = "avg";                 // avg | max
  int embed_dim = 32;
  int hidden_dim = 192;
  // Inputs are padded or trimmed to this many frames (0 keeps their length).
  int context_frames = 0;

  // Training schedule.
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 2e-3;
  double lr_decay_per_epoch = 0.05;
  double clip_norm = 1.0;
  uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static ReferenceSpec from_json(const nlohmann::json& j);
};

class Vocabulary {
 public:
  static constexpr int kSos = 0;
  static constexpr int kEos = 1;

  Vocabulary() = default;
  Vocabulary(std::vector<std::string> languages, std::u32string chars);

  int size() const { return static_cast<int>(2 + languages_.size() + chars_.size()); }
  int language_id(const std::string& tag) const;  // -1 when unknown
  int char_id(char32_t c) const;                  // -1 when unknown
  char32_t char_at(int id) const;
  bool is_char(int id) const { return id >= first_char() && id < size(); }
  const std::vector<std::string>& languages() const { return languages_; }
  const std::u32string& chars() const { return chars_; }
  int first_char() const { return static_cast<int>(2 + languages_.size()); }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  // Languages and the sorted set of characters of normalized transcripts.
  static Vocabulary from_transcripts(const std::vector<Utterance>& utts);

 private:
  std::vector<std::string> languages_;
  std::u32string chars_;
};

// Transcript text as the reference recognizer sees it: lowercase, punctuation
// removed, single spaces.
std::string backend_text(const std::string& text);

class ReferenceBackend : public AsrBackend {
 public:
  ReferenceBackend(std::string id, FrontendConfig frontend, ReferenceSpec spec, Vocabulary vocab,
                   ParamSet params);

  const std::string& id() const override { return id_; }
  std::string kind() const override { return "reference"; }
  const FrontendConfig& frontend() const override { return frontend_; }
  int vocab_size() const override { return vocab_.size(); }
  TokenSequence tokenize(const std::string& text, const std::string& language) const override;
  LossResult ce_loss(const MelSpectrogram& m, const TokenSequence& y,
                     bool want_grad = true) const override;
  std::string decode(const MelSpectrogram& m, const DecodeConfig& d) const override;
  std::string fingerprint() const override { return params_.fingerprint(); }

  const ReferenceSpec& spec() const { return spec_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const ParamSet& params() const { return params_; }

  void save(const std::filesystem::path& path, const nlohmann::json& provenance = {}) const;
  static std::unique_ptr<ReferenceBackend> load(const std::filesystem::path& path);

 private:
  std::string id_;
  FrontendConfig frontend_;
  ReferenceSpec spec_;
  Vocabulary vocab_;
  const ParamSet params_;
};

// Graph-level pieces of the reference model, shared by training and the
// frozen backend.
namespace reference_model {

ParamSet init_params(const ReferenceSpec& spec, int n_mels, int vocab_size, uint64_t seed);
size_t count_params(const ReferenceSpec& spec, int n_mels, int vocab_size);
// Token-mean cross entropy of y given features `mel` ([n_mels x T]).
ag::Var loss(const ReferenceSpec& spec, const Vocabulary& vocab, ParamBinding& bind,
             const ag::Var& mel, const TokenSequence& y, double silence_value);
// Character ids of the best hypothesis (no sentinels). `max_tokens` <= 0
// derives the cap from the encoder length.
std::vector<int> beam_search(const ReferenceSpec& spec, const Vocabulary& vocab,
                             const ParamSet& params, const Matrix& mel, int lang, int beam_size,
                             int max_tokens, double silence_value);
// Plain argmax decoding, kept separate from the beam search.
std::vector<int> greedy_search(const ReferenceSpec& spec, const Vocabulary& vocab,
                               const ParamSet& params, const Matrix& mel, int lang, int max_tokens,
                               double silence_value);

}  // namespace reference_model

struct BackendTrainReport {
  std::vector<double> epoch_loss;
  double heldout_wer = 0.0;
  bool passed = false;
  int train_utterances = 0;
  int heldout_utterances = 0;
  double wall_seconds = 0.0;
  nlohmann::json to_json() const;
};

struct BackendTrainResult {
  std::unique_ptr<ReferenceBackend> backend;
  BackendTrainReport report;
};

// Trains on `train`, freezes (float32 rounding), then measures WER on
// `heldout` with beam decoding. The report says whether the
// `wer_bar` was met; the caller decides how to fail.
BackendTrainResult train_reference_backend(const std::string& id, const std::vector<Utterance>& train,
                                           const std::vector<Utterance>& heldout,
                                           const FrontendConfig& frontend, const ReferenceSpec& spec,
                                           double wer_bar = 0.10, int beam_size = 5,
                                           bool verbose = false);

// Talks to an external recognizer process through files. The command is run
// as `<command> <verb> ...`:
//   fingerprint                                  -> prints the hash
//   decode <mel> <language> <beam>               -> prints the text
//   loss <mel> <language> <text> <grad-out|->    -> prints the loss, writes
//                                                   the gradient as a mel file
class ExternalShimBackend : public AsrBackend {
 public:
  static constexpr int kContractVersion = 1;

  ExternalShimBackend(std::string id, std::string command, FrontendConfig frontend,
                      int vocab_size = 0);

  const std::string& id() const override { return id_; }
  std::string kind() const override { return "external-shim"; }
  const FrontendConfig& frontend() const override { return frontend_; }
  int vocab_size() const override { return vocab_size_; }
  TokenSequence tokenize(const std::string& text, const std::string& language) const override;
  LossResult ce_loss(const MelSpectrogram& m, const TokenSequence& y,
                     bool want_grad = true) const override;
  std::string decode(const MelSpectrogram& m, const DecodeConfig& d) const override;
  std::string fingerprint() const override;

 private:
  std::string run(const std::vector<std::string>& args) const;

  std::string id_;
  std::string command_;
  FrontendConfig frontend_;
  int vocab_size_;
};

// Registry entry from the config file.
struct BackendEntry {
  std::string id;
  std::string kind = "reference";  // reference | external-shim
  std::string checkpoint;          // reference backends
  std::string command;             // external shims
  std::string tokenizer;           // informational; the reference vocabulary lives in the checkpoint
  FrontendConfig frontend;
  int contract_version = ExternalShimBackend::kContractVersion;
  std::string expected_fingerprint;  // verified at load when set
};

// Loads and verifies a backend. Throws ConfigError for frontend mismatches and
// DataError for fingerprint mismatches.
std::unique_ptr<AsrBackend> open_backend(const BackendEntry& entry);

}  // namespace plcadapt

#endif  // PLCADAPT_ASR_BACKEND_H_

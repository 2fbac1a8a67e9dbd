// include/plcadapt/synth.h

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

#ifndef PLCADAPT_SYNTH_H_
#define PLCADAPT_SYNTH_H_

// Synthetic spoken-digit corpus for desk-scale runs. Every letter of a digit
// word is rendered as a short chord of three formant-like partials, words are
// separated by pauses and the whole utterance sits on low-level noise. Each
// utterance draws its own speaking rate, pitch scale and loudness.

#include <cstdint>
#include <filesystem>
#include <string>

#include "plcadapt/dataset.h"
#include "plcadapt/features.h"

namespace plcadapt {

struct SynthConfig {
  int n_utterances = 100;
  int min_words = 2;
  int max_words = 4;
  uint64_t seed = 0;
  std::string language = "en";
  std::string id_prefix = "utt";
  int sample_rate = 16000;
  double noise_level = 0.002;

  void validate() const;
};

struct SynthUtterance {
  std::string id;
  std::string transcript;
  Waveform audio;
};

SynthUtterance synth_utterance(const SynthConfig& cfg, int index);

// Writes <dir>/audio/<id>.wav and <dir>/manifest.jsonl; returns the manifest
// with absolute paths.
DatasetManifest write_synthetic_corpus(const std::filesystem::path& dir, const SynthConfig& cfg);

}  // namespace plcadapt

#endif  // PLCADAPT_SYNTH_H_

// include/plcadapt/features.h

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

#ifndef PLCADAPT_FEATURES_H_
#define PLCADAPT_FEATURES_H_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcadapt/autograd.h"

namespace plcadapt {

using ag::Matrix;

struct Waveform {
  std::vector<double> samples;  // nominally in [-1, 1]
  int sample_rate = 16000;
};

// Log-mel frontend. Defaults reproduce the Whisper recipe: 25 ms periodic
// Hann window, 10 ms hop, 80 Slaney mel bands, log10 with a 1e-10 power
// floor, an 8-decade dynamic range clamp below the utterance maximum, then
// (x + 4) / 4.
struct FrontendConfig {
  int sample_rate = 16000;
  int window_length = 400;
  int hop_length = 160;
  int n_fft = 400;
  int n_mels = 80;
  double log_floor = 1e-10;
  double dynamic_range = 8.0;
  double normalization_offset = 4.0;
  double normalization_scale = 4.0;

  // Throws ConfigError.
  void validate() const;
  // Normalized value of an all-zero input frame.
  double silence_value() const;
  double frame_hop_seconds() const {
    return static_cast<double>(hop_length) / sample_rate;
  }
  bool operator==(const FrontendConfig&) const = default;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; the result is validated.
  static FrontendConfig from_json(const nlohmann::json& j);
};

// Stored as [n_mels x T]: column t is frame t, so memory is frame-major
// (the T x n_mels row-major layout used by the feature file format).
struct MelSpectrogram {
  Matrix values;
  double frame_hop = 0.01;

  int n_frames() const { return static_cast<int>(values.cols()); }
  int n_mels() const { return static_cast<int>(values.rows()); }
  bool operator==(const MelSpectrogram& o) const {
    return values.rows() == o.values.rows() && values.cols() == o.values.cols() &&
           values == o.values;
  }
};

// T = floor(len / hop) frames; reflect padding of n_fft / 2 on both ends.
MelSpectrogram compute_logmel(const Waveform& w, const FrontendConfig& cfg);

// Pads with the silence value or drops trailing frames.
MelSpectrogram pad_or_trim(const MelSpectrogram& m, int target_frames,
                           const FrontendConfig& cfg);

// Slaney-scale helpers.
double hz_to_mel(double hz);
double mel_to_hz(double mel);
// [n_mels x (n_fft / 2 + 1)], area-normalized triangles between 0 and Nyquist.
Matrix mel_filterbank(const FrontendConfig& cfg);

// Feature file: 16-byte header ("MELF", u32 version, u32 T, u32 n_mels)
// followed by T * n_mels little-endian float32 values, frame-major.
std::string encode_mel(const MelSpectrogram& m);
MelSpectrogram decode_mel(const std::string& bytes, const std::string& origin,
                          double frame_hop = 0.01);
void write_mel(const std::filesystem::path& path, const MelSpectrogram& m);
MelSpectrogram read_mel(const std::filesystem::path& path, double frame_hop = 0.01);

}  // namespace plcadapt

#endif  // PLCADAPT_FEATURES_H_

// include/plcadapt/adapter.h

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

#ifndef PLCADAPT_ADAPTER_H_
#define PLCADAPT_ADAPTER_H_

// Convolutional U-net mapping a corrupted log-mel spectrogram to an adapted
// one of identical shape. Max-pool downsampling, nearest-neighbour resize
// followed by a convolution for upsampling, a residual-block bottleneck and
// concatenated skips at every resolution.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcadapt/features.h"
#include "plcadapt/param_set.h"

namespace plcadapt {

struct AdapterConfig {
  int n_mels = 80;
  int n_levels = 3;
  int base_channels = 52;
  std::vector<int> channel_multipliers = {1, 2, 4};
  int n_bottleneck_blocks = 6;
  int kernel_size = 3;
  int convs_per_level = 2;
  // Adds the (padded) input to the output convolution.
  bool global_residual = false;
  // Value used to pad ragged inputs up to a multiple of 2^n_levels.
  double pad_value = -1.5;

  void validate() const;
  int channels(int level) const { return base_channels * channel_multipliers[static_cast<size_t>(level)]; }
  nlohmann::json to_json() const;
  static AdapterConfig from_json(const nlohmann::json& j);
  bool operator==(const AdapterConfig&) const = default;
};

struct AdapterParams {
  AdapterConfig config;
  ParamSet params;
  uint64_t seed = 0;
};

size_t count_params(const AdapterConfig& cfg);

AdapterParams init_adapter(const AdapterConfig& cfg, uint64_t seed);

// Differentiable forward. `input` is [1 x (frames * n_mels)], frame-major.
ag::Var adapter_forward(const AdapterParams& p, ParamBinding& binding, const ag::Var& input,
                        int frames);

// Inference without gradient recording.
MelSpectrogram adapt(const AdapterParams& p, const MelSpectrogram& m);

// Frame radius outside of which a change in one input frame cannot reach the
// output (a conservative bound computed from the layer plan).
int receptive_radius_frames(const AdapterConfig& cfg);

// [1 x (T * n_mels)] view of a spectrogram, and back.
ag::Matrix as_image(const MelSpectrogram& m);
MelSpectrogram from_image(const ag::Matrix& image, int frames, int n_mels, double frame_hop);

void save_adapter(const std::filesystem::path& path, const AdapterParams& p,
                  const nlohmann::json& provenance,
                  const std::map<std::string, Matrix>& extra_tensors = {});
struct LoadedAdapter {
  AdapterParams adapter;
  nlohmann::json provenance;
  std::map<std::string, Matrix> extra_tensors;
};
LoadedAdapter load_adapter(const std::filesystem::path& path);

}  // namespace plcadapt

#endif  // PLCADAPT_ADAPTER_H_

// include/plcadapt/audio_io.h

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

#ifndef PLCADAPT_AUDIO_IO_H_
#define PLCADAPT_AUDIO_IO_H_

#include <filesystem>
#include <string>

#include "plcadapt/features.h"

namespace plcadapt {

// Decodes RIFF/WAVE (8/16/24/32-bit integer PCM, 32/64-bit float) or FLAC,
// chosen by the file's magic bytes. Multi-channel input is averaged to mono.
Waveform read_audio(const std::filesystem::path& path);
Waveform decode_wav(const std::string& bytes, const std::string& origin);
Waveform decode_flac(const std::string& bytes, const std::string& origin);

// 16-bit PCM mono; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& w);
std::string encode_wav(const Waveform& w);

}  // namespace plcadapt

#endif  // PLCADAPT_AUDIO_IO_H_

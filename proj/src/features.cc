// src/features.cc

// Copyright 2026  The plcadapt Authors
//
// See ../LICENSE for clarification regarding multiple authors
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

#include "plcadapt/features.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "plcadapt/errors.h"
#include "plcadapt/io_util.h"

namespace plcadapt {

namespace {

constexpr double kMinLogHz = 1000.0;
constexpr double kLinearHzPerMel = 200.0 / 3.0;
constexpr double kMinLogMel = kMinLogHz / kLinearHzPerMel;

// Mirror index into [0, n) without repeating the edge sample.
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

void FrontendConfig::validate() const {
  if (sample_rate <= 0 || window_length <= 0 || hop_length <= 0 || n_fft <= 0 ||
      n_mels <= 0) {
    throw ConfigError("frontend: all counts must be positive");
  }
  if (hop_length > window_length || window_length > n_fft) {
    throw ConfigError("frontend: require hop_length <= window_length <= n_fft");
  }
  if (!(log_floor > 0.0) || !(dynamic_range > 0.0) || normalization_scale == 0.0) {
    throw ConfigError("frontend: log_floor and dynamic_range must be positive");
  }
}

double FrontendConfig::silence_value() const {
  return (std::log10(log_floor) + normalization_offset) / normalization_scale;
}

double hz_to_mel(double hz) {
  if (hz < kMinLogHz) return hz / kLinearHzPerMel;
  return kMinLogMel + std::log(hz / kMinLogHz) / (std::log(6.4) / 27.0);
}

double mel_to_hz(double mel) {
  if (mel < kMinLogMel) return mel * kLinearHzPerMel;
  return kMinLogHz * std::exp((mel - kMinLogMel) * (std::log(6.4) / 27.0));
}

Matrix mel_filterbank(const FrontendConfig& cfg) {
  const int n_bins = cfg.n_fft / 2 + 1;
  const double nyquist = cfg.sample_rate / 2.0;
  std::vector<double> fft_freqs(static_cast<size_t>(n_bins));
  for (int k = 0; k < n_bins; ++k) fft_freqs[k] = nyquist * k / (n_bins - 1);
  const double mel_hi = hz_to_mel(nyquist);
  std::vector<double> edges(static_cast<size_t>(cfg.n_mels + 2));
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_hi * i / (cfg.n_mels + 1));
  }
  Matrix fb = Matrix::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    const double norm = 2.0 / (hi - lo);
    for (int k = 0; k < n_bins; ++k) {
      const double up = (fft_freqs[k] - lo) / (mid - lo);
      const double down = (hi - fft_freqs[k]) / (hi - mid);
      fb(m, k) = std::max(0.0, std::min(up, down)) * norm;
    }
  }
  return fb;
}

MelSpectrogram compute_logmel(const Waveform& w, const FrontendConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate) {
    throw ConfigError("sample rate " + std::to_string(w.sample_rate) +
                      " Hz does not match frontend rate " +
                      std::to_string(cfg.sample_rate) + " Hz (resampling unsupported)");
  }
  if (w.samples.empty()) throw DataError("empty waveform");
  for (double s : w.samples) {
    if (!std::isfinite(s)) throw DataError("waveform contains non-finite samples");
  }
  const int64_t len = static_cast<int64_t>(w.samples.size());
  const int frames = static_cast<int>(len / cfg.hop_length);
  if (frames == 0) throw DataError("waveform shorter than one hop");

  // Periodic Hann window centered in the FFT frame.
  std::vector<double> window(static_cast<size_t>(cfg.n_fft), 0.0);
  const int win_off = (cfg.n_fft - cfg.window_length) / 2;
  for (int n = 0; n < cfg.window_length; ++n) {
    window[win_off + n] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / cfg.window_length);
  }

  const int64_t pad = cfg.n_fft / 2;
  Matrix framed(cfg.n_fft, frames);
  for (int t = 0; t < frames; ++t) {
    const int64_t start = static_cast<int64_t>(t) * cfg.hop_length - pad;
    for (int n = 0; n < cfg.n_fft; ++n) {
      framed(n, t) = window[n] * w.samples[reflect_index(start + n, len)];
    }
  }

  const int n_bins = cfg.n_fft / 2 + 1;
  Matrix cos_basis(n_bins, cfg.n_fft);
  Matrix sin_basis(n_bins, cfg.n_fft);
  for (int k = 0; k < n_bins; ++k) {
    for (int n = 0; n < cfg.n_fft; ++n) {
      // Reduce k*n mod N first so the phase stays exact for large products.
      const double phase =
          2.0 * std::numbers::pi * static_cast<double>((int64_t{k} * n) % cfg.n_fft) / cfg.n_fft;
      cos_basis(k, n) = std::cos(phase);
      sin_basis(k, n) = std::sin(phase);
    }
  }
  const Matrix re = cos_basis * framed;
  const Matrix im = sin_basis * framed;
  const Matrix power = re.cwiseAbs2() + im.cwiseAbs2();

  Matrix logmel = mel_filterbank(cfg) * power;
  logmel = logmel.cwiseMax(cfg.log_floor).array().log10().matrix();
  const double ceiling = logmel.maxCoeff();
  logmel = logmel.cwiseMax(ceiling - cfg.dynamic_range);
  logmel = ((logmel.array() + cfg.normalization_offset) / cfg.normalization_scale).matrix();
  return MelSpectrogram{std::move(logmel), cfg.frame_hop_seconds()};
}

MelSpectrogram pad_or_trim(const MelSpectrogram& m, int target_frames,
                           const FrontendConfig& cfg) {
  if (target_frames <= 0) throw ConfigError("pad_or_trim: target_frames must be positive");
  MelSpectrogram out{Matrix::Constant(m.n_mels(), target_frames, cfg.silence_value()),
                     m.frame_hop};
  const int keep = std::min(target_frames, m.n_frames());
  out.values.leftCols(keep) = m.values.leftCols(keep);
  return out;
}

std::string encode_mel(const MelSpectrogram& m) {
  std::string out = "MELF";
  put_u32(out, 1);
  put_u32(out, static_cast<uint32_t>(m.n_frames()));
  put_u32(out, static_cast<uint32_t>(m.n_mels()));
  out.reserve(out.size() + static_cast<size_t>(m.values.size()) * 4);
  const double* p = m.values.data();
  for (Eigen::Index i = 0; i < m.values.size(); ++i) put_f32(out, static_cast<float>(p[i]));
  return out;
}

MelSpectrogram decode_mel(const std::string& bytes, const std::string& origin,
                          double frame_hop) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "MELF") != 0) {
    throw DataError("not a feature file: " + origin);
  }
  if (get_u32(bytes.data() + 4) != 1) throw DataError("unsupported feature file version: " + origin);
  const uint32_t frames = get_u32(bytes.data() + 8);
  const uint32_t mels = get_u32(bytes.data() + 12);
  if (bytes.size() != 16 + static_cast<size_t>(frames) * mels * 4) {
    throw DataError("feature file size does not match its header: " + origin);
  }
  MelSpectrogram m{Matrix(mels, frames), frame_hop};
  const char* p = bytes.data() + 16;
  double* d = m.values.data();
  for (size_t i = 0; i < static_cast<size_t>(frames) * mels; ++i, p += 4) d[i] = get_f32(p);
  return m;
}

void write_mel(const std::filesystem::path& path, const MelSpectrogram& m) {
  write_file_atomic(path, encode_mel(m));
}

MelSpectrogram read_mel(const std::filesystem::path& path, double frame_hop) {
  return decode_mel(read_file(path), path.string(), frame_hop);
}

nlohmann::json FrontendConfig::to_json() const {
  return {{"sample_rate", sample_rate},
          {"window_length", window_length},
          {"hop_length", hop_length},
          {"n_fft", n_fft},
          {"n_mels", n_mels},
          {"log_floor", log_floor},
          {"dynamic_range", dynamic_range},
          {"normalization_offset", normalization_offset},
          {"normalization_scale", normalization_scale}};
}

FrontendConfig FrontendConfig::from_json(const nlohmann::json& j) {
  FrontendConfig c;
  try {
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.window_length = j.value("window_length", c.window_length);
    c.hop_length = j.value("hop_length", c.hop_length);
    c.n_fft = j.value("n_fft", c.n_fft);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.log_floor = j.value("log_floor", c.log_floor);
    c.dynamic_range = j.value("dynamic_range", c.dynamic_range);
    c.normalization_offset = j.value("normalization_offset", c.normalization_offset);
    c.normalization_scale = j.value("normalization_scale", c.normalization_scale);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("frontend: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace plcadapt

// src/synth.cc

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

#include "plcadapt/synth.h"

#include <array>
#include <cmath>
#include <numbers>

#include "plcadapt/audio_io.h"
#include "plcadapt/errors.h"
#include "plcadapt/rng.h"

namespace plcadapt {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 10> kDigits = {"zero", "one", "two",   "three", "four",
                                                 "five", "six", "seven", "eight", "nine"};

struct LetterVoice {
  std::array<double, 3> freq;
  std::array<double, 3> gain;
};

// Fixed per-letter partials spread over the low, middle and high bands.
const std::array<LetterVoice, 26>& alphabet() {
  static const std::array<LetterVoice, 26> table = [] {
    std::array<LetterVoice, 26> t{};
    Rng rng(0x5eed1e77e25ULL);
    for (auto& v : t) {
      v.freq = {rng.uniform(250.0, 900.0), rng.uniform(1000.0, 2600.0),
                rng.uniform(2800.0, 6500.0)};
      v.gain = {rng.uniform(0.4, 1.0), rng.uniform(0.3, 1.0), rng.uniform(0.2, 0.8)};
    }
    return t;
  }();
  return table;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_utterances < 0 || min_words < 1 || max_words < min_words || sample_rate < 8000 ||
      noise_level < 0.0) {
    throw ConfigError("synth: invalid configuration");
  }
}

SynthUtterance synth_utterance(const SynthConfig& cfg, int index) {
  cfg.validate();
  char idbuf[64];
  std::snprintf(idbuf, sizeof(idbuf), "%s_%05d", cfg.id_prefix.c_str(), index);
  SynthUtterance u;
  u.id = idbuf;
  Rng rng(derive_seed(cfg.seed, u.id));

  const int n_words =
      cfg.min_words + static_cast<int>(rng.below(static_cast<uint64_t>(cfg.max_words - cfg.min_words + 1)));
  std::vector<std::string> words;
  for (int i = 0; i < n_words; ++i) words.push_back(kDigits[rng.below(kDigits.size())]);
  for (size_t i = 0; i < words.size(); ++i) u.transcript += (i ? " " : "") + words[i];

  const double sr = cfg.sample_rate;
  const double rate = rng.uniform(0.85, 1.15);   // speaking-rate factor
  const double pitch = rng.uniform(0.95, 1.05);  // partial scaling
  const double loud = rng.uniform(0.5, 1.0);
  std::vector<double>& x = u.audio.samples;
  u.audio.sample_rate = cfg.sample_rate;

  auto silence = [&](double seconds) { x.resize(x.size() + static_cast<size_t>(seconds * sr), 0.0); };
  silence(rng.uniform(0.05, 0.12));
  for (size_t w = 0; w < words.size(); ++w) {
    if (w) silence(rng.uniform(0.04, 0.10));
    for (char c : words[w]) {
      const LetterVoice& v = alphabet()[static_cast<size_t>(c - 'a')];
      const size_t len = static_cast<size_t>(rng.uniform(0.055, 0.085) * rate * sr);
      const size_t ramp = static_cast<size_t>(0.008 * sr);
      std::array<double, 3> phase{rng.uniform(0.0, 2 * std::numbers::pi),
                                  rng.uniform(0.0, 2 * std::numbers::pi),
                                  rng.uniform(0.0, 2 * std::numbers::pi)};
      const size_t base = x.size();
      x.resize(base + len, 0.0);
      for (size_t n = 0; n < len; ++n) {
        double env = 1.0;
        if (n < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * n / ramp);
        if (len - n < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (len - n) / ramp));
        double s = 0.0;
        for (int k = 0; k < 3; ++k) {
          s += v.gain[k] * std::sin(2 * std::numbers::pi * v.freq[k] * pitch * n / sr + phase[k]);
        }
        x[base + n] = 0.12 * loud * env * s;
      }
    }
  }
  silence(rng.uniform(0.05, 0.12));
  for (double& s : x) s += cfg.noise_level * rng.normal();
  return u;
}

DatasetManifest write_synthetic_corpus(const fs::path& dir, const SynthConfig& cfg) {
  cfg.validate();
  const fs::path audio_dir = dir / "audio";
  fs::create_directories(audio_dir);
  DatasetManifest m;
  m.id = dir.filename().string();
  for (int i = 0; i < cfg.n_utterances; ++i) {
    SynthUtterance u = synth_utterance(cfg, i);
    const fs::path wav = audio_dir / (u.id + ".wav");
    write_wav(wav, u.audio);
    ManifestRow r;
    r.utterance_id = u.id;
    r.audio_path = fs::absolute(wav).string();
    r.transcript = u.transcript;
    r.language = cfg.language;
    r.duration_s = static_cast<double>(u.audio.samples.size()) / cfg.sample_rate;
    m.rows.push_back(std::move(r));
  }
  // Paths are stored relative to the manifest so the corpus can be moved.
  DatasetManifest rel = m;
  for (auto& r : rel.rows) r.audio_path = fs::path("audio") / fs::path(r.audio_path).filename();
  write_manifest(dir / "manifest.jsonl", rel);
  return m;
}

}  // namespace plcadapt

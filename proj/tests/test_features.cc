// tests/test_features.cc

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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "plcadapt/audio_io.h"
#include "plcadapt/errors.h"
#include "plcadapt/features.h"
#include "test_support.h"

namespace plcadapt {
namespace {

using testing::TempDir;

Waveform tone(double hz, double seconds, double amp = 0.5) {
  Waveform w;
  const int n = static_cast<int>(seconds * w.sample_rate);
  for (int i = 0; i < n; ++i) w.samples.push_back(amp * std::sin(2 * std::numbers::pi * hz * i / w.sample_rate));
  return w;
}

// Slaney mel scale coded from its definition: linear at 200/3 Hz per mel up
// to 1 kHz, logarithmic with 27 mels per factor 6.4 above.
double slaney_mel(double hz) {
  const double f_sp = 200.0 / 3.0;
  if (hz < 1000.0) return hz / f_sp;
  return 1000.0 / f_sp + std::log(hz / 1000.0) / (std::log(6.4) / 27.0);
}

double slaney_hz(double mel) {
  const double f_sp = 200.0 / 3.0;
  const double knee = 1000.0 / f_sp;
  if (mel < knee) return mel * f_sp;
  return 1000.0 * std::exp((mel - knee) * std::log(6.4) / 27.0);
}

TEST(Features, DigitalSilenceMapsToFloorValue) {
  Waveform w;
  w.samples.assign(16000, 0.0);
  const MelSpectrogram m = compute_logmel(w, {});
  ASSERT_EQ(m.n_frames(), 100);
  ASSERT_EQ(m.n_mels(), 80);
  for (Eigen::Index i = 0; i < m.values.size(); ++i) EXPECT_DOUBLE_EQ(m.values.data()[i], -1.5);
  EXPECT_DOUBLE_EQ(FrontendConfig{}.silence_value(), -1.5);
}

TEST(Features, FrameCountFollowsHop) {
  Waveform w = tone(300, 30.0, 0.1);
  EXPECT_EQ(compute_logmel(w, {}).n_frames(), 3000);
  w.samples.resize(16000 + 159);
  EXPECT_EQ(compute_logmel(w, {}).n_frames(), 100);
  w.samples.resize(160);
  EXPECT_EQ(compute_logmel(w, {}).n_frames(), 1);
}

TEST(Features, ToneLandsInNearestMelBand) {
  const MelSpectrogram m = compute_logmel(tone(440.0, 0.5), {});
  // Reference band centres: n_mels + 2 equally spaced mel points over [0, 8 kHz].
  const double top = slaney_mel(8000.0);
  int expected = -1;
  double best = 1e9;
  for (int b = 0; b < 80; ++b) {
    const double centre = slaney_hz(top * (b + 1) / 81.0);
    if (std::abs(centre - 440.0) < best) {
      best = std::abs(centre - 440.0);
      expected = b;
    }
  }
  for (int t = 2; t < m.n_frames() - 2; ++t) {
    Eigen::Index arg;
    m.values.col(t).maxCoeff(&arg);
    EXPECT_EQ(arg, expected) << "frame " << t;
  }
}

TEST(Features, FilterbankMatchesIndependentSlaneyTriangles) {
  const FrontendConfig cfg;
  const Matrix fb = mel_filterbank(cfg);
  ASSERT_EQ(fb.rows(), 80);
  ASSERT_EQ(fb.cols(), 201);
  const double top = slaney_mel(8000.0);
  for (int b = 0; b < 80; b += 7) {
    const double lo = slaney_hz(top * b / 81.0);
    const double mid = slaney_hz(top * (b + 1) / 81.0);
    const double hi = slaney_hz(top * (b + 2) / 81.0);
    for (int k = 0; k < 201; ++k) {
      const double f = k * 8000.0 / 200.0;
      const double tri = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
      EXPECT_NEAR(fb(b, k), tri * 2.0 / (hi - lo), 1e-12) << "band " << b << " bin " << k;
    }
  }
}

TEST(Features, Deterministic) {
  const Waveform w = tone(1000, 0.3);
  EXPECT_TRUE(compute_logmel(w, {}) == compute_logmel(w, {}));
}

TEST(Features, ValuesStayInNormalizedRange) {
  const MelSpectrogram m = compute_logmel(tone(2000, 0.4, 0.9), {});
  // 8 decades of dynamic range divided by the scale of 4.
  EXPECT_LE(m.values.maxCoeff() - m.values.minCoeff(), 2.0 + 1e-12);
  EXPECT_TRUE(m.values.allFinite());
}

TEST(Features, RejectsBadInput) {
  Waveform w = tone(300, 0.1);
  w.sample_rate = 8000;
  EXPECT_THROW(compute_logmel(w, {}), ConfigError);
  Waveform empty;
  EXPECT_THROW(compute_logmel(empty, {}), DataError);
  Waveform nan = tone(300, 0.1);
  nan.samples[5] = std::nan("");
  EXPECT_THROW(compute_logmel(nan, {}), DataError);
  FrontendConfig bad;
  bad.hop_length = 500;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Features, PadOrTrim) {
  const FrontendConfig cfg;
  const MelSpectrogram m = compute_logmel(tone(500, 1.0), cfg);
  EXPECT_TRUE(pad_or_trim(m, 100, cfg) == m);
  const MelSpectrogram longer = pad_or_trim(m, 200, cfg);
  ASSERT_EQ(longer.n_frames(), 200);
  EXPECT_TRUE(longer.values.leftCols(100) == m.values);
  EXPECT_TRUE((longer.values.rightCols(100).array() == -1.5).all());
  const MelSpectrogram shorter = pad_or_trim(m, 40, cfg);
  EXPECT_TRUE(shorter.values == m.values.leftCols(40));
  EXPECT_TRUE(pad_or_trim(longer, 100, cfg) == m);
}

TEST(Features, MelFileRoundTrip) {
  TempDir dir("mel");
  const MelSpectrogram m = compute_logmel(tone(700, 0.25), {});
  write_mel(dir / "a.mel", m);
  const MelSpectrogram back = read_mel(dir / "a.mel");
  ASSERT_EQ(back.n_frames(), m.n_frames());
  EXPECT_TRUE(back.values.isApprox(m.values.cast<float>().cast<double>(), 0.0));
  const std::string bytes = encode_mel(m);
  EXPECT_EQ(bytes.substr(0, 4), "MELF");
  EXPECT_EQ(bytes.size(), 16u + 4u * m.values.size());
  EXPECT_THROW(decode_mel(bytes.substr(0, 20), "trunc"), DataError);
  EXPECT_THROW(decode_mel("XXXX" + bytes.substr(4), "magic"), DataError);
}

TEST(AudioIo, FlacMatchesWavTwin) {
  for (const char* name : {"mono16", "stereo16", "mono24"}) {
    const Waveform f = read_audio(testing::data_path(std::string(name) + ".flac"));
    const Waveform w = read_audio(testing::data_path(std::string(name) + ".wav"));
    ASSERT_EQ(f.samples.size(), w.samples.size()) << name;
    EXPECT_EQ(f.sample_rate, 16000);
    for (size_t i = 0; i < f.samples.size(); ++i) ASSERT_EQ(f.samples[i], w.samples[i]) << name << " @" << i;
  }
}

TEST(AudioIo, ConstantSubframesAndFloatWav) {
  const Waveform s = read_audio(testing::data_path("silence16.flac"));
  ASSERT_EQ(s.samples.size(), 4000u);
  for (double v : s.samples) EXPECT_EQ(v, 0.0);
  const Waveform f = read_audio(testing::data_path("float32.wav"));
  const Waveform i16 = read_audio(testing::data_path("mono16.wav"));
  ASSERT_EQ(f.samples.size(), i16.samples.size());
  for (size_t i = 0; i < f.samples.size(); ++i) EXPECT_NEAR(f.samples[i], i16.samples[i], 1.0 / 32768);
}

TEST(AudioIo, WavRoundTripAndErrors) {
  TempDir dir("wav");
  const Waveform w = tone(440, 0.1, 0.25);
  write_wav(dir / "x.wav", w);
  const Waveform back = read_audio(dir / "x.wav");
  ASSERT_EQ(back.samples.size(), w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i) EXPECT_NEAR(back.samples[i], w.samples[i], 1.0 / 32767);
  EXPECT_THROW(decode_wav("RIFF", "short"), DataError);
  EXPECT_THROW(read_audio(dir / "missing.wav"), DataError);
  EXPECT_EQ(read_audio(testing::data_path("rate8k.wav")).sample_rate, 8000);
}

}  // namespace
}  // namespace plcadapt

// tests/test_corruption.cc

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
#include <set>

#include "plcadapt/corruption.h"
#include "plcadapt/errors.h"
#include "plcadapt/synth.h"
#include "test_support.h"

namespace plcadapt {
namespace {

using testing::TempDir;

TEST(Corruption, RealizedRateMatchesTargetOnLongUtterances) {
  const SpanDistribution spans;  // geometric, mean 4
  for (double plr : {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) {
    double span_total = 0.0;
    int span_count = 0;
    for (int k = 0; k < 100; ++k) {
      const LossMask m = sample_loss_mask(3000, plr, spans, 7, "utt" + std::to_string(k));
      m.validate();
      EXPECT_NEAR(realized_plr(m), plr, 1e-3) << plr;
      for (const auto& s : m.spans) span_total += s.length;
      span_count += static_cast<int>(m.spans.size());
    }
    // Merges to make room for separators lengthen spans at high rates.
    if (plr <= 0.5) EXPECT_NEAR(span_total / span_count, spans.mean, 0.1 * spans.mean) << plr;
  }
}

TEST(Corruption, MasksAreDeterministicPerUtterance) {
  const SpanDistribution spans;
  const LossMask a = sample_loss_mask(500, 0.3, spans, 1, "x");
  EXPECT_TRUE(a == sample_loss_mask(500, 0.3, spans, 1, "x"));
  EXPECT_FALSE(a == sample_loss_mask(500, 0.3, spans, 1, "y"));
  EXPECT_FALSE(a == sample_loss_mask(500, 0.3, spans, 2, "x"));
}

TEST(Corruption, SpanInvariantsHoldAtExtremeRates) {
  const SpanDistribution spans = SpanDistribution::parse("constant(1)");
  for (int t : {1, 2, 3, 10, 57}) {
    for (double plr : {0.0, 0.3, 0.5, 0.95}) {
      const LossMask m = sample_loss_mask(t, plr, spans, 3, "u");
      m.validate();
      int lost = 0;
      for (const auto& s : m.spans) lost += s.length;
      EXPECT_EQ(lost, static_cast<int>(std::lround(plr * t))) << t << " " << plr;
    }
  }
}

TEST(Corruption, InfeasibleWhenShorterThanMinimumSpan) {
  const LossMask m = sample_loss_mask(2, 0.5, SpanDistribution::parse("constant(3)"), 0, "u");
  EXPECT_TRUE(m.infeasible);
  EXPECT_TRUE(m.spans.empty());
}

TEST(Corruption, ExpandAndFromFlagsRoundTrip) {
  const LossMask m = sample_loss_mask(200, 0.4, SpanDistribution{}, 5, "r");
  const std::vector<bool> flags = m.expand();
  ASSERT_EQ(flags.size(), 200u);
  EXPECT_TRUE(LossMask::from_flags(flags) == m);
  LossMask bad;
  bad.total_frames = 10;
  bad.spans = {{0, 2}, {2, 3}};
  EXPECT_THROW(bad.validate(), DataError);
  bad.spans = {{8, 3}};
  EXPECT_THROW(bad.validate(), DataError);
}

TEST(Corruption, SpanLawParsing) {
  EXPECT_EQ(SpanDistribution::parse("geometric(mean=4,max=50)").describe(), "geometric(mean=4,max=50)");
  EXPECT_EQ(SpanDistribution::parse("uniform(2,6)").describe(), "uniform(2,6)");
  EXPECT_DOUBLE_EQ(SpanDistribution::parse("uniform(2,6)").expected_mean(), 4.0);
  EXPECT_THROW(SpanDistribution::parse("poisson(3)"), ConfigError);
  EXPECT_THROW(SpanDistribution::parse("uniform(5,2)"), ConfigError);
  // Truncated geometric mean, summed directly.
  double num = 0, den = 0;
  for (int j = 1; j <= 5; ++j) {
    const double w = std::pow(0.5, j);
    num += j * w;
    den += w;
  }
  SpanDistribution g = SpanDistribution::parse("geometric(mean=2,max=5)");
  EXPECT_NEAR(g.expected_mean(), num / den, 1e-12);
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const int j = g.sample(rng);
    EXPECT_GE(j, 1);
    EXPECT_LE(j, 5);
  }
}

TEST(Corruption, ZeroFillTouchesOnlyLostFrames) {
  MelSpectrogram m{ag::Matrix::Constant(4, 30, 0.7), 0.01};
  const LossMask mask = sample_loss_mask(30, 0.3, SpanDistribution{}, 1, "z");
  const MelSpectrogram out = apply_mask(m, mask);
  const auto flags = mask.expand();
  for (int t = 0; t < 30; ++t) {
    for (int b = 0; b < 4; ++b) EXPECT_EQ(out.values(b, t), flags[static_cast<size_t>(t)] ? 0.0 : 0.7);
  }
  LossMask wrong;
  wrong.total_frames = 29;
  EXPECT_THROW(apply_mask(m, wrong), DataError);
}

TEST(Corruption, ConfigValidation) {
  CorruptionConfig c;
  c.validate();
  c.plr_target = 0.99;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(PlrDistribution::parse("uniform(0,1.2)"), ConfigError);
  EXPECT_THROW(sample_loss_mask(10, -0.1, SpanDistribution{}, 0, "u"), ConfigError);
}

TEST(Corruption, OnTheFlyRateIsDrawnPerUtterance) {
  CorruptionConfig c;
  c.plr_distribution = PlrDistribution::parse("uniform(0.1,0.5)");
  std::set<int> lost_counts;
  for (int k = 0; k < 20; ++k) {
    const LossMask m = sample_loss_mask(1000, c, "u" + std::to_string(k));
    const double r = realized_plr(m);
    EXPECT_GE(r, 0.1 - 1e-3);
    EXPECT_LE(r, 0.5 + 1e-3);
    lost_counts.insert(static_cast<int>(std::lround(r * 1000)));
  }
  EXPECT_GT(lost_counts.size(), 10u);
}

TEST(Corruption, MaskJsonRoundTrip) {
  TempDir dir("mask");
  const LossMask m = sample_loss_mask(120, 0.2, SpanDistribution{}, 4, "id1");
  const auto j = mask_to_json(m, "id1", 4, {{"note", "x"}});
  EXPECT_EQ(j["T"], 120);
  EXPECT_EQ(j["note"], "x");
  EXPECT_TRUE(mask_from_json(j) == m);
  EXPECT_EQ(mask_hash(m), mask_hash(mask_from_json(j)));
  EXPECT_THROW(mask_from_json(nlohmann::json{{"T", 3}}), DataError);
}

TEST(Corruption, FixedRateTestsetIsReproducible) {
  TempDir dir("fixed");
  SynthConfig sc;
  sc.n_utterances = 4;
  sc.seed = 3;
  const DatasetManifest clean = write_synthetic_corpus(dir / "corpus", sc);
  CorruptionConfig cc;
  cc.seed = 42;
  FixedPlrOptions opt;
  opt.out_dir = dir / "a";
  const auto copies = build_fixed_plr_testset(clean, {0.0, 0.3}, cc, opt);
  ASSERT_EQ(copies.size(), 2u);
  opt.out_dir = dir / "b";
  const auto again = build_fixed_plr_testset(clean, {0.0, 0.3}, cc, opt);
  for (size_t r = 0; r < 2; ++r) {
    ASSERT_EQ(copies[r].manifest.rows.size(), 4u);
    for (size_t i = 0; i < 4; ++i) {
      const auto& a = copies[r].manifest.rows[i];
      const auto& b = again[r].manifest.rows[i];
      EXPECT_TRUE(read_mask(*a.mask_path) == read_mask(*b.mask_path));
      EXPECT_TRUE(read_mel(*a.features_path) == read_mel(*b.features_path));
    }
  }
  // The zero-rate copy keeps the clean features up to float32 storage.
  const auto& row = copies[0].manifest.rows[0];
  EXPECT_TRUE(read_mask(*row.mask_path).spans.empty());
  EXPECT_EQ(*row.realized_plr, 0.0);
  EXPECT_THROW(build_fixed_plr_testset(clean, {0.2, 0.2}, cc, opt), ConfigError);
}

}  // namespace
}  // namespace plcadapt

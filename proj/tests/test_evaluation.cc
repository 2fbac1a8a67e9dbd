// tests/test_evaluation.cc

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

#include <algorithm>
#include <functional>

#include "plcadapt/evaluation.h"
#include "plcadapt/io_util.h"
#include "plcadapt/synth.h"
#include "test_support.h"

namespace plcadapt {
namespace {

using testing::TempDir;

// Plain recursion over the three edit operations, no table.
int brute_force_distance(const std::vector<std::string>& a, size_t i, const std::vector<std::string>& b,
                         size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  const int keep = brute_force_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const int del = brute_force_distance(a, i + 1, b, j) + 1;
  const int ins = brute_force_distance(a, i, b, j + 1) + 1;
  return std::min({keep, del, ins});
}

TEST(Wer, WorkedExamples) {
  WerBreakdown w = wer("the cat sat", "the cat sat");
  EXPECT_EQ(w.errors(), 0);
  EXPECT_EQ(w.reference_words, 3);
  w = wer("the cat sat", "the bat sat down");
  EXPECT_EQ(w.substitutions, 1);
  EXPECT_EQ(w.insertions, 1);
  EXPECT_EQ(w.deletions, 0);
  EXPECT_DOUBLE_EQ(w.wer(), 2.0 / 3.0);
  w = wer("one two three four", "one four");
  EXPECT_EQ(w.deletions, 2);
  EXPECT_EQ(w.substitutions, 0);
  w = wer("a b", "x y z w v");
  EXPECT_EQ(w.errors(), 5);
  EXPECT_DOUBLE_EQ(w.wer(), 2.5);
  w = wer("Hello, World!", "hello world");
  EXPECT_EQ(w.errors(), 0);
  EXPECT_EQ(wer("Don't stop", "dont stop").errors(), 0);
  EXPECT_EQ(wer("a", "A", TextNormalizer::parse("none")).substitutions, 1);
  EXPECT_THROW(wer("  ,. ", "x"), UndefinedWerError);
}

TEST(Wer, AgreesWithBruteForceOracle) {
  Rng rng(2024);
  const std::vector<std::string> words = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> ref(1 + rng.below(6)), hyp(rng.below(7));
    for (auto& w : ref) w = words[rng.below(words.size())];
    for (auto& w : hyp) w = words[rng.below(words.size())];
    const WerBreakdown b = align_words(ref, hyp);
    ASSERT_EQ(b.errors(), brute_force_distance(ref, 0, hyp, 0)) << trial;
    ASSERT_EQ(b.deletions - b.insertions, static_cast<int64_t>(ref.size()) - static_cast<int64_t>(hyp.size()));
    ASSERT_EQ(b.reference_words, static_cast<int64_t>(ref.size()));
  }
}

TEST(Wer, NormalizerIsIdempotent) {
  const TextNormalizer n;
  for (const std::string s : {"  Hello,   WORLD!! ", "it's a-ok", "\tTabs\nand newlines ", "x.y.z", ""}) {
    EXPECT_EQ(n.apply(n.apply(s)), n.apply(s)) << s;
  }
  EXPECT_EQ(n.apply("It's  A-OK."), "its a ok");
  EXPECT_EQ(TextNormalizer::parse("none").name(), "none");
  EXPECT_THROW(TextNormalizer::parse("fancy"), ConfigError);
}

TEST(Wer, CorpusAggregationPoolsCounts) {
  std::vector<UtteranceResult> rs(3);
  rs[0].breakdown = wer("a b c d", "a b c d");
  rs[1].breakdown = wer("a b", "x");
  rs[2].undefined = true;
  const ReportRow row = aggregate("s", "d", "en", 0.2, rs);
  EXPECT_EQ(row.breakdown.reference_words, 6);
  EXPECT_EQ(row.breakdown.errors(), 2);
  EXPECT_DOUBLE_EQ(row.wer(), 2.0 / 6.0);
  EXPECT_EQ(row.utterances, 3);
  EXPECT_EQ(row.undefined, 1);
}

EvalReport sample_report() {
  EvalReport r;
  for (const char* sys : {"baseline", "adapter, \"v1\""}) {
    for (double plr : {0.0, 0.2}) {
      ReportRow row{sys, "dev", "en", plr, {1, 2, 3, 40}, 10, 0};
      r.rows.push_back(row);
    }
  }
  r.failures.push_back({"adapter", "dev", 0.4, "boom"});
  r.provenance["seed"] = 1;
  r.canonicalize();
  return r;
}

TEST(Report, CsvJsonSvg) {
  const EvalReport r = sample_report();
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "system,dataset,language,plr,wer,subs,dels,ins,ref_words,utts");
  EXPECT_NE(csv.find("\"adapter, \"\"v1\"\"\",dev,en,0.2000,0.150000,1,2,3,40,10"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(EvalReport::from_json(r.to_json()) == r);
  const std::string svg = report_svg(r, "dev");
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.find("<svg") != std::string::npos, true);
  size_t lines = 0;
  for (size_t pos = 0; (pos = svg.find("class=\"series\"", pos)) != std::string::npos; ++pos) ++lines;
  EXPECT_EQ(lines, 2u);
  EXPECT_NE(svg.find("&quot;v1&quot;"), std::string::npos);
  ASSERT_NE(r.find("baseline", "dev", 0.2), nullptr);
  EXPECT_EQ(r.find("baseline", "dev", 0.4), nullptr);

  TempDir dir("report");
  const EmittedFiles f = emit_report(r, dir.path(), "x");
  EXPECT_EQ(read_file(f.csv), csv);
  ASSERT_EQ(f.svg.size(), 1u);
  EXPECT_EQ(f.svg[0].filename(), "x_dev.svg");
  EXPECT_TRUE(EvalReport::from_json(nlohmann::json::parse(read_file(f.json))) == r);
  EXPECT_THROW(emit_report(EvalReport{}, dir.path(), "empty"), DataError);
}

class SweepTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SynthConfig sc;
    sc.n_utterances = 3;
    sc.seed = 8;
    manifest_ = write_synthetic_corpus(dir_ / "corpus", sc);
    manifest_.id = "synth";
    dataset_ = load_eval_dataset(manifest_, FrontendConfig{});
    backend_ = testing::miniature_backend("tiny-a", 80);
    AdapterConfig ac;
    ac.base_channels = 2;
    ac.n_bottleneck_blocks = 1;
    adapter_ = std::make_shared<AdapterParams>(init_adapter(ac, 1));
    baseline_.id = "baseline";
    baseline_.backend_id = "tiny-a";
    baseline_.decode.beam_size = 2;
    adapted_ = baseline_;
    adapted_.id = "adapter";
    adapted_.kind = SystemKind::kAdapter;
    adapted_.adapter = adapter_;
    adapted_.train_backend_id = "tiny-a";
    cc_.seed = 3;
    opt_.mask_dir = dir_ / "masks";
  }

  TempDir dir_{"sweep"};
  DatasetManifest manifest_;
  EvalDataset dataset_;
  std::unique_ptr<ReferenceBackend> backend_;
  std::shared_ptr<AdapterParams> adapter_;
  SystemUnderTest baseline_, adapted_;
  CorruptionConfig cc_;
  SweepOptions opt_;
};

TEST_F(SweepTest, FullCrossProduct) {
  const std::map<std::string, const AsrBackend*> backends = {{"tiny-a", backend_.get()}};
  const EvalReport r = sweep({baseline_, adapted_}, {dataset_}, {0.0, 0.2, 0.4}, cc_, backends, opt_);
  EXPECT_EQ(r.rows.size(), 6u);
  EXPECT_TRUE(r.failures.empty());
  for (const auto& row : r.rows) EXPECT_EQ(row.utterances, 3);
  EXPECT_TRUE(r.provenance["mask_sets"]["synth"].contains("plr_0.200"));
  // Rate 0 decodes the clean features untouched.
  const ReportRow* clean = r.find("baseline", "synth", 0.0);
  ASSERT_NE(clean, nullptr);
  WerBreakdown direct;
  for (size_t i = 0; i < 3; ++i) {
    DecodeConfig d = baseline_.decode;
    direct += wer(manifest_.rows[i].transcript, backend_->decode(dataset_.clean[i], d));
  }
  EXPECT_TRUE(clean->breakdown == direct);
  // Masks are persisted and reused, so a second sweep is identical.
  const EvalReport again = sweep({baseline_, adapted_}, {dataset_}, {0.0, 0.2, 0.4}, cc_, backends, opt_);
  EXPECT_TRUE(again.rows == r.rows);
}

TEST_F(SweepTest, FailuresAreRecordedPerCell) {
  const std::map<std::string, const AsrBackend*> backends = {{"tiny-a", backend_.get()}};
  SystemUnderTest broken = adapted_;
  broken.id = "broken";
  broken.adapter.reset();
  const EvalReport r = sweep({baseline_, broken}, {dataset_}, {0.0, 0.2}, cc_, backends, opt_);
  EXPECT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.failures.size(), 2u);
  EXPECT_THROW(sweep({baseline_}, {dataset_}, {0.2}, cc_, backends, opt_), ConfigError);
  EXPECT_THROW(sweep({baseline_, baseline_}, {dataset_}, {0.0}, cc_, backends, opt_), ConfigError);
}

TEST_F(SweepTest, CrossBackendSystemsAreFlagged) {
  auto other = testing::miniature_backend("tiny-b", 80, 99);
  const std::map<std::string, const AsrBackend*> backends = {{"tiny-a", backend_.get()},
                                                             {"tiny-b", other.get()}};
  SystemUnderTest bta = adapted_;
  bta.id = "adapter (BTA tiny-b)";
  bta.backend_id = "tiny-b";
  EXPECT_TRUE(bta.is_bta());
  EXPECT_FALSE(adapted_.is_bta());
  const EvalReport r = sweep({adapted_, bta}, {dataset_}, {0.0, 0.2}, cc_, backends, opt_);
  EXPECT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.provenance["backend_fingerprints"]["tiny-b"], other->fingerprint());
}

}  // namespace
}  // namespace plcadapt

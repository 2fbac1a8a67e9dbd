// tests/test_backend.cc

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

#include "plcadapt/asr_backend.h"
#include "plcadapt/errors.h"
#include "plcadapt/synth.h"
#include "test_support.h"

namespace plcadapt {
namespace {

using testing::TempDir;

MelSpectrogram random_mel(int n_mels, int frames, uint64_t seed) {
  Rng rng(seed);
  return {testing::random_matrix(rng, n_mels, frames, 0.5), 0.01};
}

TEST(Vocabulary, LayoutAndTokenize) {
  auto b = testing::miniature_backend("mini", 4);
  const Vocabulary& v = b->vocabulary();
  EXPECT_EQ(v.size(), 2 + 1 + 4);
  EXPECT_EQ(v.language_id("en"), 2);
  EXPECT_EQ(v.char_id(U' '), 3);
  EXPECT_EQ(v.char_id(U'c'), 6);
  const TokenSequence y = b->tokenize("Ab, C!", "en");
  EXPECT_EQ(y.text, "ab c");
  EXPECT_EQ(y.ids, (std::vector<int>{4, 5, 3, 6}));
  EXPECT_THROW(b->tokenize("abz", "en"), ConfigError);
  EXPECT_THROW(b->tokenize("ab", "de"), ConfigError);
  const Vocabulary back = Vocabulary::from_json(v.to_json());
  EXPECT_EQ(back.chars(), v.chars());
  EXPECT_EQ(back.languages(), v.languages());
}

TEST(Backend, UniformLogitsGiveLogVocab) {
  const ReferenceSpec spec = testing::miniature_backend_spec();
  Vocabulary vocab({"en"}, U" abc");
  ParamSet p = reference_model::init_params(spec, 4, vocab.size(), 3);
  p.at("dec.out.w").setZero();
  p.at("dec.out.b").setZero();
  FrontendConfig fe;
  fe.n_mels = 4;
  ReferenceBackend b("u", fe, spec, vocab, std::move(p));
  const double ce = b.ce_loss(random_mel(4, 6, 1), b.tokenize("ab", "en"), false).loss;
  EXPECT_NEAR(ce, std::log(static_cast<double>(vocab.size())), 1e-12);
}

TEST(Backend, ParamCountMatchesInit) {
  const ReferenceSpec spec = testing::miniature_backend_spec();
  EXPECT_EQ(reference_model::init_params(spec, 4, 7, 1).count(), reference_model::count_params(spec, 4, 7));
  ReferenceSpec big;
  EXPECT_EQ(reference_model::init_params(big, 80, 20, 1).count(), reference_model::count_params(big, 80, 20));
}

TEST(Backend, InputGradientMatchesFiniteDifferences) {
  auto b = testing::miniature_backend("mini", 4);
  MelSpectrogram m = random_mel(4, 3, 2);
  const TokenSequence y = b->tokenize("ba c", "en");
  const LossResult r = b->ce_loss(m, y, true);
  ASSERT_EQ(r.input_grad.rows(), 4);
  ASSERT_EQ(r.input_grad.cols(), 3);
  for (Eigen::Index i = 0; i < m.values.size(); ++i) {
    const double numeric = testing::central_difference(
        m.values, i, [&] { return b->ce_loss(m, y, false).loss; });
    EXPECT_LT(testing::rel_error(r.input_grad.data()[i], numeric), 1e-5) << i;
  }
}

TEST(Backend, ParameterGradientMatchesFiniteDifferences) {
  const ReferenceSpec spec = testing::miniature_backend_spec();
  Vocabulary vocab({"en"}, U" abc");
  ParamSet p = reference_model::init_params(spec, 4, vocab.size(), 5);
  const Matrix mel = random_mel(4, 5, 3).values;
  TokenSequence y{{4, 3, 5}, "en", "a b"};
  auto value = [&] {
    ag::NoGradGuard g;
    ParamBinding bind(p, false);
    return reference_model::loss(spec, vocab, bind, ag::constant_ref(mel), y, -1.5)->scalar();
  };
  ParamBinding bind(p, true);
  ag::backward(reference_model::loss(spec, vocab, bind, ag::constant_ref(mel), y, -1.5));
  const GradMap grads = bind.gradients();
  Rng rng(1);
  for (auto& [name, m] : p.tensors()) {
    for (int k = 0; k < 3; ++k) {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(m.size())));
      const double numeric = testing::central_difference(m, i, value);
      const double analytic = grads.at(name).data()[i];
      EXPECT_NEAR(analytic, numeric, 1e-6 + 1e-5 * std::abs(numeric)) << name << "[" << i << "]";
    }
  }
}

TEST(Backend, BeamOfOneEqualsGreedy) {
  auto b = testing::miniature_backend("mini", 4, 21);
  for (uint64_t s = 0; s < 5; ++s) {
    const MelSpectrogram m = random_mel(4, 10, s);
    const auto beam = reference_model::beam_search(b->spec(), b->vocabulary(), b->params(), m.values, 2, 1, 12, -1.5);
    const auto greedy = reference_model::greedy_search(b->spec(), b->vocabulary(), b->params(), m.values, 2, 12, -1.5);
    EXPECT_EQ(beam, greedy) << s;
  }
}

TEST(Backend, DecodeIsDeterministicAndBounded) {
  auto b = testing::miniature_backend("mini", 4);
  const MelSpectrogram m = random_mel(4, 8, 9);
  DecodeConfig d;
  d.max_tokens = 6;
  const std::string a = b->decode(m, d);
  EXPECT_EQ(a, b->decode(m, d));
  EXPECT_LE(a.size(), 6u);
  EXPECT_EQ(b->decode_calls(), 2u);
  d.emit_timestamps = true;
  EXPECT_THROW(b->decode(m, d), ConfigError);
  d = DecodeConfig{};
  d.language = "fr";
  EXPECT_THROW(b->decode(m, d), ConfigError);
}

TEST(Backend, InputChecks) {
  auto b = testing::miniature_backend("mini", 4);
  const TokenSequence y = b->tokenize("a", "en");
  EXPECT_THROW(b->ce_loss(random_mel(5, 3, 1), y), ConfigError);
  MelSpectrogram bad = random_mel(4, 3, 1);
  bad.values(1, 1) = std::nan("");
  EXPECT_THROW(b->ce_loss(bad, y), NumericError);
}

TEST(Backend, FingerprintTracksEveryParameter) {
  auto a = testing::miniature_backend("a", 4, 1);
  EXPECT_EQ(a->fingerprint(), testing::miniature_backend("a", 4, 1)->fingerprint());
  ParamSet p = a->params();
  const std::string before = p.fingerprint();
  for (auto& [name, m] : p.tensors()) {
    const double saved = m(0, 0);
    m(0, 0) += 1e-3;
    EXPECT_NE(p.fingerprint(), before) << name;
    m(0, 0) = saved;
  }
  EXPECT_EQ(p.fingerprint(), before);
}

TEST(Backend, SaveLoadAndRegistry) {
  TempDir dir("backend");
  ReferenceSpec spec = testing::miniature_backend_spec();
  FrontendConfig fe;
  fe.n_mels = 4;
  ParamSet p = reference_model::init_params(spec, 4, 7, 2);
  p.round_to_float32();
  ReferenceBackend b("tiny-x", fe, spec, Vocabulary({"en"}, U" abc"), std::move(p));
  b.save(dir / "b.ckpt");
  auto back = ReferenceBackend::load(dir / "b.ckpt");
  EXPECT_EQ(back->fingerprint(), b.fingerprint());
  const MelSpectrogram m = random_mel(4, 6, 3);
  EXPECT_EQ(back->decode(m, {}), b.decode(m, {}));

  BackendEntry e;
  e.id = "tiny-x";
  e.checkpoint = (dir / "b.ckpt").string();
  e.frontend = fe;
  e.expected_fingerprint = b.fingerprint();
  EXPECT_EQ(open_backend(e)->fingerprint(), b.fingerprint());
  e.expected_fingerprint = std::string(64, '0');
  EXPECT_THROW(open_backend(e), DataError);
  e.expected_fingerprint.clear();
  e.id = "other";
  EXPECT_THROW(open_backend(e), ConfigError);
  e.id = "tiny-x";
  e.frontend.n_mels = 80;
  EXPECT_THROW(open_backend(e), ConfigError);
  e.frontend = fe;
  e.kind = "external-shim";
  e.command = "true";
  e.contract_version = 2;
  EXPECT_THROW(open_backend(e), ConfigError);
}

TEST(Backend, ExternalShimMatchesInProcess) {
  TempDir dir("shim");
  auto b = testing::miniature_backend("tiny-s", 4);
  b->save(dir / "s.ckpt");
  auto loaded = ReferenceBackend::load(dir / "s.ckpt");
  const std::string command = std::string(PLCADAPT_CLI_PATH) + " shim --checkpoint " + (dir / "s.ckpt").string();
  FrontendConfig fe;
  fe.n_mels = 4;
  ExternalShimBackend shim("tiny-s", command, fe);
  EXPECT_EQ(shim.fingerprint(), loaded->fingerprint());
  const MelSpectrogram m = {random_mel(4, 5, 7).values.cast<float>().cast<double>(), 0.01};
  DecodeConfig d;
  EXPECT_EQ(shim.decode(m, d), loaded->decode(m, d));
  const LossResult in_process = loaded->ce_loss(m, loaded->tokenize("ab", "en"));
  const LossResult external = shim.ce_loss(m, shim.tokenize("ab", "en"));
  EXPECT_NEAR(external.loss, in_process.loss, 1e-6);
  EXPECT_TRUE(external.input_grad.isApprox(in_process.input_grad, 1e-5));
}

TEST(Backend, TrainsOnSyntheticDigits) {
  SynthConfig sc;
  sc.n_utterances = 24;
  sc.max_words = 2;
  sc.min_words = 1;
  sc.seed = 5;
  std::vector<Utterance> utts;
  FrontendConfig fe;
  for (int i = 0; i < sc.n_utterances; ++i) {
    SynthUtterance s = synth_utterance(sc, i);
    utts.push_back({s.id, compute_logmel(s.audio, fe), s.transcript, "en"});
  }
  ReferenceSpec spec;
  spec.encoder_channels = 16;
  spec.hidden_dim = 16;
  spec.embed_dim = 8;
  spec.epochs = 2;
  auto r = train_reference_backend("t", utts, {utts.begin(), utts.begin() + 4}, fe, spec, 0.10, 2);
  ASSERT_EQ(r.report.epoch_loss.size(), 2u);
  EXPECT_LT(r.report.epoch_loss[1], r.report.epoch_loss[0]);
  EXPECT_EQ(r.report.train_utterances, 24);
  // The frozen parameters sit on the float32 grid.
  ParamSet copy = r.backend->params();
  copy.round_to_float32();
  EXPECT_EQ(copy.fingerprint(), r.backend->fingerprint());
  for (const auto& [name, m] : copy.tensors()) EXPECT_TRUE(m == r.backend->params().at(name)) << name;
}

}  // namespace
}  // namespace plcadapt

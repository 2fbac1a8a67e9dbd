// tests/test_training.cc

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

#include "plcadapt/errors.h"
#include "plcadapt/training.h"
#include "test_support.h"

namespace plcadapt {
namespace {

using testing::TempDir;

// Backend with a closed-form objective: loss = offset + 0.5 * mean(m^2), or
// a fixed value with zero gradient when `fixed` is set.
class StubBackend : public AsrBackend {
 public:
  StubBackend(std::string id, int n_mels, std::optional<double> fixed = std::nullopt)
      : id_(std::move(id)), fixed_(fixed) {
    frontend_.n_mels = n_mels;
  }
  const std::string& id() const override { return id_; }
  std::string kind() const override { return "stub"; }
  const FrontendConfig& frontend() const override { return frontend_; }
  int vocab_size() const override { return 128; }
  TokenSequence tokenize(const std::string& text, const std::string& language) const override {
    TokenSequence y;
    y.language = language;
    y.text = text;
    for (char c : text) y.ids.push_back(c);
    return y;
  }
  LossResult ce_loss(const MelSpectrogram& m, const TokenSequence&, bool want_grad) const override {
    count_loss();
    check_input(m);
    LossResult r;
    const double n = static_cast<double>(m.values.size());
    if (fixed_) {
      r.loss = *fixed_;
      if (want_grad) r.input_grad = Matrix::Zero(m.values.rows(), m.values.cols());
    } else {
      r.loss = nan_ ? std::nan("") : 0.25 + 0.5 * m.values.squaredNorm() / n;
      if (want_grad) r.input_grad = m.values / n;
    }
    return r;
  }
  std::string decode(const MelSpectrogram&, const DecodeConfig&) const override { return ""; }
  std::string fingerprint() const override { return "stub-" + id_; }
  bool nan_ = false;

 private:
  std::string id_;
  FrontendConfig frontend_;
  std::optional<double> fixed_;
};

AdapterConfig mini_adapter() {
  AdapterConfig c;
  c.n_mels = 8;
  c.n_levels = 2;
  c.channel_multipliers = {1, 2};
  c.base_channels = 3;
  c.n_bottleneck_blocks = 1;
  c.convs_per_level = 1;
  return c;
}

MelSpectrogram random_mel(int n_mels, int frames, uint64_t seed) {
  Rng rng(seed);
  return {testing::random_matrix(rng, n_mels, frames), 0.01};
}

std::vector<Utterance> random_data(int n, int n_mels, uint64_t seed) {
  std::vector<Utterance> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({"u" + std::to_string(i), random_mel(n_mels, 12 + 3 * i, seed + i), "ab", "en"});
  }
  return out;
}

TrainConfig stub_config(const std::string& backend) {
  TrainConfig c;
  c.backend_id = backend;
  c.epochs = 2;
  c.batch_size = 2;
  c.corruption.plr_target = 0.3;
  c.corruption.seed = 5;
  return c;
}

TEST(Training, ComposeLossWithInjectedTerms) {
  StubBackend b("s", 8, 0.65);
  const AdapterParams p = init_adapter(mini_adapter(), 1);
  const MelSpectrogram clean = random_mel(8, 16, 1), corrupted = random_mel(8, 16, 2);
  const double l1 = (adapt(p, corrupted).values - clean.values).cwiseAbs().mean();
  const LossTerms t = combined_loss(b, p, clean, corrupted, b.tokenize("x", "en"), 0.1);
  EXPECT_EQ(t.ce, 0.65);
  EXPECT_NEAR(t.total, 0.1 * 0.65 + 0.9 * l1, 1e-6 * t.total);
  EXPECT_DOUBLE_EQ(compose_loss(0.1, 0.65, 0.3), 0.1 * 0.65 + 0.9 * 0.3);
  EXPECT_EQ(compose_loss(0.0, std::nan(""), 0.3), 0.3);
  EXPECT_EQ(compose_loss(1.0, 0.65, std::nan("")), 0.65);
}

TEST(Training, DifferentiableGraphMatchesForwardOnlyValue) {
  StubBackend b("s", 8);
  const AdapterParams p = init_adapter(mini_adapter(), 1);
  const MelSpectrogram clean = random_mel(8, 16, 1);
  TrainExample ex{&clean, random_mel(8, 16, 2), b.tokenize("x", "en")};
  for (double lambda : {0.0, 0.1, 1.0}) {
    ParamBinding bind(p.params, true);
    const LossGraph g = loss_graph(b, p, bind, ex, lambda);
    const LossTerms f = combined_loss(b, p, clean, ex.corrupted, ex.target, lambda);
    EXPECT_NEAR(g.terms.total, f.total, 1e-12) << lambda;
  }
}

TEST(Training, LossModesSelectLambda) {
  TrainConfig c;
  c.loss_mode = LossMode::kCeOnly;
  EXPECT_EQ(c.effective_lambda(), 1.0);
  c.loss_mode = LossMode::kL1Only;
  EXPECT_EQ(c.effective_lambda(), 0.0);
  c.loss_mode = LossMode::kCombined;
  EXPECT_EQ(c.effective_lambda(), 0.1);
  EXPECT_EQ(parse_loss_mode("ce"), LossMode::kCeOnly);
  EXPECT_EQ(parse_loss_mode("l1_only"), LossMode::kL1Only);
  EXPECT_THROW(parse_loss_mode("mse"), ConfigError);
}

TEST(Training, LearningRateDecaysGeometrically) {
  const TrainConfig c;
  for (int k = 0; k <= 20; ++k) EXPECT_EQ(lr_at_epoch(c, k), 0.0005 * std::pow(0.9, k)) << k;
}

TEST(Training, GradientMatchesFiniteDifferences) {
  StubBackend b("s", 8);
  AdapterParams p = init_adapter(mini_adapter(), 3);
  const MelSpectrogram clean = random_mel(8, 8, 4);
  std::vector<TrainExample> batch = {{&clean, random_mel(8, 8, 5), b.tokenize("x", "en")},
                                     {&clean, random_mel(8, 8, 6), b.tokenize("y", "en")}};
  const double lambda = 0.4;
  const BatchGradient bg = batch_gradient(b, p, batch, lambda);
  auto value = [&] {
    double s = 0.0;
    for (const auto& ex : batch) s += combined_loss(b, p, *ex.clean, ex.corrupted, ex.target, lambda).total;
    return s / static_cast<double>(batch.size());
  };
  Rng rng(2);
  int checked = 0;
  for (auto& [name, m] : p.params.tensors()) {
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(m.size())));
    const double numeric = testing::central_difference(m, i, value, 1e-6);
    const double analytic = bg.grads.at(name).data()[i];
    EXPECT_NEAR(analytic, numeric, 1e-7 + 1e-4 * std::abs(numeric)) << name;
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Training, L1OnlyNeverCallsBackend) {
  StubBackend b("s", 8);
  const auto data = random_data(4, 8, 1);
  TrainConfig c = stub_config("s");
  c.loss_mode = LossMode::kL1Only;
  const TrainResult r = train_loop(data, c, init_adapter(mini_adapter(), 1), b, b.frontend());
  EXPECT_EQ(b.loss_calls(), 0u);
  EXPECT_EQ(r.report["backend_loss_calls"], 0);
  EXPECT_TRUE(r.report["epochs"][0]["mean_ce"].is_null());
}

TEST(Training, CeOnlyCallsBackendOncePerExample) {
  StubBackend b("s", 8);
  const auto data = random_data(4, 8, 1);
  TrainConfig c = stub_config("s");
  c.loss_mode = LossMode::kCeOnly;
  train_loop(data, c, init_adapter(mini_adapter(), 1), b, b.frontend());
  EXPECT_EQ(b.loss_calls(), 8u);
}

TEST(Training, L1DecreasesOnFixedBatch) {
  StubBackend b("s", 8);
  TrainConfig c = stub_config("s");
  c.loss_mode = LossMode::kL1Only;
  c.learning_rate = 2e-3;
  TrainState st = init_train_state(init_adapter(mini_adapter(), 2), c);
  const MelSpectrogram clean = random_mel(8, 16, 1);
  MelSpectrogram corrupted = apply_mask(clean, sample_loss_mask(16, 0.25, SpanDistribution{}, 1, "f"));
  const std::vector<TrainExample> batch = {{&clean, corrupted, b.tokenize("x", "en")}};
  for (int i = 0; i < 100; ++i) train_step(st, batch, c, b);
  EXPECT_LT(st.history.back().loss.l1, 0.8 * st.history.front().loss.l1);
}

TEST(Training, BackendFingerprintIsUnchanged) {
  auto b = testing::miniature_backend("tiny-a", 8);
  const std::string before = b->fingerprint();
  std::vector<Utterance> data = random_data(3, 8, 7);
  for (auto& u : data) u.transcript = "ab c";
  TrainConfig c = stub_config("tiny-a");
  c.batch_size = 1;
  c.epochs = 100;
  c.max_steps = 100;
  FrontendConfig fe;
  fe.n_mels = 8;
  const TrainResult r = train_loop(data, c, init_adapter(mini_adapter(), 1), *b, fe);
  EXPECT_EQ(r.report["steps"], 100);
  EXPECT_EQ(r.report["backend_fingerprint_after"], before);
  EXPECT_EQ(b->fingerprint(), before);
}

TEST(Training, NonFiniteStepsAreSkippedThenFatal) {
  StubBackend b("s", 8);
  TrainConfig c = stub_config("s");
  c.loss_mode = LossMode::kCeOnly;
  TrainState st = init_train_state(init_adapter(mini_adapter(), 2), c);
  const std::string before = st.adapter.params.fingerprint();
  const MelSpectrogram clean = random_mel(8, 8, 1);
  const std::vector<TrainExample> batch = {{&clean, clean, b.tokenize("x", "en")}};
  b.nan_ = true;
  train_step(st, batch, c, b);
  train_step(st, batch, c, b);
  EXPECT_EQ(st.skipped_steps, 2);
  EXPECT_EQ(st.adapter.params.fingerprint(), before);
  EXPECT_THROW(train_step(st, batch, c, b), NumericError);
  b.nan_ = false;
  st.consecutive_skips = 0;
  train_step(st, batch, c, b);
  EXPECT_NE(st.adapter.params.fingerprint(), before);
}

TEST(Training, PreflightChecks) {
  StubBackend b("s", 8);
  const auto data = random_data(2, 8, 1);
  TrainConfig c = stub_config("other");
  EXPECT_THROW(train_loop(data, c, init_adapter(mini_adapter(), 1), b, b.frontend()), ConfigError);
  c.backend_id = "s";
  FrontendConfig fe;
  EXPECT_THROW(train_loop(data, c, init_adapter(mini_adapter(), 1), b, fe), ConfigError);
  TrainOptions opt;
  opt.expected_fingerprint = "nope";
  EXPECT_THROW(train_loop(data, c, init_adapter(mini_adapter(), 1), b, b.frontend(), opt), DataError);
  c.lambda_ce = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Training, ResumeContinuesFromLastEpoch) {
  TempDir dir("resume");
  StubBackend b("s", 8);
  const auto data = random_data(4, 8, 3);
  TrainConfig c = stub_config("s");
  c.epochs = 3;
  TrainOptions opt;
  opt.checkpoint_dir = dir / "ckpt";
  const TrainResult full = train_loop(data, c, init_adapter(mini_adapter(), 1), b, b.frontend(), opt);
  ASSERT_TRUE(std::filesystem::exists(epoch_checkpoint_path(opt.checkpoint_dir, 2)));
  std::filesystem::remove(epoch_checkpoint_path(opt.checkpoint_dir, 2));
  const TrainResult resumed = train_loop(data, c, init_adapter(mini_adapter(), 1), b, b.frontend(), opt);
  EXPECT_EQ(resumed.report["resumed_from_epoch"], 1);
  EXPECT_EQ(resumed.report["steps"], full.report["steps"]);
  // Checkpoints store float32, so the resumed run agrees to that precision.
  for (const auto& [name, m] : full.adapter.params.tensors()) {
    EXPECT_LT((resumed.adapter.params.at(name) - m).cwiseAbs().maxCoeff(), 1e-5) << name;
  }
  TrainConfig changed = c;
  changed.learning_rate = 1e-3;
  std::filesystem::remove(epoch_checkpoint_path(opt.checkpoint_dir, 2));
  EXPECT_THROW(train_loop(data, changed, init_adapter(mini_adapter(), 1), b, b.frontend(), opt), ConfigError);
}

TEST(Training, RunsAreDeterministic) {
  StubBackend b("s", 8);
  const auto data = random_data(4, 8, 9);
  const TrainConfig c = stub_config("s");
  const TrainResult a = train_loop(data, c, init_adapter(mini_adapter(), 1), b, b.frontend());
  const TrainResult d = train_loop(data, c, init_adapter(mini_adapter(), 1), b, b.frontend());
  EXPECT_EQ(a.adapter.params.fingerprint(), d.adapter.params.fingerprint());
  EXPECT_EQ(a.report["lr_trace"], d.report["lr_trace"]);
}

}  // namespace
}  // namespace plcadapt

// tests/test_config.cc

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

#include <cstdlib>

#include "plcadapt/config.h"
#include "plcadapt/errors.h"
#include "test_support.h"

namespace plcadapt {
namespace {

TEST(Config, DefaultsMatchLibraryDefaults) {
  const ExperimentConfig c = default_config();
  EXPECT_TRUE(c.adapter == AdapterConfig{});
  EXPECT_TRUE(c.frontend == FrontendConfig{});
  EXPECT_EQ(c.train.learning_rate, 0.0005);
  EXPECT_EQ(c.train.lambda_ce, 0.1);
  EXPECT_EQ(c.eval.plrs, (std::vector<double>{0.0, 0.2, 0.4}));
}

TEST(Config, ParsesSectionsAndInheritsSeed) {
  const std::string text = R"toml(
seed = 17
[corruption]
span_distribution = "uniform(2,6)"
plr_distribution = "uniform(0,0.4)"
[adapter]
base_channels = 8
n_bottleneck_blocks = 2
[train]
loss_mode = "l1"
epochs = 4
[backends.tiny-a]
checkpoint = "models/a.ckpt"
[eval]
plrs = [0.0, 0.3]
)toml";
  const ExperimentConfig c = parse_config(text, "t.toml", "/base", false);
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.corruption.seed, 17u);
  EXPECT_EQ(c.train.seed, 17u);
  EXPECT_EQ(c.reference.seed, 17u);
  EXPECT_EQ(c.adapter.base_channels, 8);
  EXPECT_EQ(c.train.loss_mode, LossMode::kL1Only);
  EXPECT_EQ(c.corruption.span_distribution.describe(), "uniform(2,6)");
  EXPECT_EQ(c.backend("tiny-a").checkpoint, "/base/models/a.ckpt");
  EXPECT_EQ(c.eval.plrs, (std::vector<double>{0.0, 0.3}));
  EXPECT_THROW(c.backend("missing"), ConfigError);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config("[train]\nepoch = 3\n", "t", "/", false), ConfigError);
  EXPECT_THROW(parse_config("[nope]\nx = 1\n", "t", "/", false), ConfigError);
  EXPECT_THROW(parse_config("[train]\nepochs = \"three\"\n", "t", "/", false), ConfigError);
  EXPECT_THROW(parse_config("[eval]\nplrs = [0.99]\n", "t", "/", false), ConfigError);
  EXPECT_THROW(parse_config("[train\n", "t", "/", false), ConfigError);
  EXPECT_THROW(parse_config("[backends.x]\nkind = \"grpc\"\n", "t", "/", false), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.toml", false), ConfigError);
}

TEST(Config, EnvironmentOverridesFile) {
  setenv("PLCADAPT_TRAIN__EPOCHS", "7", 1);
  setenv("PLCADAPT_SEED", "5", 1);
  const ExperimentConfig c = parse_config("seed = 1\n[train]\nepochs = 2\n", "t", "/", true);
  unsetenv("PLCADAPT_TRAIN__EPOCHS");
  unsetenv("PLCADAPT_SEED");
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(parse_config("seed = 1\n[train]\nepochs = 2\n", "t", "/", true).train.epochs, 2);
}

TEST(Config, HashIsStableAndSensitive) {
  const ExperimentConfig a = parse_config("seed = 3\n", "a", "/", false);
  const ExperimentConfig b = parse_config("# comment\nseed = 3\n", "b", "/", false);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 64u);
  EXPECT_NE(a.hash(), parse_config("seed = 4\n", "c", "/", false).hash());
}

}  // namespace
}  // namespace plcadapt

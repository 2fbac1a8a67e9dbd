// src/config.cc

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

#include "plcadapt/config.h"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "plcadapt/errors.h"
#include "plcadapt/io_util.h"
#include "plcadapt/wer.h"

extern char** environ;

namespace plcadapt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json toml_to_json(const toml::node& n) {
  if (const auto* t = n.as_table()) {
    json j = json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (const auto* a = n.as_array()) {
    json j = json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (const auto* v = n.as_string()) return v->get();
  if (const auto* v = n.as_integer()) return v->get();
  if (const auto* v = n.as_floating_point()) return v->get();
  if (const auto* v = n.as_boolean()) return v->get();
  throw ConfigError("unsupported TOML value (dates and times are not accepted)");
}

json parse_toml(const std::string& text, const std::string& origin) {
  try {
    return toml_to_json(toml::parse(text, origin));
  } catch (const toml::parse_error& e) {
    const auto& src = e.source();
    throw ConfigError(origin + ":" + std::to_string(src.begin.line) + ": " +
                      std::string(e.description()));
  }
}

json env_value(const std::string& text) {
  try {
    const json doc = toml_to_json(toml::parse("v = " + text));
    return doc.at("v");
  } catch (const std::exception&) {
    return text;
  }
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void apply_env(json& doc) {
  static const std::string kPrefix = "PLCADAPT_";
  for (char** e = environ; e && *e; ++e) {
    const std::string entry = *e;
    const auto eq = entry.find('=');
    if (eq == std::string::npos || entry.compare(0, kPrefix.size(), kPrefix) != 0) continue;
    const std::string name = entry.substr(kPrefix.size(), eq - kPrefix.size());
    const json value = env_value(entry.substr(eq + 1));
    const auto sep = name.find("__");
    if (sep == std::string::npos) {
      doc[lower(name)] = value;
    } else {
      doc[lower(name.substr(0, sep))][lower(name.substr(sep + 2))] = value;
    }
  }
}

void check_keys(const json& section, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!section.is_object()) throw ConfigError("[" + where + "] must be a table");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : section.items()) {
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in [" + where + "]");
  }
}

template <typename T>
void read(const json& section, const char* key, T& out, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("[" + where + "] " + key + " has the wrong type");
  }
}

std::string resolve(const std::string& p, const fs::path& base) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace

json EvalConfig::to_json() const {
  return {{"plrs", plrs}, {"beam_size", beam_size}, {"normalizer", normalizer}, {"workers", workers}};
}

json ExperimentConfig::to_json() const {
  json backends_j = json::object();
  for (const auto& [id, b] : backends) {
    backends_j[id] = {{"kind", b.kind},
                      {"checkpoint", b.checkpoint},
                      {"command", b.command},
                      {"tokenizer", b.tokenizer},
                      {"frontend", b.frontend.to_json()},
                      {"contract_version", b.contract_version},
                      {"fingerprint", b.expected_fingerprint}};
  }
  json ref = reference.to_json();
  ref["wer_bar"] = reference_wer_bar;
  json adapter_j = adapter.to_json();
  adapter_j["seed"] = adapter_seed;
  return {{"seed", seed},
          {"frontend", frontend.to_json()},
          {"corruption", corruption.to_json()},
          {"adapter", adapter_j},
          {"train", train.to_json()},
          {"reference", ref},
          {"backends", backends_j},
          {"eval", eval.to_json()}};
}

std::string ExperimentConfig::hash() const { return sha256_hex(to_json().dump()); }

const BackendEntry& ExperimentConfig::backend(const std::string& id) const {
  const auto it = backends.find(id);
  if (it == backends.end()) throw ConfigError("backend '" + id + "' is not registered");
  return it->second;
}

ExperimentConfig parse_config(const std::string& toml_text, const std::string& origin,
                              const fs::path& base_dir, bool use_env) {
  json doc = parse_toml(toml_text, origin);
  if (use_env) apply_env(doc);
  check_keys(doc, "top level",
             {"seed", "frontend", "corruption", "adapter", "train", "reference", "backends", "eval"});

  ExperimentConfig c;
  read(doc, "seed", c.seed, "top level");
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& {
    return doc.contains(name) ? doc.at(name) : empty;
  };

  {
    const json& s = section("frontend");
    check_keys(s, "frontend",
               {"sample_rate", "window_length", "hop_length", "n_fft", "n_mels", "log_floor",
                "dynamic_range", "normalization_offset", "normalization_scale"});
    c.frontend = FrontendConfig::from_json(s);
  }
  {
    const json& s = section("corruption");
    check_keys(s, "corruption",
               {"plr_target", "plr_distribution", "span_distribution", "seed", "fill_policy"});
    c.corruption.seed = c.seed;
    read(s, "seed", c.corruption.seed, "corruption");
    if (s.contains("plr_target")) {
      double v = 0;
      read(s, "plr_target", v, "corruption");
      c.corruption.plr_target = v;
    }
    std::string text;
    if (s.contains("plr_distribution")) {
      read(s, "plr_distribution", text, "corruption");
      c.corruption.plr_distribution = PlrDistribution::parse(text);
    }
    if (s.contains("span_distribution")) {
      read(s, "span_distribution", text, "corruption");
      c.corruption.span_distribution = SpanDistribution::parse(text);
    }
    std::string fill = "zero_fill";
    read(s, "fill_policy", fill, "corruption");
    if (fill != "zero_fill") throw ConfigError("[corruption] fill_policy must be zero_fill");
    c.corruption.validate();
  }
  {
    const json& s = section("adapter");
    check_keys(s, "adapter",
               {"n_levels", "base_channels", "channel_multipliers", "n_bottleneck_blocks",
                "kernel_size", "convs_per_level", "global_residual", "pad_value", "seed"});
    c.adapter.n_mels = c.frontend.n_mels;
    c.adapter.pad_value = c.frontend.silence_value();
    read(s, "n_levels", c.adapter.n_levels, "adapter");
    read(s, "base_channels", c.adapter.base_channels, "adapter");
    read(s, "channel_multipliers", c.adapter.channel_multipliers, "adapter");
    read(s, "n_bottleneck_blocks", c.adapter.n_bottleneck_blocks, "adapter");
    read(s, "kernel_size", c.adapter.kernel_size, "adapter");
    read(s, "convs_per_level", c.adapter.convs_per_level, "adapter");
    read(s, "global_residual", c.adapter.global_residual, "adapter");
    read(s, "pad_value", c.adapter.pad_value, "adapter");
    c.adapter_seed = c.seed;
    read(s, "seed", c.adapter_seed, "adapter");
    c.adapter.validate();
  }
  {
    const json& s = section("train");
    check_keys(s, "train",
               {"lambda_ce", "learning_rate", "lr_decay_per_epoch", "epochs", "batch_size",
                "backend_id", "loss_mode", "seed", "clip_norm", "max_consecutive_skips",
                "max_steps"});
    TrainConfig& t = c.train;
    read(s, "lambda_ce", t.lambda_ce, "train");
    read(s, "learning_rate", t.learning_rate, "train");
    read(s, "lr_decay_per_epoch", t.lr_decay_per_epoch, "train");
    read(s, "epochs", t.epochs, "train");
    read(s, "batch_size", t.batch_size, "train");
    read(s, "backend_id", t.backend_id, "train");
    std::string mode = to_string(t.loss_mode);
    read(s, "loss_mode", mode, "train");
    t.loss_mode = parse_loss_mode(mode);
    t.seed = c.seed;
    read(s, "seed", t.seed, "train");
    read(s, "clip_norm", t.clip_norm, "train");
    read(s, "max_consecutive_skips", t.max_consecutive_skips, "train");
    read(s, "max_steps", t.max_steps, "train");
    t.corruption = c.corruption;
    t.validate();
  }
  {
    const json& s = section("reference");
    check_keys(s, "reference",
               {"encoder_channels", "encoder_kernel", "encoder_pools", "pooling", "embed_dim", "hidden_dim",
                "context_frames", "epochs", "batch_size", "learning_rate", "lr_decay_per_epoch",
                "clip_norm", "seed", "wer_bar"});
    json spec = s;
    spec.erase("wer_bar");
    if (!spec.contains("seed")) spec["seed"] = c.seed;
    c.reference = ReferenceSpec::from_json(spec);
    read(s, "wer_bar", c.reference_wer_bar, "reference");
  }
  {
    const json& s = section("backends");
    if (!s.is_object()) throw ConfigError("[backends] must be a table of tables");
    for (const auto& [id, b] : s.items()) {
      const std::string where = "backends." + id;
      check_keys(b, where,
                 {"kind", "checkpoint", "command", "tokenizer", "frontend", "contract_version",
                  "fingerprint"});
      BackendEntry e;
      e.id = id;
      read(b, "kind", e.kind, where);
      read(b, "checkpoint", e.checkpoint, where);
      read(b, "command", e.command, where);
      read(b, "tokenizer", e.tokenizer, where);
      read(b, "contract_version", e.contract_version, where);
      read(b, "fingerprint", e.expected_fingerprint, where);
      e.checkpoint = resolve(e.checkpoint, base_dir);
      e.tokenizer = resolve(e.tokenizer, base_dir);
      if (b.contains("frontend")) {
        check_keys(b.at("frontend"), where + ".frontend",
                   {"sample_rate", "window_length", "hop_length", "n_fft", "n_mels", "log_floor",
                    "dynamic_range", "normalization_offset", "normalization_scale"});
        e.frontend = FrontendConfig::from_json(b.at("frontend"));
      } else {
        e.frontend = c.frontend;
      }
      if (e.kind != "reference" && e.kind != "external-shim") {
        throw ConfigError("[" + where + "] kind must be reference or external-shim");
      }
      c.backends.emplace(id, std::move(e));
    }
  }
  {
    const json& s = section("eval");
    check_keys(s, "eval", {"plrs", "beam_size", "normalizer", "workers"});
    read(s, "plrs", c.eval.plrs, "eval");
    read(s, "beam_size", c.eval.beam_size, "eval");
    read(s, "normalizer", c.eval.normalizer, "eval");
    read(s, "workers", c.eval.workers, "eval");
    TextNormalizer::parse(c.eval.normalizer);
    if (c.eval.beam_size < 1) throw ConfigError("[eval] beam_size must be >= 1");
    for (double p : c.eval.plrs) {
      if (!(p >= 0.0 && p <= kMaxPlr)) throw ConfigError("[eval] plrs must lie in [0, 0.95]");
    }
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path, bool use_env) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_config(text, path.string(), fs::absolute(path).parent_path(), use_env);
}

ExperimentConfig default_config(bool use_env) { return parse_config("", "<defaults>", fs::current_path(), use_env); }

}  // namespace plcadapt

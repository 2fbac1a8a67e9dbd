// src/asr_backend.cc

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

#include "plcadapt/asr_backend.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <set>

#include "plcadapt/checkpoint.h"
#include "plcadapt/errors.h"
#include "plcadapt/io_util.h"
#include "plcadapt/optimizer.h"
#include "plcadapt/rng.h"
#include "plcadapt/wer.h"

namespace plcadapt {

namespace {

std::u32string utf8_decode(const std::string& s) {
  std::u32string out;
  for (size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = c;
    if (c >= 0xf0) {
      extra = 3;
      cp = c & 0x07;
    } else if (c >= 0xe0) {
      extra = 2;
      cp = c & 0x0f;
    } else if (c >= 0xc0) {
      extra = 1;
      cp = c & 0x1f;
    }
    if (extra > 0 && i + extra >= s.size()) {
      throw DataError("invalid UTF-8 text");
    }
    for (int k = 1; k <= extra; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3f);
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
      out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
  }
  return out;
}

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

int total_pool(const ReferenceSpec& spec) {
  int p = 1;
  for (int f : spec.encoder_pools) p *= f;
  return p;
}

Matrix positional_encoding(int dim, int length) {
  Matrix pe(dim, length);
  for (int t = 0; t < length; ++t) {
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(i, t) = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  }
  return pe;
}

}  // namespace

// ---------------------------------------------------------------------------
// Small value types

void DecodeConfig::validate() const {
  if (beam_size < 1) throw ConfigError("decode: beam_size must be >= 1");
  if (emit_timestamps) throw ConfigError("decode: timestamp output is not supported");
  if (max_tokens < 0) throw ConfigError("decode: max_tokens must be >= 0");
  if (!is_language_tag(language)) throw ConfigError("decode: bad language tag '" + language + "'");
}

nlohmann::json DecodeConfig::to_json() const {
  return {{"beam_size", beam_size},
          {"language", language},
          {"emit_timestamps", emit_timestamps},
          {"max_tokens", max_tokens}};
}

void AsrBackend::check_input(const MelSpectrogram& m) const {
  if (m.n_mels() != frontend().n_mels) {
    throw ConfigError("backend " + id() + " expects " + std::to_string(frontend().n_mels) +
                      " mel bins, got " + std::to_string(m.n_mels()));
  }
  if (m.n_frames() < 1) throw DataError("backend " + id() + ": empty input");
  if (!m.values.allFinite()) throw NumericError("backend " + id() + ": non-finite input features");
}

void ReferenceSpec::validate() const {
  if (encoder_channels < 1 || encoder_kernel < 1 || encoder_kernel % 2 == 0 || embed_dim < 1 ||
      hidden_dim < 1 || encoder_pools.empty() || context_frames < 0 ||
      (pooling != "avg" && pooling != "max")) {
    throw ConfigError("reference backend: invalid architecture");
  }
  for (int p : encoder_pools) {
    if (p < 1) throw ConfigError("reference backend: pools must be >= 1");
  }
  if (epochs < 0 || batch_size < 1 || !(learning_rate > 0.0) || lr_decay_per_epoch < 0.0 ||
      lr_decay_per_epoch >= 1.0) {
    throw ConfigError("reference backend: invalid training schedule");
  }
}

nlohmann::json ReferenceSpec::to_json() const {
  return {{"encoder_channels", encoder_channels},
          {"encoder_kernel", encoder_kernel},
          {"encoder_pools", encoder_pools},
          {"pooling", pooling},
          {"embed_dim", embed_dim},
          {"hidden_dim", hidden_dim},
          {"context_frames", context_frames},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"lr_decay_per_epoch", lr_decay_per_epoch},
          {"clip_norm", clip_norm},
          {"seed", seed}};
}

ReferenceSpec ReferenceSpec::from_json(const nlohmann::json& j) {
  ReferenceSpec s;
  try {
    s.encoder_channels = j.value("encoder_channels", s.encoder_channels);
    s.encoder_kernel = j.value("encoder_kernel", s.encoder_kernel);
    s.encoder_pools = j.value("encoder_pools", s.encoder_pools);
    s.pooling = j.value("pooling", s.pooling);
    s.embed_dim = j.value("embed_dim", s.embed_dim);
    s.hidden_dim = j.value("hidden_dim", s.hidden_dim);
    s.context_frames = j.value("context_frames", s.context_frames);
    s.epochs = j.value("epochs", s.epochs);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.lr_decay_per_epoch = j.value("lr_decay_per_epoch", s.lr_decay_per_epoch);
    s.clip_norm = j.value("clip_norm", s.clip_norm);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("reference backend spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string backend_text(const std::string& text) { return TextNormalizer{}.apply(text); }

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> languages, std::u32string chars)
    : languages_(std::move(languages)), chars_(std::move(chars)) {}

int Vocabulary::language_id(const std::string& tag) const {
  for (size_t i = 0; i < languages_.size(); ++i) {
    if (languages_[i] == tag) return static_cast<int>(2 + i);
  }
  return -1;
}

int Vocabulary::char_id(char32_t c) const {
  const auto pos = chars_.find(c);
  if (pos == std::u32string::npos) return -1;
  return first_char() + static_cast<int>(pos);
}

char32_t Vocabulary::char_at(int id) const {
  return chars_.at(static_cast<size_t>(id - first_char()));
}

nlohmann::json Vocabulary::to_json() const {
  return {{"languages", languages_}, {"chars", utf8_encode(chars_)}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  return Vocabulary(j.at("languages").get<std::vector<std::string>>(),
                    utf8_decode(j.at("chars").get<std::string>()));
}

Vocabulary Vocabulary::from_transcripts(const std::vector<Utterance>& utts) {
  std::set<std::string> langs;
  std::set<char32_t> chars;
  for (const auto& u : utts) {
    langs.insert(u.language);
    for (char32_t c : utf8_decode(backend_text(u.transcript))) chars.insert(c);
  }
  return Vocabulary({langs.begin(), langs.end()}, std::u32string(chars.begin(), chars.end()));
}

// ---------------------------------------------------------------------------
// Model graph

namespace reference_model {

namespace {

struct Weights {
  ag::Var emb, wx, wh, bx, bh, comb_w, comb_b, out_w, out_b;
};

struct Memory {
  ag::Var enc;    // [C x S]
  ag::Var keys_t; // [S x H]
  ag::Var h0;     // [H x 1]
};

struct State {
  ag::Var h;     // [H x B]
  ag::Var feed;  // [H x B]
};

Weights bind_weights(ParamBinding& bind) {
  return {bind("dec.emb"),    bind("dec.gru.wx"), bind("dec.gru.wh"),
          bind("dec.gru.bx"), bind("dec.gru.bh"), bind("dec.comb.w"),
          bind("dec.comb.b"), bind("dec.out.w"),  bind("dec.out.b")};
}

Memory encode(const ReferenceSpec& spec, ParamBinding& bind, const ag::Var& mel,
              double silence_value) {
  ag::Var x = mel;
  int frames = static_cast<int>(mel->cols());
  if (spec.context_frames > 0 && frames != spec.context_frames) {
    if (frames < spec.context_frames) {
      x = ag::pad_grid(x, {frames, 1}, spec.context_frames - frames, 0, silence_value);
    } else {
      x = ag::crop_grid(x, {frames, 1}, {spec.context_frames, 1});
    }
    frames = spec.context_frames;
  }
  const int unit = total_pool(spec);
  const int extra = (unit - frames % unit) % unit;
  if (extra) x = ag::pad_grid(x, {frames, 1}, extra, 0, silence_value);
  ag::Grid g{frames + extra, 1};
  for (size_t i = 0; i < spec.encoder_pools.size(); ++i) {
    const std::string n = "enc.conv" + std::to_string(i);
    x = ag::relu(ag::conv2d(x, g, bind(n + ".w"), bind(n + ".b"), spec.encoder_kernel, 1));
    const int pool = spec.encoder_pools[i];
    if (pool > 1) {
      x = spec.pooling == "max" ? ag::maxpool2d(x, g, pool, 1) : ag::avgpool2d(x, g, pool, 1);
      g.rows /= pool;
    }
  }
  Memory mem;
  mem.enc = ag::add(x, ag::constant(positional_encoding(spec.encoder_channels, g.rows)));
  mem.keys_t = ag::transpose(ag::matmul(bind("dec.att.w"), mem.enc));
  const ag::Var avg = ag::constant(Matrix::Constant(g.rows, 1, 1.0 / g.rows));
  mem.h0 = ag::tanh(ag::add_bias(ag::matmul(bind("dec.init.w"), ag::matmul(mem.enc, avg)),
                                 bind("dec.init.b")));
  return mem;
}

State initial_state(const ReferenceSpec& spec, const Memory& mem, int beams) {
  State s;
  s.h = beams == 1 ? mem.h0 : ag::matmul(mem.h0, ag::constant(Matrix::Ones(1, beams)));
  s.feed = ag::constant(Matrix::Zero(spec.hidden_dim, beams));
  return s;
}

Matrix one_hot(const std::vector<int>& tokens, int vocab) {
  Matrix m = Matrix::Zero(vocab, static_cast<Eigen::Index>(tokens.size()));
  for (size_t i = 0; i < tokens.size(); ++i) m(tokens[i], static_cast<Eigen::Index>(i)) = 1.0;
  return m;
}

// One decoder step for a batch of hypotheses (columns). Returns logits.
ag::Var step(const ReferenceSpec& spec, const Weights& w, const Memory& mem, State& s,
             const std::vector<int>& tokens, int vocab) {
  const int h = spec.hidden_dim;
  const ag::Var emb = ag::matmul(w.emb, ag::constant(one_hot(tokens, vocab)));
  const ag::Var parts[] = {emb, s.feed};
  const ag::Var x = ag::concat_rows(parts);
  const ag::Var gx = ag::add_bias(ag::matmul(w.wx, x), w.bx);
  const ag::Var gh = ag::add_bias(ag::matmul(w.wh, s.h), w.bh);
  const ag::Var r = ag::sigmoid(ag::add(ag::slice_rows(gx, 0, h), ag::slice_rows(gh, 0, h)));
  const ag::Var z = ag::sigmoid(ag::add(ag::slice_rows(gx, h, h), ag::slice_rows(gh, h, h)));
  const ag::Var n =
      ag::tanh(ag::add(ag::slice_rows(gx, 2 * h, h), ag::mul(r, ag::slice_rows(gh, 2 * h, h))));
  s.h = ag::add(n, ag::mul(z, ag::sub(s.h, n)));
  const ag::Var alpha = ag::softmax(ag::matmul(mem.keys_t, s.h));
  const ag::Var ctx = ag::matmul(mem.enc, alpha);
  const ag::Var hc[] = {s.h, ctx};
  s.feed = ag::tanh(ag::add_bias(ag::matmul(w.comb_w, ag::concat_rows(hc)), w.comb_b));
  return ag::add_bias(ag::matmul(w.out_w, s.feed), w.out_b);
}

}  // namespace

size_t count_params(const ReferenceSpec& spec, int n_mels, int vocab_size) {
  const size_t c = static_cast<size_t>(spec.encoder_channels);
  const size_t h = static_cast<size_t>(spec.hidden_dim);
  const size_t e = static_cast<size_t>(spec.embed_dim);
  const size_t v = static_cast<size_t>(vocab_size);
  size_t n = 0;
  size_t in = static_cast<size_t>(n_mels);
  for (size_t i = 0; i < spec.encoder_pools.size(); ++i) {
    n += c * in * static_cast<size_t>(spec.encoder_kernel) + c;
    in = c;
  }
  n += h * c;              // attention
  n += h * c + h;          // initial state
  n += e * v;              // embedding
  n += 3 * h * (e + h) + 3 * h * h + 6 * h;  // GRU
  n += h * (h + c) + h;    // attentional combination
  n += v * h + v;          // output
  return n;
}

ParamSet init_params(const ReferenceSpec& spec, int n_mels, int vocab_size, uint64_t seed) {
  spec.validate();
  ParamSet p;
  const int c = spec.encoder_channels;
  const int h = spec.hidden_dim;
  const int e = spec.embed_dim;
  auto add = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols, double stddev) {
    Rng rng(derive_seed(seed, name));
    p.add(name, stddev == 0.0 ? Matrix::Zero(rows, cols) : random_matrix(rng, rows, cols, stddev));
  };
  int in = n_mels;
  for (size_t i = 0; i < spec.encoder_pools.size(); ++i) {
    const std::string n = "enc.conv" + std::to_string(i);
    add(n + ".w", c, static_cast<Eigen::Index>(in) * spec.encoder_kernel,
        std::sqrt(2.0 / (in * spec.encoder_kernel)));
    add(n + ".b", c, 1, 0.0);
    in = c;
  }
  add("dec.att.w", h, c, 1.0 / std::sqrt(c));
  add("dec.init.w", h, c, 1.0 / std::sqrt(c));
  add("dec.init.b", h, 1, 0.0);
  add("dec.emb", e, vocab_size, 1.0);
  add("dec.gru.wx", 3 * h, e + h, 1.0 / std::sqrt(e + h));
  add("dec.gru.wh", 3 * h, h, 1.0 / std::sqrt(h));
  add("dec.gru.bx", 3 * h, 1, 0.0);
  add("dec.gru.bh", 3 * h, 1, 0.0);
  add("dec.comb.w", h, h + c, 1.0 / std::sqrt(h + c));
  add("dec.comb.b", h, 1, 0.0);
  add("dec.out.w", vocab_size, h, 1.0 / std::sqrt(h));
  add("dec.out.b", vocab_size, 1, 0.0);
  return p;
}

ag::Var loss(const ReferenceSpec& spec, const Vocabulary& vocab, ParamBinding& bind,
             const ag::Var& mel, const TokenSequence& y, double silence_value) {
  const int lang = vocab.language_id(y.language);
  if (lang < 0) throw ConfigError("language '" + y.language + "' is not in the backend vocabulary");
  const Memory mem = encode(spec, bind, mel, silence_value);
  const Weights w = bind_weights(bind);
  State s = initial_state(spec, mem, 1);
  // Inputs: <sos> <lang> c1 .. cU; targets: c1 .. cU <eos>.
  std::vector<int> inputs = {Vocabulary::kSos, lang};
  inputs.insert(inputs.end(), y.ids.begin(), y.ids.end());
  std::vector<int> targets(y.ids.begin(), y.ids.end());
  targets.push_back(Vocabulary::kEos);
  std::vector<ag::Var> logits;
  logits.reserve(targets.size());
  for (size_t t = 0; t < inputs.size(); ++t) {
    ag::Var l = step(spec, w, mem, s, {inputs[t]}, vocab.size());
    if (t >= 1) logits.push_back(std::move(l));
  }
  return ag::cross_entropy(ag::concat_cols(logits), targets);
}

// Beam search over character tokens; returns the best token sequence.
std::vector<int> beam_search(const ReferenceSpec& spec, const Vocabulary& vocab,
                             const ParamSet& params, const Matrix& mel, int lang, int beam_size,
                             int max_tokens, double silence_value) {
  ag::NoGradGuard no_grad;
  ParamBinding bind(params, false);
  const Memory mem = encode(spec, bind, ag::constant_ref(mel), silence_value);
  const Weights w = bind_weights(bind);
  if (max_tokens <= 0) max_tokens = 4 * static_cast<int>(mem.enc->cols()) + 16;

  State s = initial_state(spec, mem, 1);
  step(spec, w, mem, s, {Vocabulary::kSos}, vocab.size());
  ag::Var logits = step(spec, w, mem, s, {lang}, vocab.size());

  struct Hyp {
    std::vector<int> tokens;
    double logp = 0.0;
  };
  std::vector<Hyp> live = {Hyp{}};
  std::vector<Hyp> finished;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (int len = 0; len < max_tokens && !live.empty(); ++len) {
    struct Cand {
      double score;
      int beam;
      int token;
    };
    std::vector<Cand> cands;
    const Matrix& lv = logits->val();
    for (int b = 0; b < static_cast<int>(live.size()); ++b) {
      Eigen::VectorXd col = lv.col(b);
      for (int v = 0; v < vocab.size(); ++v) {
        if (v != Vocabulary::kEos && !vocab.is_char(v)) col(v) = neg_inf;
      }
      const double mx = col.maxCoeff();
      const double lse = mx + std::log((col.array() - mx).exp().sum());
      std::vector<int> order(static_cast<size_t>(vocab.size()));
      for (int v = 0; v < vocab.size(); ++v) order[static_cast<size_t>(v)] = v;
      const int keep = std::min(beam_size, vocab.size());
      std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                        [&](int a, int c) { return col(a) > col(c) || (col(a) == col(c) && a < c); });
      for (int k = 0; k < keep; ++k) {
        const int v = order[static_cast<size_t>(k)];
        if (col(v) == neg_inf) continue;
        cands.push_back({live[static_cast<size_t>(b)].logp + col(v) - lse, b, v});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& c) {
      if (a.score != c.score) return a.score > c.score;
      if (a.beam != c.beam) return a.beam < c.beam;
      return a.token < c.token;
    });
    if (static_cast<int>(cands.size()) > beam_size) cands.resize(static_cast<size_t>(beam_size));
    std::vector<Hyp> next;
    std::vector<int> cols;
    std::vector<int> tokens;
    for (const Cand& c : cands) {
      Hyp h{live[static_cast<size_t>(c.beam)].tokens, c.score};
      if (c.token == Vocabulary::kEos) {
        finished.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.token);
        next.push_back(std::move(h));
        cols.push_back(c.beam);
        tokens.push_back(c.token);
      }
    }
    live = std::move(next);
    if (live.empty() || static_cast<int>(finished.size()) >= beam_size) break;
    Matrix h_sel(s.h->rows(), static_cast<Eigen::Index>(cols.size()));
    Matrix f_sel(s.feed->rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t i = 0; i < cols.size(); ++i) {
      h_sel.col(static_cast<Eigen::Index>(i)) = s.h->val().col(cols[i]);
      f_sel.col(static_cast<Eigen::Index>(i)) = s.feed->val().col(cols[i]);
    }
    s.h = ag::constant(std::move(h_sel));
    s.feed = ag::constant(std::move(f_sel));
    logits = step(spec, w, mem, s, tokens, vocab.size());
  }
  for (auto& h : live) finished.push_back(std::move(h));
  const Hyp* best = nullptr;
  double best_score = neg_inf;
  for (const Hyp& h : finished) {
    const double score = h.logp / static_cast<double>(h.tokens.size() + 1);
    if (best == nullptr || score > best_score) {
      best = &h;
      best_score = score;
    }
  }
  return best ? best->tokens : std::vector<int>{};
}

std::vector<int> greedy_search(const ReferenceSpec& spec, const Vocabulary& vocab,
                               const ParamSet& params, const Matrix& mel, int lang, int max_tokens,
                               double silence_value) {
  ag::NoGradGuard no_grad;
  ParamBinding bind(params, false);
  const Memory mem = encode(spec, bind, ag::constant_ref(mel), silence_value);
  const Weights w = bind_weights(bind);
  if (max_tokens <= 0) max_tokens = 4 * static_cast<int>(mem.enc->cols()) + 16;
  State s = initial_state(spec, mem, 1);
  step(spec, w, mem, s, {Vocabulary::kSos}, vocab.size());
  int prev = lang;
  std::vector<int> out;
  while (static_cast<int>(out.size()) < max_tokens) {
    const Matrix logits = step(spec, w, mem, s, {prev}, vocab.size())->val();
    int best = -1;
    for (int v = 0; v < vocab.size(); ++v) {
      if (v != Vocabulary::kEos && !vocab.is_char(v)) continue;
      if (best < 0 || logits(v, 0) > logits(best, 0)) best = v;
    }
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace reference_model

// ---------------------------------------------------------------------------
// ReferenceBackend

ReferenceBackend::ReferenceBackend(std::string id, FrontendConfig frontend, ReferenceSpec spec,
                                   Vocabulary vocab, ParamSet params)
    : id_(std::move(id)),
      frontend_(frontend),
      spec_(std::move(spec)),
      vocab_(std::move(vocab)),
      params_(std::move(params)) {
  spec_.validate();
  if (params_.count() != reference_model::count_params(spec_, frontend_.n_mels, vocab_.size())) {
    throw DataError("backend " + id_ + ": parameter set does not match its spec");
  }
}

TokenSequence ReferenceBackend::tokenize(const std::string& text,
                                         const std::string& language) const {
  if (vocab_.language_id(language) < 0) {
    throw ConfigError("backend " + id_ + " has no language '" + language + "'");
  }
  TokenSequence y;
  y.language = language;
  y.text = backend_text(text);
  for (char32_t c : utf8_decode(y.text)) {
    const int id = vocab_.char_id(c);
    if (id < 0) {
      throw ConfigError("backend " + id_ + ": character '" + utf8_encode(std::u32string(1, c)) +
                        "' is outside the vocabulary");
    }
    y.ids.push_back(id);
  }
  return y;
}

LossResult ReferenceBackend::ce_loss(const MelSpectrogram& m, const TokenSequence& y,
                                     bool want_grad) const {
  count_loss();
  check_input(m);
  for (int id : y.ids) {
    if (!vocab_.is_char(id)) throw ConfigError("backend " + id_ + ": token id outside vocabulary");
  }
  LossResult r;
  if (!want_grad) {
    ag::NoGradGuard no_grad;
    ParamBinding bind(params_, false);
    r.loss = reference_model::loss(spec_, vocab_, bind, ag::constant_ref(m.values), y,
                                   frontend_.silence_value())
                 ->scalar();
  } else {
    ParamBinding bind(params_, false);
    ag::Var input = ag::parameter(m.values);
    ag::Var l = reference_model::loss(spec_, vocab_, bind, input, y, frontend_.silence_value());
    r.loss = l->scalar();
    if (std::isfinite(r.loss)) {
      ag::backward(l);
      r.input_grad = input->grad.size() ? input->grad : Matrix::Zero(m.values.rows(), m.values.cols());
    }
  }
  if (!std::isfinite(r.loss)) {
    throw NumericError("backend " + id_ + ": non-finite cross entropy (" + std::to_string(r.loss) +
                       ") for " + std::to_string(m.n_frames()) + " frames, " +
                       std::to_string(y.size()) + " tokens");
  }
  return r;
}

std::string ReferenceBackend::decode(const MelSpectrogram& m, const DecodeConfig& d) const {
  count_decode();
  d.validate();
  check_input(m);
  const int lang = vocab_.language_id(d.language);
  if (lang < 0) throw ConfigError("backend " + id_ + " has no language '" + d.language + "'");
  const auto tokens = reference_model::beam_search(spec_, vocab_, params_, m.values, lang,
                                                   d.beam_size, d.max_tokens,
                                                   frontend_.silence_value());
  std::u32string text;
  for (int t : tokens) text.push_back(vocab_.char_at(t));
  return utf8_encode(text);
}

void ReferenceBackend::save(const std::filesystem::path& path,
                            const nlohmann::json& provenance) const {
  nlohmann::json meta = {{"kind", "backend"},
                         {"backend_kind", "reference"},
                         {"id", id_},
                         {"frontend", frontend_.to_json()},
                         {"spec", spec_.to_json()},
                         {"vocabulary", vocab_.to_json()},
                         {"fingerprint", fingerprint()},
                         {"provenance", provenance}};
  write_checkpoint(path, meta, params_.tensors());
}

std::unique_ptr<ReferenceBackend> ReferenceBackend::load(const std::filesystem::path& path) {
  CheckpointData data = read_checkpoint(path);
  if (data.meta.value("kind", "") != "backend") {
    throw DataError("not a backend checkpoint: " + path.string());
  }
  std::unique_ptr<ReferenceBackend> b;
  try {
    ParamSet params;
    for (auto& [name, m] : data.tensors) params.add(name, std::move(m));
    b = std::make_unique<ReferenceBackend>(
        data.meta.at("id").get<std::string>(), FrontendConfig::from_json(data.meta.at("frontend")),
        ReferenceSpec::from_json(data.meta.at("spec")),
        Vocabulary::from_json(data.meta.at("vocabulary")), std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad backend checkpoint " + path.string() + ": " + e.what());
  }
  const std::string stored = data.meta.value("fingerprint", "");
  if (!stored.empty() && stored != b->fingerprint()) {
    throw DataError("backend checkpoint " + path.string() + " fails its fingerprint check");
  }
  return b;
}

// ---------------------------------------------------------------------------
// Reference training

nlohmann::json BackendTrainReport::to_json() const {
  return {{"epoch_loss", epoch_loss},
          {"heldout_wer", heldout_wer},
          {"passed", passed},
          {"train_utterances", train_utterances},
          {"heldout_utterances", heldout_utterances},
          {"wall_seconds", wall_seconds}};
}

BackendTrainResult train_reference_backend(const std::string& id,
                                           const std::vector<Utterance>& train,
                                           const std::vector<Utterance>& heldout,
                                           const FrontendConfig& frontend,
                                           const ReferenceSpec& spec, double wer_bar,
                                           int beam_size, bool verbose) {
  spec.validate();
  if (train.empty()) throw DataError("reference backend training needs at least one utterance");
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Utterance> all = train;
  all.insert(all.end(), heldout.begin(), heldout.end());
  const Vocabulary vocab = Vocabulary::from_transcripts(all);
  ParamSet params = reference_model::init_params(spec, frontend.n_mels, vocab.size(), spec.seed);

  // Tokenize once with a throwaway backend-free path.
  std::vector<TokenSequence> targets;
  for (const auto& u : train) {
    if (u.features.n_mels() != frontend.n_mels) {
      throw ConfigError("utterance " + u.id + " does not match the backend frontend");
    }
    TokenSequence y;
    y.language = u.language;
    y.text = backend_text(u.transcript);
    for (char32_t c : utf8_decode(y.text)) y.ids.push_back(vocab.char_id(c));
    targets.push_back(std::move(y));
  }

  Adam adam;
  BackendTrainReport report;
  report.train_utterances = static_cast<int>(train.size());
  report.heldout_utterances = static_cast<int>(heldout.size());
  const double silence = frontend.silence_value();
  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    const double lr = spec.learning_rate * std::pow(1.0 - spec.lr_decay_per_epoch, epoch);
    Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(epoch) + 1));
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(spec.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(spec.batch_size));
      GradMap grads;
      for (size_t k = start; k < end; ++k) {
        const auto& u = train[order[k]];
        ParamBinding bind(params, true);
        ag::Var l = reference_model::loss(spec, vocab, bind, ag::constant_ref(u.features.values),
                                          targets[order[k]], silence);
        loss_sum += l->scalar();
        ag::backward(l, 1.0 / static_cast<double>(end - start));
        for (auto& [name, g] : bind.gradients()) {
          auto it = grads.find(name);
          if (it == grads.end()) {
            grads.emplace(name, std::move(g));
          } else {
            it->second += g;
          }
        }
      }
      if (!all_finite(grads)) continue;
      clip_global_norm(grads, spec.clip_norm);
      adam.step(params, grads, lr);
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(train.size()));
    if (verbose) {
      std::fprintf(stderr, "[train-backend] epoch %d lr %.6f loss %.4f\n", epoch, lr,
                   report.epoch_loss.back());
    }
  }
  params.round_to_float32();
  auto backend = std::make_unique<ReferenceBackend>(id, frontend, spec, vocab, std::move(params));

  WerBreakdown total;
  DecodeConfig d;
  d.beam_size = beam_size;
  for (const auto& u : heldout) {
    d.language = u.language;
    total += wer(u.transcript, backend->decode(u.features, d));
  }
  report.heldout_wer = total.wer();
  report.passed = heldout.empty() ? false : report.heldout_wer <= wer_bar;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(backend), report};
}

// ---------------------------------------------------------------------------
// External shim

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  return out + "'";
}

class TempDir {
 public:
  TempDir() {
    std::string templ = (std::filesystem::temp_directory_path() / "plcadapt-shim-XXXXXX").string();
    if (mkdtemp(templ.data()) == nullptr) throw DataError("cannot create a temporary directory");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace

ExternalShimBackend::ExternalShimBackend(std::string id, std::string command,
                                         FrontendConfig frontend, int vocab_size)
    : id_(std::move(id)), command_(std::move(command)), frontend_(frontend), vocab_size_(vocab_size) {
  if (command_.empty()) throw ConfigError("external backend " + id_ + " has no command");
}

std::string ExternalShimBackend::run(const std::vector<std::string>& args) const {
  std::string cmd = command_;
  for (const auto& a : args) cmd += " " + shell_quote(a);
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw DataError("cannot start external backend " + id_);
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
  const int status = pclose(pipe);
  if (status != 0) {
    throw DataError("external backend " + id_ + " failed (" + args.front() + ", status " +
                    std::to_string(status) + ")");
  }
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out;
}

TokenSequence ExternalShimBackend::tokenize(const std::string& text,
                                            const std::string& language) const {
  if (!is_language_tag(language)) throw ConfigError("bad language tag '" + language + "'");
  TokenSequence y;
  y.language = language;
  y.text = backend_text(text);
  for (char32_t c : utf8_decode(y.text)) y.ids.push_back(static_cast<int>(c));
  return y;
}

LossResult ExternalShimBackend::ce_loss(const MelSpectrogram& m, const TokenSequence& y,
                                        bool want_grad) const {
  count_loss();
  check_input(m);
  TempDir dir;
  const auto mel = dir.path() / "input.mel";
  const auto grad = dir.path() / "grad.mel";
  write_mel(mel, m);
  LossResult r;
  const std::string out =
      run({"loss", mel.string(), y.language, y.text, want_grad ? grad.string() : "-"});
  try {
    r.loss = std::stod(out);
  } catch (const std::exception&) {
    throw DataError("external backend " + id_ + " returned a malformed loss: " + out);
  }
  if (!std::isfinite(r.loss)) throw NumericError("external backend " + id_ + ": non-finite loss");
  if (want_grad) {
    MelSpectrogram g = read_mel(grad);
    if (g.n_frames() != m.n_frames() || g.n_mels() != m.n_mels()) {
      throw DataError("external backend " + id_ + " returned a gradient of the wrong shape");
    }
    r.input_grad = std::move(g.values);
  }
  return r;
}

std::string ExternalShimBackend::decode(const MelSpectrogram& m, const DecodeConfig& d) const {
  count_decode();
  d.validate();
  check_input(m);
  TempDir dir;
  const auto mel = dir.path() / "input.mel";
  write_mel(mel, m);
  return run({"decode", mel.string(), d.language, std::to_string(d.beam_size)});
}

std::string ExternalShimBackend::fingerprint() const { return run({"fingerprint"}); }

// ---------------------------------------------------------------------------
// Registry

std::unique_ptr<AsrBackend> open_backend(const BackendEntry& entry) {
  std::unique_ptr<AsrBackend> b;
  if (entry.kind == "reference") {
    if (entry.checkpoint.empty()) {
      throw ConfigError("backend " + entry.id + " has no checkpoint path");
    }
    auto ref = ReferenceBackend::load(entry.checkpoint);
    if (ref->id() != entry.id) {
      throw ConfigError("backend checkpoint " + entry.checkpoint + " holds '" + ref->id() +
                        "', registered as '" + entry.id + "'");
    }
    b = std::move(ref);
  } else if (entry.kind == "external-shim") {
    if (entry.contract_version != ExternalShimBackend::kContractVersion) {
      throw ConfigError("backend " + entry.id + " declares contract version " +
                        std::to_string(entry.contract_version) + ", supported is " +
                        std::to_string(ExternalShimBackend::kContractVersion));
    }
    b = std::make_unique<ExternalShimBackend>(entry.id, entry.command, entry.frontend);
  } else {
    throw ConfigError("backend " + entry.id + " has unknown kind '" + entry.kind + "'");
  }
  if (!(b->frontend() == entry.frontend)) {
    throw ConfigError("backend " + entry.id + ": checkpoint frontend differs from the registry");
  }
  if (!entry.expected_fingerprint.empty() && b->fingerprint() != entry.expected_fingerprint) {
    throw DataError("backend " + entry.id + " fingerprint does not match the registry");
  }
  return b;
}

}  // namespace plcadapt

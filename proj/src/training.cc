// src/training.cc

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

#include "plcadapt/training.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "plcadapt/errors.h"
#include "plcadapt/rng.h"

namespace plcadapt {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kCeOnly:
      return "ce_only";
    case LossMode::kL1Only:
      return "l1_only";
    case LossMode::kCombined:
      return "combined";
  }
  return "combined";
}

LossMode parse_loss_mode(const std::string& s) {
  if (s == "ce" || s == "ce_only") return LossMode::kCeOnly;
  if (s == "l1" || s == "l1_only") return LossMode::kL1Only;
  if (s == "combined") return LossMode::kCombined;
  throw ConfigError("unknown loss mode '" + s + "' (ce, l1 or combined)");
}

double TrainConfig::effective_lambda() const {
  switch (loss_mode) {
    case LossMode::kCeOnly:
      return 1.0;
    case LossMode::kL1Only:
      return 0.0;
    case LossMode::kCombined:
      return lambda_ce;
  }
  return lambda_ce;
}

void TrainConfig::validate() const {
  if (!(lambda_ce >= 0.0 && lambda_ce <= 1.0)) throw ConfigError("train: lambda_ce must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (!(lr_decay_per_epoch >= 0.0 && lr_decay_per_epoch < 1.0)) {
    throw ConfigError("train: lr_decay_per_epoch must lie in [0, 1)");
  }
  if (epochs < 0 || batch_size < 1) throw ConfigError("train: epochs >= 0 and batch_size >= 1 required");
  if (max_consecutive_skips < 1) throw ConfigError("train: max_consecutive_skips must be >= 1");
  if (max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
  if (backend_id.empty()) throw ConfigError("train: backend_id is required");
  corruption.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lambda_ce", lambda_ce},
          {"effective_lambda", effective_lambda()},
          {"learning_rate", learning_rate},
          {"lr_decay_per_epoch", lr_decay_per_epoch},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"corruption", corruption.to_json()},
          {"backend_id", backend_id},
          {"loss_mode", to_string(loss_mode)},
          {"seed", seed},
          {"clip_norm", clip_norm},
          {"max_consecutive_skips", max_consecutive_skips},
          {"max_steps", max_steps}};
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  return cfg.learning_rate * std::pow(1.0 - cfg.lr_decay_per_epoch, epoch);
}

double compose_loss(double lambda, double ce, double l1) {
  if (lambda == 0.0) return l1;
  if (lambda == 1.0) return ce;
  return lambda * ce + (1.0 - lambda) * l1;
}

nlohmann::json LossRecord::to_json() const {
  return {{"step", step},
          {"epoch", epoch},
          {"total", number_or_null(loss.total)},
          {"ce", number_or_null(loss.ce)},
          {"l1", number_or_null(loss.l1)},
          {"skipped", skipped}};
}

LossGraph loss_graph(const AsrBackend& b, const AdapterParams& p, ParamBinding& bind,
                     const TrainExample& ex, double lambda) {
  const MelSpectrogram& clean = *ex.clean;
  if (clean.n_frames() != ex.corrupted.n_frames() || clean.n_mels() != ex.corrupted.n_mels()) {
    throw DataError("clean and corrupted spectrograms differ in shape");
  }
  const int frames = ex.corrupted.n_frames();
  const ag::Var out = adapter_forward(p, bind, ag::constant(as_image(ex.corrupted)), frames);
  LossGraph g;
  g.terms.ce = kNaN;
  ag::Var l1;
  ag::Var ce;
  const Matrix clean_image = as_image(clean);
  if (lambda < 1.0) {
    l1 = ag::mean_abs_diff(out, ag::constant(clean_image));
    g.terms.l1 = l1->scalar();
  } else {
    // Logged only; never part of the gradient.
    g.terms.l1 = (out->val() - clean_image).cwiseAbs().mean();
  }
  if (lambda > 0.0) {
    const MelSpectrogram adapted =
        from_image(out->val(), frames, clean.n_mels(), ex.corrupted.frame_hop);
    LossResult r = b.ce_loss(adapted, ex.target, true);
    Matrix grad = Eigen::Map<const Matrix>(r.input_grad.data(), 1, r.input_grad.size());
    ce = ag::external_loss(out, r.loss, std::move(grad));
    g.terms.ce = r.loss;
  }
  if (lambda == 0.0) {
    g.total = l1;
  } else if (lambda == 1.0) {
    g.total = ce;
  } else {
    g.total = ag::add(ag::scale(ce, lambda), ag::scale(l1, 1.0 - lambda));
  }
  g.terms.total = g.total->scalar();
  return g;
}

LossTerms combined_loss(const AsrBackend& b, const AdapterParams& p, const MelSpectrogram& clean,
                        const MelSpectrogram& corrupted, const TokenSequence& y, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (clean.n_frames() != corrupted.n_frames() || clean.n_mels() != corrupted.n_mels()) {
    throw DataError("clean and corrupted spectrograms differ in shape");
  }
  const MelSpectrogram adapted = adapt(p, corrupted);
  LossTerms t;
  t.l1 = (adapted.values - clean.values).cwiseAbs().mean();
  t.ce = lambda > 0.0 ? b.ce_loss(adapted, y, false).loss : kNaN;
  if (!std::isfinite(t.l1)) throw NumericError("combined loss: L1 term is not finite");
  if (lambda > 0.0 && !std::isfinite(t.ce)) throw NumericError("combined loss: CE term is not finite");
  t.total = compose_loss(lambda, t.ce, t.l1);
  if (!std::isfinite(t.total)) throw NumericError("combined loss: total is not finite");
  return t;
}

BatchGradient batch_gradient(const AsrBackend& b, const AdapterParams& p,
                             const std::vector<TrainExample>& batch, double lambda) {
  BatchGradient out;
  if (batch.empty()) return out;
  const double w = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  double ce = 0.0;
  double l1 = 0.0;
  for (const auto& ex : batch) {
    ParamBinding bind(p.params, true);
    LossGraph g = loss_graph(b, p, bind, ex, lambda);
    ag::backward(g.total, w);
    total += w * g.terms.total;
    ce += w * g.terms.ce;
    l1 += w * g.terms.l1;
    for (auto& [name, grad] : bind.gradients()) {
      auto it = out.grads.find(name);
      if (it == out.grads.end()) {
        out.grads.emplace(name, std::move(grad));
      } else {
        it->second += grad;
      }
    }
  }
  out.mean = {total, ce, l1};
  return out;
}

TrainState init_train_state(const AdapterParams& adapter, const TrainConfig& cfg) {
  TrainState s;
  s.adapter = adapter;
  s.current_lr = lr_at_epoch(cfg, 0);
  return s;
}

void train_step(TrainState& state, const std::vector<TrainExample>& batch, const TrainConfig& cfg,
                const AsrBackend& b) {
  LossRecord rec;
  rec.step = state.step;
  rec.epoch = state.epoch;
  BatchGradient bg;
  bool ok = true;
  std::string why;
  try {
    bg = batch_gradient(b, state.adapter, batch, cfg.effective_lambda());
  } catch (const NumericError& e) {
    ok = false;
    why = e.what();
  }
  if (ok && !std::isfinite(bg.mean.total)) {
    ok = false;
    why = "non-finite loss";
  }
  if (ok && !all_finite(bg.grads)) {
    ok = false;
    why = "non-finite gradient";
  }
  rec.loss = ok ? bg.mean : LossTerms{kNaN, kNaN, kNaN};
  rec.skipped = !ok;
  state.history.push_back(rec);
  ++state.step;
  if (!ok) {
    ++state.skipped_steps;
    ++state.consecutive_skips;
    std::fprintf(stderr, "[train] step %lld skipped: %s\n", static_cast<long long>(rec.step),
                 why.c_str());
    if (state.consecutive_skips >= cfg.max_consecutive_skips) {
      throw NumericError("training aborted after " + std::to_string(state.consecutive_skips) +
                         " consecutive skipped steps (" + why + ")");
    }
    return;
  }
  state.consecutive_skips = 0;
  clip_global_norm(bg.grads, cfg.clip_norm);
  state.optimizer.step(state.adapter.params, bg.grads, state.current_lr);
}

fs::path epoch_checkpoint_path(const fs::path& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
  return dir / name;
}

namespace {

nlohmann::json state_json(const TrainState& s) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : s.history) hist.push_back(r.to_json());
  return {{"epoch", s.epoch},
          {"step", s.step},
          {"current_lr", s.current_lr},
          {"skipped_steps", s.skipped_steps},
          {"optimizer_steps", s.optimizer.steps()},
          {"history", hist}};
}

double json_number(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

void save_state(const fs::path& path, const TrainState& s, const TrainConfig& cfg,
                const AsrBackend& b, const std::string& fingerprint, const nlohmann::json& prov) {
  nlohmann::json p = prov.is_null() ? nlohmann::json::object() : prov;
  p["train"] = cfg.to_json();
  p["lambda"] = cfg.effective_lambda();
  p["backend_id"] = b.id();
  p["backend_fingerprint"] = fingerprint;
  p["steps"] = s.step;
  p["optimizer"] = s.optimizer.config().to_json();
  p["training_state"] = state_json(s);
  std::map<std::string, Matrix> extra;
  for (auto& [name, m] : s.optimizer.state_tensors()) extra.emplace("opt/" + name, m);
  save_adapter(path, s.adapter, p, extra);
}

// Latest per-epoch checkpoint in `dir`, or -1.
int latest_epoch(const fs::path& dir, int max_epochs) {
  int found = -1;
  for (int e = 0; e < max_epochs; ++e) {
    if (fs::exists(epoch_checkpoint_path(dir, e))) found = e;
  }
  return found;
}

}  // namespace

TrainResult train_loop(const std::vector<Utterance>& data, const TrainConfig& cfg,
                       const AdapterParams& init, const AsrBackend& b,
                       const FrontendConfig& frontend, const TrainOptions& options) {
  cfg.validate();
  if (b.id() != cfg.backend_id) {
    throw ConfigError("training is configured for backend '" + cfg.backend_id + "', got '" + b.id() + "'");
  }
  if (!(b.frontend() == frontend)) throw ConfigError("backend frontend differs from the experiment frontend");
  if (frontend.n_mels != init.config.n_mels) {
    throw ConfigError("adapter n_mels differs from the frontend");
  }
  if (data.empty()) throw DataError("training data is empty");
  const auto t0 = std::chrono::steady_clock::now();
  const std::string fp_before = b.fingerprint();
  if (!options.expected_fingerprint.empty() && fp_before != options.expected_fingerprint) {
    throw DataError("backend " + b.id() + " fingerprint differs from the registered one");
  }
  const uint64_t calls_before = b.loss_calls();
  const double lambda = cfg.effective_lambda();

  std::vector<TokenSequence> targets;
  targets.reserve(data.size());
  for (const auto& u : data) {
    if (u.features.n_mels() != frontend.n_mels) {
      throw DataError("utterance " + u.id + " has the wrong number of mel bins");
    }
    targets.push_back(b.tokenize(u.transcript, u.language));
  }

  TrainState state = init_train_state(init, cfg);
  int first_epoch = 0;
  if (options.resume && !options.checkpoint_dir.empty()) {
    const int last = latest_epoch(options.checkpoint_dir, cfg.epochs);
    if (last >= 0) {
      LoadedAdapter la = load_adapter(epoch_checkpoint_path(options.checkpoint_dir, last));
      const nlohmann::json& prov = la.provenance;
      if (prov.value("train", nlohmann::json()) != cfg.to_json()) {
        throw ConfigError("checkpoint in " + options.checkpoint_dir.string() +
                          " was written with a different training config");
      }
      if (!(la.adapter.config == init.config)) {
        throw ConfigError("checkpoint adapter config differs from the requested one");
      }
      const nlohmann::json& st = prov.at("training_state");
      state.adapter = std::move(la.adapter);
      std::map<std::string, Matrix> opt;
      for (auto& [name, m] : la.extra_tensors) {
        if (name.starts_with("opt/")) opt.emplace(name.substr(4), std::move(m));
      }
      state.optimizer.load_state(opt, st.at("optimizer_steps").get<int64_t>());
      state.step = st.at("step").get<int64_t>();
      state.skipped_steps = st.at("skipped_steps").get<int64_t>();
      for (const auto& r : st.at("history")) {
        LossRecord rec;
        rec.step = r.at("step");
        rec.epoch = r.at("epoch");
        rec.loss = {json_number(r.at("total")), json_number(r.at("ce")), json_number(r.at("l1"))};
        rec.skipped = r.at("skipped");
        state.history.push_back(rec);
      }
      first_epoch = last + 1;
      if (options.verbose) std::fprintf(stderr, "[train] resuming after epoch %d\n", last);
    }
  }

  nlohmann::json epochs = nlohmann::json::array();
  std::vector<double> lr_trace;
  for (int e = 0; e < first_epoch; ++e) lr_trace.push_back(lr_at_epoch(cfg, e));
  bool budget_hit = cfg.max_steps > 0 && state.step >= cfg.max_steps;
  std::vector<size_t> order(data.size());
  for (int epoch = first_epoch; epoch < cfg.epochs && !budget_hit; ++epoch) {
    state.epoch = epoch;
    state.current_lr = lr_at_epoch(cfg, epoch);
    lr_trace.push_back(state.current_lr);
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, "order/" + std::to_string(epoch)));
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    CorruptionConfig cc = cfg.corruption;
    cc.seed = derive_seed(cfg.corruption.seed, static_cast<uint64_t>(epoch));

    const size_t first_record = state.history.size();
    for (size_t start = 0; start < order.size() && !budget_hit;
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<TrainExample> batch;
      for (size_t k = start; k < end; ++k) {
        const Utterance& u = data[order[k]];
        const LossMask mask = sample_loss_mask(u.features.n_frames(), cc, u.id);
        batch.push_back({&u.features, apply_mask(u.features, mask, cc.fill_policy), targets[order[k]]});
      }
      train_step(state, batch, cfg, b);
      budget_hit = cfg.max_steps > 0 && state.step >= cfg.max_steps;
    }

    std::vector<double> tot, ce, l1;
    int64_t skipped = 0;
    for (size_t i = first_record; i < state.history.size(); ++i) {
      const auto& r = state.history[i];
      if (r.skipped) {
        ++skipped;
        continue;
      }
      tot.push_back(r.loss.total);
      if (std::isfinite(r.loss.ce)) ce.push_back(r.loss.ce);
      l1.push_back(r.loss.l1);
    }
    epochs.push_back({{"epoch", epoch},
                      {"lr", state.current_lr},
                      {"steps", state.history.size() - first_record},
                      {"skipped", skipped},
                      {"mean_total", number_or_null(mean_of(tot))},
                      {"mean_ce", number_or_null(mean_of(ce))},
                      {"mean_l1", number_or_null(mean_of(l1))}});
    if (options.verbose) {
      std::fprintf(stderr, "[train] epoch %d lr %.6g total %.4f ce %.4f l1 %.4f\n", epoch,
                   state.current_lr, mean_of(tot), mean_of(ce), mean_of(l1));
    }
    if (!options.checkpoint_dir.empty()) {
      fs::create_directories(options.checkpoint_dir);
      save_state(epoch_checkpoint_path(options.checkpoint_dir, epoch), state, cfg, b, fp_before,
                 options.provenance);
    }
  }

  const std::string fp_after = b.fingerprint();
  if (fp_after != fp_before) {
    throw NumericError("backend " + b.id() + " parameters changed during training");
  }
  if (!options.output.empty()) {
    if (options.output.has_parent_path()) fs::create_directories(options.output.parent_path());
    save_state(options.output, state, cfg, b, fp_before, options.provenance);
  }

  TrainResult result;
  result.adapter = state.adapter;
  result.report = {
      {"loss_mode", to_string(cfg.loss_mode)},
      {"lambda", lambda},
      {"train", cfg.to_json()},
      {"epochs", epochs},
      {"lr_trace", lr_trace},
      {"steps", state.step},
      {"skipped_steps", state.skipped_steps},
      {"backend_id", b.id()},
      {"backend_fingerprint_before", fp_before},
      {"backend_fingerprint_after", fp_after},
      {"backend_loss_calls", b.loss_calls() - calls_before},
      {"adapter_param_count", state.adapter.params.count()},
      {"resumed_from_epoch", first_epoch > 0 ? nlohmann::json(first_epoch - 1) : nlohmann::json()},
      {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
      {"provenance", options.provenance.is_null() ? nlohmann::json::object() : options.provenance}};
  result.state = std::move(state);
  return result;
}

}  // namespace plcadapt

// src/cli.cc

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

#include "plcadapt/cli.h"

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "plcadapt/adapter.h"
#include "plcadapt/asr_backend.h"
#include "plcadapt/audio_io.h"
#include "plcadapt/config.h"
#include "plcadapt/corruption.h"
#include "plcadapt/dataset.h"
#include "plcadapt/errors.h"
#include "plcadapt/evaluation.h"
#include "plcadapt/io_util.h"
#include "plcadapt/synth.h"
#include "plcadapt/training.h"

namespace plcadapt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  int workers = 1;
  bool force = false;
  bool verbose = false;
};

ExperimentConfig config_of(const Common& c) {
  return c.config.empty() ? default_config(true) : load_config(c.config);
}

json base_provenance(const ExperimentConfig& cfg) {
  return {{"config_hash", cfg.hash()}, {"seed", cfg.seed}};
}

std::string file_hash(const fs::path& p) { return sha256_hex(read_file(p)); }

std::vector<double> parse_plrs(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad PLR value '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty PLR list");
  return out;
}

bool skip_existing(const fs::path& p, bool force) {
  if (!force && fs::exists(p)) {
    std::cout << p.string() << " exists, skipping (use --force to overwrite)\n";
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

int cmd_synth(const fs::path& out, SynthConfig sc, bool force) {
  if (skip_existing(out / "manifest.jsonl", force)) return 0;
  const DatasetManifest m = write_synthetic_corpus(out, sc);
  std::cout << "wrote " << m.rows.size() << " utterances to " << (out / "manifest.jsonl").string() << "\n";
  return 0;
}

int cmd_make_manifest(const fs::path& root, const std::string& language, const fs::path& out,
                      bool force) {
  if (skip_existing(out, force)) return 0;
  DatasetManifest m = manifest_from_tree(root, language);
  write_manifest(out, m);
  std::cout << "wrote " << m.rows.size() << " rows to " << out.string() << "\n";
  return 0;
}

int cmd_corrupt(const Common& c, const fs::path& manifest_path, const std::string& plr_text,
                bool sample, const fs::path& out) {
  const ExperimentConfig cfg = config_of(c);
  const DatasetManifest m = load_manifest(manifest_path);
  json prov = base_provenance(cfg);
  prov["manifest"] = fs::absolute(manifest_path).string();
  prov["manifest_hash"] = file_hash(manifest_path);
  if (sample == !plr_text.empty()) throw ConfigError("corrupt: give exactly one of --plr or --sample");
  if (!sample) {
    FixedPlrOptions o{out, cfg.frontend, prov, c.workers, c.force};
    const auto copies = build_fixed_plr_testset(m, parse_plrs(plr_text), cfg.corruption, o);
    std::printf("%-10s %8s %14s %14s %14s\n", "plr", "utts", "realized_mean", "realized_min",
                "realized_max");
    for (const auto& copy : copies) {
      double sum = 0, lo = 1, hi = 0;
      for (const auto& r : copy.manifest.rows) {
        const double v = r.realized_plr.value_or(0.0);
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double n = static_cast<double>(std::max<size_t>(1, copy.manifest.rows.size()));
      std::printf("%-10.3f %8zu %14.5f %14.5f %14.5f\n", copy.plr, copy.manifest.rows.size(),
                  sum / n, copy.manifest.rows.empty() ? 0.0 : lo, hi);
    }
    return 0;
  }
  // One copy with a per-utterance rate drawn from the configured law.
  const fs::path dir = out / "sampled";
  if (skip_existing(dir / "manifest.jsonl", c.force)) return 0;
  fs::create_directories(dir);
  const auto utts = load_utterances(m, cfg.frontend, c.workers);
  DatasetManifest copy;
  copy.id = m.id;
  double sum = 0.0;
  for (size_t i = 0; i < utts.size(); ++i) {
    const LossMask mask = sample_loss_mask(utts[i].features.n_frames(), cfg.corruption, utts[i].id);
    const fs::path mask_path = dir / (utts[i].id + ".mask.json");
    const fs::path mel_path = dir / (utts[i].id + ".mel");
    json p = prov;
    p["plr_distribution"] = cfg.corruption.plr_distribution.describe();
    write_file_atomic(mask_path, mask_to_json(mask, utts[i].id, cfg.corruption.seed, p).dump());
    write_mel(mel_path, apply_mask(utts[i].features, mask, cfg.corruption.fill_policy));
    ManifestRow r = m.rows[i];
    r.mask_path = mask_path.string();
    r.features_path = mel_path.string();
    r.realized_plr = realized_plr(mask);
    sum += *r.realized_plr;
    copy.rows.push_back(std::move(r));
  }
  write_manifest(dir / "manifest.jsonl", copy);
  std::printf("sampled copy: %zu utterances, mean realized PLR %.5f\n", copy.rows.size(),
              copy.rows.empty() ? 0.0 : sum / static_cast<double>(copy.rows.size()));
  return 0;
}

int cmd_train_backend(const Common& c, const fs::path& train_manifest, const fs::path& heldout_manifest,
                      const std::string& id, const fs::path& out, const fs::path& report_path) {
  const ExperimentConfig cfg = config_of(c);
  if (skip_existing(out, c.force)) return 0;
  const DatasetManifest tm = load_manifest(train_manifest);
  const DatasetManifest hm = load_manifest(heldout_manifest);
  const auto train = load_utterances(tm, cfg.frontend, c.workers);
  const auto held = load_utterances(hm, cfg.frontend, c.workers);
  auto result = train_reference_backend(id, train, held, cfg.frontend, cfg.reference,
                                        cfg.reference_wer_bar, cfg.eval.beam_size, c.verbose);
  json prov = base_provenance(cfg);
  prov["train_manifest_hash"] = file_hash(train_manifest);
  prov["heldout_manifest_hash"] = file_hash(heldout_manifest);
  prov["report"] = result.report.to_json();
  result.backend->save(out, prov);
  json report = result.report.to_json();
  report["id"] = id;
  report["fingerprint"] = result.backend->fingerprint();
  report["param_count"] = result.backend->params().count();
  report["wer_bar"] = cfg.reference_wer_bar;
  report["provenance"] = prov;
  report["provenance"].erase("report");
  const fs::path rp = report_path.empty() ? fs::path(out.string() + ".report.json") : report_path;
  write_file_atomic(rp, report.dump(2) + "\n");
  std::printf("backend %s: %zu parameters, held-out WER %.2f%% (bar %.2f%%), fingerprint %s\n",
              id.c_str(), result.backend->params().count(), 100 * result.report.heldout_wer,
              100 * cfg.reference_wer_bar, result.backend->fingerprint().c_str());
  if (!result.report.passed) {
    std::cerr << "error: backend training failed to reach the WER bar; see " << rp.string() << "\n";
    return static_cast<int>(ErrorKind::kNumeric);
  }
  return 0;
}

int cmd_train(const Common& c, const fs::path& manifest_path, const std::string& loss_mode,
              const std::string& backend_id, const fs::path& out, fs::path checkpoint_dir,
              const fs::path& report_path, bool no_resume) {
  ExperimentConfig cfg = config_of(c);
  if (!loss_mode.empty()) cfg.train.loss_mode = parse_loss_mode(loss_mode);
  if (!backend_id.empty()) cfg.train.backend_id = backend_id;
  cfg.train.validate();
  if (skip_existing(out, c.force)) return 0;
  // Pre-flight: registry, frontends and adapter layout before any data work.
  const BackendEntry& entry = cfg.backend(cfg.train.backend_id);
  if (!(entry.frontend == cfg.frontend)) {
    throw ConfigError("backend " + entry.id + " frontend differs from [frontend]");
  }
  if (cfg.adapter.n_mels != cfg.frontend.n_mels) throw ConfigError("adapter n_mels differs from [frontend]");
  const auto backend = open_backend(entry);
  const DatasetManifest m = load_manifest(manifest_path);
  const auto data = load_utterances(m, cfg.frontend, c.workers);

  const AdapterParams init = init_adapter(cfg.adapter, cfg.adapter_seed);
  std::cerr << "adapter parameters: " << count_params(cfg.adapter) << "\n";
  TrainOptions o;
  if (checkpoint_dir.empty()) checkpoint_dir = out.string() + ".epochs";
  if (c.force && !no_resume) fs::remove_all(checkpoint_dir);
  o.checkpoint_dir = checkpoint_dir;
  o.output = out;
  o.resume = !no_resume;
  o.verbose = c.verbose;
  o.expected_fingerprint = entry.expected_fingerprint;
  o.provenance = base_provenance(cfg);
  o.provenance["manifest"] = fs::absolute(manifest_path).string();
  o.provenance["manifest_hash"] = file_hash(manifest_path);
  o.provenance["adapter_seed"] = cfg.adapter_seed;
  const TrainResult r = train_loop(data, cfg.train, init, *backend, cfg.frontend, o);
  const fs::path rp = report_path.empty() ? fs::path(out.string() + ".report.json") : report_path;
  write_file_atomic(rp, r.report.dump(2) + "\n");
  const auto& ep = r.report.at("epochs");
  std::printf("trained %s adapter on %s: %lld steps, %lld skipped, final epoch loss %s\n",
              to_string(cfg.train.loss_mode).c_str(), backend->id().c_str(),
              static_cast<long long>(r.state.step), static_cast<long long>(r.state.skipped_steps),
              ep.empty() ? "n/a" : ep.back().at("mean_total").dump().c_str());
  return 0;
}

struct SystemArg {
  std::string name;
  std::string source;  // "baseline" or a checkpoint path
};

SystemArg parse_system(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError("--system expects NAME=baseline or NAME=CHECKPOINT, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& manifests,
                 const std::vector<std::string>& system_args, const std::vector<std::string>& bta_args,
                 const std::string& backend_id, const std::string& plr_text, const fs::path& out,
                 const std::string& stem) {
  ExperimentConfig cfg = config_of(c);
  if (!plr_text.empty()) cfg.eval.plrs = parse_plrs(plr_text);
  if (skip_existing(out / (stem + ".json"), c.force)) return 0;
  const std::string default_backend = backend_id.empty() ? cfg.train.backend_id : backend_id;
  DecodeConfig d;
  d.beam_size = cfg.eval.beam_size;

  std::vector<SystemUnderTest> systems;
  std::set<std::string> needed = {};
  for (const auto& text : system_args) {
    const SystemArg a = parse_system(text);
    SystemUnderTest s;
    s.id = a.name;
    s.decode = d;
    if (a.source == "baseline") {
      s.kind = SystemKind::kBaselineZeroFill;
      s.backend_id = default_backend;
    } else {
      LoadedAdapter la = load_adapter(a.source);
      s.kind = SystemKind::kAdapter;
      s.adapter_checkpoint = fs::absolute(a.source).string();
      s.train_backend_id = la.provenance.value("backend_id", default_backend);
      s.backend_id = s.train_backend_id;
      s.adapter = std::make_shared<AdapterParams>(std::move(la.adapter));
    }
    systems.push_back(std::move(s));
  }
  if (systems.empty()) throw ConfigError("evaluate: at least one --system is required");
  for (const auto& text : bta_args) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError("--bta expects TRAIN:EVAL backend ids");
    const std::string from = text.substr(0, colon);
    const std::string to = text.substr(colon + 1);
    const BackendEntry& a = cfg.backend(from);
    const BackendEntry& b = cfg.backend(to);
    if (!(a.frontend == b.frontend)) {
      throw ConfigError("--bta " + text + ": backends use different frontends");
    }
    std::vector<SystemUnderTest> extra;
    bool any = false;
    for (const auto& s : systems) {
      if (s.kind == SystemKind::kAdapter && s.train_backend_id == from && s.backend_id == from) {
        SystemUnderTest t = s;
        t.id = s.id + " (BTA " + to + ")";
        t.backend_id = to;
        extra.push_back(std::move(t));
        any = true;
      }
    }
    if (!any) throw ConfigError("--bta " + text + ": no adapter system was trained on " + from);
    SystemUnderTest base;
    base.id = "baseline@" + to;
    base.kind = SystemKind::kBaselineZeroFill;
    base.backend_id = to;
    base.decode = d;
    extra.push_back(std::move(base));
    for (auto& s : extra) {
      bool dup = false;
      for (const auto& e : systems) dup = dup || e.id == s.id;
      if (!dup) systems.push_back(std::move(s));
    }
  }

  std::map<std::string, std::unique_ptr<AsrBackend>> owned;
  std::map<std::string, const AsrBackend*> backends;
  for (const auto& s : systems) {
    for (const std::string& id : {s.backend_id, s.train_backend_id}) {
      if (id.empty() || owned.count(id)) continue;
      const BackendEntry& e = cfg.backend(id);
      if (!(e.frontend == cfg.frontend)) throw ConfigError("backend " + id + " frontend differs from [frontend]");
      owned[id] = open_backend(e);
      backends[id] = owned[id].get();
    }
  }

  std::vector<EvalDataset> datasets;
  json prov = base_provenance(cfg);
  json manifests_j = json::object();
  for (const auto& mp : manifests) {
    DatasetManifest m = load_manifest(mp);
    manifests_j[m.id] = {{"path", fs::absolute(mp).string()}, {"hash", file_hash(mp)}};
    datasets.push_back(load_eval_dataset(m, cfg.frontend, c.workers));
  }
  if (datasets.empty()) throw ConfigError("evaluate: at least one --manifest is required");
  prov["datasets"] = manifests_j;
  json adapters = json::object();
  for (const auto& s : systems) {
    if (s.kind == SystemKind::kAdapter && !adapters.contains(s.adapter_checkpoint)) {
      adapters[s.adapter_checkpoint] = load_adapter(s.adapter_checkpoint).provenance;
      adapters[s.adapter_checkpoint].erase("training_state");
    }
  }
  prov["adapter_checkpoints"] = adapters;

  SweepOptions so;
  so.mask_dir = out / "masks";
  so.frontend = cfg.frontend;
  so.normalizer = TextNormalizer::parse(cfg.eval.normalizer);
  so.workers = c.workers;
  so.force = c.force;
  so.provenance = prov;
  const EvalReport r = sweep(systems, datasets, cfg.eval.plrs, cfg.corruption, backends, so);
  const EmittedFiles files = emit_report(r, out, stem);
  std::cout << report_csv(r);
  std::cout << "wrote " << files.csv.string() << ", " << files.json.string() << " and "
            << files.svg.size() << " plot(s)\n";
  if (!r.failures.empty()) {
    for (const auto& f : r.failures) {
      std::cerr << "failed cell " << f.system << " / " << f.dataset << " / " << f.plr << ": " << f.error << "\n";
    }
    return static_cast<int>(ErrorKind::kData);
  }
  return 0;
}

int cmd_infer(const Common& c, const std::string& checkpoint, const fs::path& input,
              const std::string& backend_id, const fs::path& dump, const std::string& language,
              int beam) {
  const ExperimentConfig cfg = config_of(c);
  std::optional<LoadedAdapter> adapter;
  if (!checkpoint.empty()) adapter = load_adapter(checkpoint);
  std::string bid = backend_id;
  if (bid.empty()) bid = adapter ? adapter->provenance.value("backend_id", cfg.train.backend_id) : cfg.train.backend_id;
  const auto backend = open_backend(cfg.backend(bid));
  MelSpectrogram m;
  if (input.extension() == ".mel") {
    m = read_mel(input, cfg.frontend.frame_hop_seconds());  // bypasses the frontend
  } else {
    m = compute_logmel(read_audio(input), cfg.frontend);
  }
  if (adapter) m = adapt(adapter->adapter, m);
  if (!dump.empty()) write_mel(dump, m);
  DecodeConfig d;
  d.beam_size = beam > 0 ? beam : cfg.eval.beam_size;
  d.language = language;
  std::cout << backend->decode(m, d) << "\n";
  return 0;
}

int cmd_report(const fs::path& input, const fs::path& out) {
  const EvalReport r = EvalReport::from_json(json::parse(read_file(input)));
  const json& p = r.provenance;
  std::cout << "config hash:  " << p.value("config_hash", "?") << "\n";
  std::cout << "global seed:  " << p.value("seed", json()).dump() << "\n";
  std::cout << "normalizer:   " << p.value("normalizer", "?") << "\n";
  if (p.contains("corruption")) std::cout << "corruption:   " << p["corruption"].dump() << "\n";
  if (p.contains("backend_fingerprints")) {
    for (const auto& [id, fp] : p["backend_fingerprints"].items()) {
      std::cout << "backend " << id << ": " << fp.get<std::string>() << "\n";
    }
  }
  if (p.contains("datasets")) {
    for (const auto& [id, d] : p["datasets"].items()) {
      std::cout << "dataset " << id << ": " << d.value("path", "") << " (sha256 " << d.value("hash", "") << ")\n";
    }
  }
  if (p.contains("adapter_checkpoints")) {
    for (const auto& [path, a] : p["adapter_checkpoints"].items()) {
      std::cout << "adapter " << path << ": backend " << a.value("backend_id", "?") << ", lambda "
                << a.value("lambda", json()).dump() << ", steps " << a.value("steps", json()).dump()
                << ", training config hash " << a.value("config_hash", "?") << ", data "
                << a.value("manifest_hash", "?") << "\n";
    }
  }
  if (p.contains("mask_sets")) {
    for (const auto& [d, sets] : p["mask_sets"].items()) {
      for (const auto& [rate, h] : sets.items()) {
        std::cout << "masks " << d << "/" << rate << ": " << h.get<std::string>() << "\n";
      }
    }
  }
  std::cout << report_csv(r);
  if (!out.empty()) {
    const EmittedFiles f = emit_report(r, out, input.stem().string());
    std::cout << "wrote " << f.csv.string() << "\n";
  }
  return r.failures.empty() ? 0 : static_cast<int>(ErrorKind::kData);
}

// Serves a reference checkpoint through the external backend protocol.
int cmd_shim(const fs::path& checkpoint, const std::vector<std::string>& args) {
  const auto b = ReferenceBackend::load(checkpoint);
  if (args.empty()) throw ConfigError("shim: missing verb");
  const std::string& verb = args[0];
  if (verb == "fingerprint") {
    std::cout << b->fingerprint() << "\n";
  } else if (verb == "decode" && args.size() == 4) {
    DecodeConfig d;
    d.language = args[2];
    d.beam_size = std::stoi(args[3]);
    std::cout << b->decode(read_mel(args[1]), d) << "\n";
  } else if (verb == "loss" && args.size() == 5) {
    const MelSpectrogram m = read_mel(args[1]);
    const TokenSequence y = b->tokenize(args[3], args[2]);
    const bool want = args[4] != "-";
    LossResult r = b->ce_loss(m, y, want);
    if (want) write_mel(args[4], MelSpectrogram{r.input_grad, m.frame_hop});
    std::printf("%.17g\n", r.loss);
  } else {
    throw ConfigError("shim: unknown verb or wrong argument count");
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Packet-loss adaptation toolkit: corrupt, train, evaluate and inspect."};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "Experiment config (TOML)");
    sub->add_option("--workers", common.workers, "Parallel workers")->check(CLI::PositiveNumber);
    sub->add_flag("--force", common.force, "Overwrite existing outputs");
    sub->add_flag("-v,--verbose", common.verbose, "Progress output on stderr");
  };

  std::string manifest, heldout, out, plrs, loss_mode, backend, checkpoint_dir, report_path, id,
      input, dump, checkpoint, language = "en", stem = "report", root;
  std::vector<std::string> manifests, systems, btas, shim_args;
  bool sample = false, no_resume = false;
  int beam = 0;
  SynthConfig synth;

  auto* s_corrupt = app.add_subcommand("corrupt", "Build fixed-rate corrupted copies of a test set");
  add_common(s_corrupt);
  s_corrupt->add_option("-m,--manifest", manifest, "Clean manifest (JSONL)")->required();
  s_corrupt->add_option("--plr", plrs, "Comma-separated loss rates");
  s_corrupt->add_flag("--sample", sample, "Draw a rate per utterance from the configured law");
  s_corrupt->add_option("-o,--out", out, "Output directory")->required();

  auto* s_tb = app.add_subcommand("train-backend", "Train and freeze a reference recognizer");
  add_common(s_tb);
  s_tb->add_option("-m,--manifest", manifest, "Training manifest")->required();
  s_tb->add_option("--heldout", heldout, "Held-out manifest")->required();
  s_tb->add_option("--id", id, "Backend id")->required();
  s_tb->add_option("-o,--out", out, "Checkpoint path")->required();
  s_tb->add_option("--report", report_path, "Report path (default <out>.report.json)");

  auto* s_train = app.add_subcommand("train", "Train an adapter through a frozen backend");
  add_common(s_train);
  s_train->add_option("-m,--manifest", manifest, "Training manifest")->required();
  s_train->add_option("--loss-mode", loss_mode, "ce, l1 or combined");
  s_train->add_option("--backend", backend, "Backend id (default [train] backend_id)");
  s_train->add_option("-o,--out", out, "Final checkpoint path")->required();
  s_train->add_option("--checkpoint-dir", checkpoint_dir, "Per-epoch checkpoints (default <out>.epochs)");
  s_train->add_option("--report", report_path, "Report path (default <out>.report.json)");
  s_train->add_flag("--no-resume", no_resume, "Ignore existing per-epoch checkpoints");

  auto* s_eval = app.add_subcommand("evaluate", "WER-vs-PLR sweep over systems and datasets");
  add_common(s_eval);
  s_eval->add_option("-m,--manifest", manifests, "Clean test manifest(s)")->required();
  s_eval->add_option("--system", systems, "NAME=baseline or NAME=CHECKPOINT")->required();
  s_eval->add_option("--bta", btas, "TRAIN:EVAL backend pairing for adapter systems");
  s_eval->add_option("--backend", backend, "Backend for baseline systems");
  s_eval->add_option("--plr", plrs, "Override [eval] plrs");
  s_eval->add_option("-o,--out", out, "Output directory")->required();
  s_eval->add_option("--stem", stem, "Report file stem");

  auto* s_infer = app.add_subcommand("infer", "Transcribe one file, optionally through an adapter");
  add_common(s_infer);
  s_infer->add_option("--checkpoint", checkpoint, "Adapter checkpoint (omit for no adapter)");
  s_infer->add_option("-i,--input", input, "Audio (.wav/.flac) or feature (.mel) file")->required();
  s_infer->add_option("--backend", backend, "Backend id");
  s_infer->add_option("--dump-features", dump, "Write the adapted features here");
  s_infer->add_option("--language", language, "Forced language tag");
  s_infer->add_option("--beam", beam, "Beam size (default [eval] beam_size)");

  auto* s_report = app.add_subcommand("report", "Print the provenance chain of a report and re-emit it");
  s_report->add_option("-i,--input", input, "Report JSON")->required();
  s_report->add_option("-o,--out", out, "Re-emit CSV/JSON/SVG here");

  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic spoken-digit corpus");
  s_synth->add_option("-o,--out", out, "Output directory")->required();
  s_synth->add_option("-n,--count", synth.n_utterances, "Number of utterances");
  s_synth->add_option("--seed", synth.seed, "Seed");
  s_synth->add_option("--prefix", synth.id_prefix, "Utterance id prefix");
  s_synth->add_option("--language", synth.language, "Language tag");
  s_synth->add_flag("--force", common.force, "Overwrite");

  auto* s_mm = app.add_subcommand("make-manifest", "Build a manifest from a directory of audio + .txt files");
  s_mm->add_option("--root", root, "Corpus directory")->required();
  s_mm->add_option("--language", language, "Language tag");
  s_mm->add_option("-o,--out", out, "Manifest path")->required();
  s_mm->add_flag("--force", common.force, "Overwrite");

  auto* s_shim = app.add_subcommand("shim", "Serve a reference checkpoint through the external backend protocol");
  s_shim->add_option("--checkpoint", checkpoint, "Backend checkpoint")->required();
  s_shim->add_option("args", shim_args, "Protocol verb and arguments");
  s_shim->allow_extras(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
  }

  try {
    if (*s_corrupt) return cmd_corrupt(common, manifest, plrs, sample, out);
    if (*s_tb) return cmd_train_backend(common, manifest, heldout, id, out, report_path);
    if (*s_train) {
      return cmd_train(common, manifest, loss_mode, backend, out, checkpoint_dir, report_path, no_resume);
    }
    if (*s_eval) return cmd_evaluate(common, manifests, systems, btas, backend, plrs, out, stem);
    if (*s_infer) return cmd_infer(common, checkpoint, input, backend, dump, language, beam);
    if (*s_report) return cmd_report(input, out);
    if (*s_synth) return cmd_synth(out, synth, common.force);
    if (*s_mm) return cmd_make_manifest(root, language, out, common.force);
    if (*s_shim) return cmd_shim(checkpoint, shim_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace plcadapt

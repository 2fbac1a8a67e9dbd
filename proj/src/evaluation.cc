// src/evaluation.cc

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

#include "plcadapt/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <set>

#include "plcadapt/audio_io.h"
#include "plcadapt/errors.h"
#include "plcadapt/io_util.h"

namespace plcadapt {

namespace fs = std::filesystem;

namespace {

std::string kind_name(SystemKind k) {
  return k == SystemKind::kAdapter ? "adapter" : "baseline_zero_fill";
}

// Runs fn(i) for i in [0, n) on `workers` threads with a fixed assignment.
template <typename F>
void parallel_for(size_t n, int workers, F&& fn) {
  const size_t w = static_cast<size_t>(std::max(1, workers));
  if (w == 1 || n < 2) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> jobs;
  for (size_t t = 1; t < w; ++t) {
    jobs.push_back(std::async(std::launch::async, [&, t] {
      for (size_t i = t; i < n; i += w) fn(i);
    }));
  }
  for (size_t i = 0; i < n; i += w) fn(i);
  for (auto& j : jobs) j.get();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

nlohmann::json SystemUnderTest::to_json() const {
  nlohmann::json j = {{"id", id},
                      {"kind", kind_name(kind)},
                      {"backend_id", backend_id},
                      {"decode", decode.to_json()}};
  if (kind == SystemKind::kAdapter) {
    j["adapter_checkpoint"] = adapter_checkpoint;
    j["train_backend_id"] = train_backend_id;
    j["bta"] = is_bta();
    if (adapter) j["adapter_fingerprint"] = adapter->params.fingerprint();
  }
  return j;
}

MelSpectrogram system_input(const SystemUnderTest& s, const EvalItem& item, FillPolicy fill) {
  // Rate 0 bypasses masking entirely.
  MelSpectrogram x = item.mask ? apply_mask(*item.clean, *item.mask, fill) : *item.clean;
  if (s.kind == SystemKind::kAdapter) {
    if (!s.adapter) throw ConfigError("system " + s.id + " has no adapter loaded");
    x = adapt(*s.adapter, x);
  }
  return x;
}

std::vector<UtteranceResult> evaluate_system(const SystemUnderTest& s,
                                             const std::vector<EvalItem>& items,
                                             const AsrBackend& b, const TextNormalizer& normalizer,
                                             FillPolicy fill, int workers) {
  if (b.id() != s.backend_id) {
    throw ConfigError("system " + s.id + " expects backend '" + s.backend_id + "', got '" + b.id() + "'");
  }
  if (s.kind == SystemKind::kAdapter && s.adapter && s.adapter->config.n_mels != b.frontend().n_mels) {
    throw ConfigError("system " + s.id + ": adapter and backend frontends differ");
  }
  std::vector<UtteranceResult> out(items.size());
  parallel_for(items.size(), workers, [&](size_t i) {
    const EvalItem& it = items[i];
    UtteranceResult r;
    r.utterance_id = it.utterance_id;
    r.mask_hash = it.mask ? mask_hash(*it.mask) : "";
    DecodeConfig d = s.decode;
    d.language = it.language;
    r.hypothesis = b.decode(system_input(s, it, fill), d);
    try {
      r.breakdown = wer(it.transcript, r.hypothesis, normalizer);
    } catch (const UndefinedWerError&) {
      r.undefined = true;
    }
    out[i] = std::move(r);
  });
  return out;
}

ReportRow aggregate(const std::string& system, const std::string& dataset,
                    const std::string& language, double plr,
                    const std::vector<UtteranceResult>& results) {
  ReportRow row{system, dataset, language, plr, {}, 0, 0};
  for (const auto& r : results) {
    ++row.utterances;
    if (r.undefined) {
      ++row.undefined;
    } else {
      row.breakdown += r.breakdown;
    }
  }
  return row;
}

void EvalReport::canonicalize() {
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.dataset != b.dataset) return a.dataset < b.dataset;
    if (a.system != b.system) return a.system < b.system;
    return a.plr < b.plr;
  });
}

const ReportRow* EvalReport::find(const std::string& system, const std::string& dataset,
                                  double plr) const {
  for (const auto& r : rows) {
    if (r.system == system && r.dataset == dataset && std::abs(r.plr - plr) < 1e-9) return &r;
  }
  return nullptr;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) {
    rs.push_back({{"system", r.system},
                  {"dataset", r.dataset},
                  {"language", r.language},
                  {"plr", r.plr},
                  {"wer", r.wer()},
                  {"subs", r.breakdown.substitutions},
                  {"dels", r.breakdown.deletions},
                  {"ins", r.breakdown.insertions},
                  {"ref_words", r.breakdown.reference_words},
                  {"utts", r.utterances},
                  {"undefined", r.undefined}});
  }
  nlohmann::json fs_ = nlohmann::json::array();
  for (const auto& f : failures) {
    fs_.push_back({{"system", f.system}, {"dataset", f.dataset}, {"plr", f.plr}, {"error", f.error}});
  }
  return {{"rows", rs}, {"failures", fs_}, {"provenance", provenance}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    for (const auto& x : j.at("rows")) {
      ReportRow row;
      row.system = x.at("system");
      row.dataset = x.at("dataset");
      row.language = x.at("language");
      row.plr = x.at("plr");
      row.breakdown.substitutions = x.at("subs");
      row.breakdown.deletions = x.at("dels");
      row.breakdown.insertions = x.at("ins");
      row.breakdown.reference_words = x.at("ref_words");
      row.utterances = x.at("utts");
      row.undefined = x.value("undefined", int64_t{0});
      r.rows.push_back(std::move(row));
    }
    for (const auto& x : j.value("failures", nlohmann::json::array())) {
      r.failures.push_back({x.at("system"), x.at("dataset"), x.at("plr"), x.at("error")});
    }
    r.provenance = j.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

EvalDataset load_eval_dataset(const DatasetManifest& m, const FrontendConfig& frontend,
                              int workers) {
  EvalDataset d;
  d.manifest = m;
  std::sort(d.manifest.rows.begin(), d.manifest.rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) { return a.utterance_id < b.utterance_id; });
  d.clean.resize(d.manifest.rows.size());
  parallel_for(d.manifest.rows.size(), workers, [&](size_t i) {
    const ManifestRow& row = d.manifest.rows[i];
    if (row.features_path && !row.mask_path) {
      d.clean[i] = read_mel(*row.features_path, frontend.frame_hop_seconds());
    } else {
      d.clean[i] = compute_logmel(read_audio(row.audio_path), frontend);
    }
  });
  return d;
}

EvalReport sweep(const std::vector<SystemUnderTest>& systems,
                 const std::vector<EvalDataset>& datasets, const std::vector<double>& plrs,
                 const CorruptionConfig& cfg,
                 const std::map<std::string, const AsrBackend*>& backends,
                 const SweepOptions& options) {
  if (std::find(plrs.begin(), plrs.end(), 0.0) == plrs.end()) {
    throw ConfigError("sweep rates must include 0");
  }
  std::set<std::string> ids;
  for (const auto& s : systems) {
    if (!ids.insert(s.id).second) throw ConfigError("duplicate system id '" + s.id + "'");
    const auto it = backends.find(s.backend_id);
    if (it == backends.end() || it->second == nullptr) {
      throw ConfigError("system " + s.id + " uses unknown backend '" + s.backend_id + "'");
    }
    if (!(it->second->frontend() == options.frontend)) {
      throw ConfigError("system " + s.id + ": backend frontend differs from the experiment frontend");
    }
    if (s.kind == SystemKind::kAdapter && s.is_bta()) {
      const auto tr = backends.find(s.train_backend_id);
      if (tr != backends.end() && tr->second && !(tr->second->frontend() == it->second->frontend())) {
        throw ConfigError("system " + s.id + ": training and evaluation backends use different frontends");
      }
    }
  }

  EvalReport report;
  report.provenance = options.provenance;
  report.provenance["corruption"] = cfg.to_json();
  report.provenance["normalizer"] = options.normalizer.name();
  report.provenance["plrs"] = plrs;
  nlohmann::json sys = nlohmann::json::array();
  for (const auto& s : systems) sys.push_back(s.to_json());
  report.provenance["systems"] = sys;
  nlohmann::json fps = nlohmann::json::object();
  for (const auto& [id, b] : backends) {
    if (b) fps[id] = b->fingerprint();
  }
  report.provenance["backend_fingerprints"] = fps;
  nlohmann::json mask_sets = nlohmann::json::object();

  for (const EvalDataset& ds : datasets) {
    const std::string& did = ds.manifest.id;
    std::vector<double> lossy;
    for (double p : plrs) {
      if (p > 0.0) lossy.push_back(p);
    }
    FixedPlrOptions fo;
    fo.out_dir = options.mask_dir / did;
    fo.frontend = options.frontend;
    fo.provenance = options.provenance;
    fo.workers = options.workers;
    fo.force = options.force;
    std::map<double, FixedPlrCopy> copies;
    if (!lossy.empty()) {
      for (auto& c : build_fixed_plr_testset(ds.manifest, lossy, cfg, fo)) copies.emplace(c.plr, std::move(c));
    }
    const std::string language = ds.manifest.rows.empty() ? "" : ds.manifest.rows.front().language;
    for (double plr : plrs) {
      std::vector<EvalItem> items;
      std::string cell_error;
      try {
        std::map<std::string, std::string> mask_paths;
        if (plr > 0.0) {
          for (const auto& r : copies.at(plr).manifest.rows) {
            if (r.mask_path) mask_paths[r.utterance_id] = *r.mask_path;
          }
        }
        Sha256 set_hash;
        for (size_t i = 0; i < ds.manifest.rows.size(); ++i) {
          const ManifestRow& row = ds.manifest.rows[i];
          EvalItem it{row.utterance_id, row.transcript, row.language, &ds.clean[i], std::nullopt};
          if (plr > 0.0) {
            const auto mp = mask_paths.find(row.utterance_id);
            if (mp == mask_paths.end() || !fs::exists(mp->second)) {
              throw DataError("missing mask file for utterance " + row.utterance_id);
            }
            it.mask = read_mask(mp->second);
            if (it.mask->total_frames != ds.clean[i].n_frames()) {
              throw DataError("mask for utterance " + row.utterance_id + " has the wrong length");
            }
            set_hash.update(mask_hash(*it.mask));
          }
          items.push_back(std::move(it));
        }
        if (plr > 0.0) mask_sets[did][plr_dir_name(plr)] = set_hash.hex_digest();
      } catch (const Error& e) {
        cell_error = e.what();
      }
      for (const auto& s : systems) {
        if (!cell_error.empty()) {
          report.failures.push_back({s.id, did, plr, cell_error});
          continue;
        }
        try {
          const auto results = evaluate_system(s, items, *backends.at(s.backend_id),
                                               options.normalizer, cfg.fill_policy, options.workers);
          report.rows.push_back(aggregate(s.id, did, language, plr, results));
        } catch (const std::exception& e) {
          report.failures.push_back({s.id, did, plr, e.what()});
        }
      }
    }
  }
  report.provenance["mask_sets"] = mask_sets;
  report.canonicalize();
  return report;
}

std::string report_csv(const EvalReport& r) {
  std::string out = "system,dataset,language,plr,wer,subs,dels,ins,ref_words,utts\n";
  for (const auto& row : r.rows) {
    out += csv_field(row.system) + "," + csv_field(row.dataset) + "," + csv_field(row.language) +
           "," + fmt("%.4f", row.plr) + "," + fmt("%.6f", row.wer()) + "," +
           std::to_string(row.breakdown.substitutions) + "," +
           std::to_string(row.breakdown.deletions) + "," + std::to_string(row.breakdown.insertions) +
           "," + std::to_string(row.breakdown.reference_words) + "," +
           std::to_string(row.utterances) + "\n";
  }
  return out;
}

std::string report_svg(const EvalReport& r, const std::string& dataset) {
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  double max_plr = 0.0;
  double max_wer = 0.0;
  for (const auto& row : r.rows) {
    if (row.dataset != dataset) continue;
    series[row.system].emplace_back(row.plr, 100.0 * row.wer());
    max_plr = std::max(max_plr, row.plr);
    max_wer = std::max(max_wer, 100.0 * row.wer());
  }
  if (max_plr <= 0.0) max_plr = 1.0;
  max_wer = max_wer <= 0.0 ? 10.0 : std::ceil(max_wer / 10.0) * 10.0;
  const double w = 640, h = 400, left = 60, right = 170, top = 30, bottom = 50;
  const double pw = w - left - right;
  const double ph = h - top - bottom;
  auto px = [&](double plr) { return left + pw * plr / max_plr; };
  auto py = [&](double wer) { return top + ph * (1.0 - wer / max_wer); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
                  "viewBox=\"0 0 640 400\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<title>WER vs PLR: " + xml_escape(dataset) + "</title>\n";
  s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s += "<g class=\"axes\" stroke=\"black\">\n";
  s += "<line x1=\"" + fmt("%.1f", left) + "\" y1=\"" + fmt("%.1f", top + ph) + "\" x2=\"" +
       fmt("%.1f", left + pw) + "\" y2=\"" + fmt("%.1f", top + ph) + "\"/>\n";
  s += "<line x1=\"" + fmt("%.1f", left) + "\" y1=\"" + fmt("%.1f", top) + "\" x2=\"" +
       fmt("%.1f", left) + "\" y2=\"" + fmt("%.1f", top + ph) + "\"/>\n</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double pv = max_plr * i / 4.0;
    const double wv = max_wer * i / 4.0;
    s += "<text x=\"" + fmt("%.1f", px(pv)) + "\" y=\"" + fmt("%.1f", top + ph + 18) +
         "\" text-anchor=\"middle\">" + fmt("%.0f", 100 * pv) + "</text>\n";
    s += "<text x=\"" + fmt("%.1f", left - 6) + "\" y=\"" + fmt("%.1f", py(wv) + 4) +
         "\" text-anchor=\"end\">" + fmt("%.0f", wv) + "</text>\n";
  }
  s += "<text x=\"" + fmt("%.1f", left + pw / 2) + "\" y=\"" + fmt("%.1f", h - 10) +
       "\" text-anchor=\"middle\">PLR (%)</text>\n";
  s += "<text x=\"15\" y=\"" + fmt("%.1f", top + ph / 2) +
       "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " + fmt("%.1f", top + ph / 2) +
       ")\">WER (%)</text>\n";
  size_t k = 0;
  for (auto& [system, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* color = kColors[k % 8];
    s += "<polyline class=\"series\" data-system=\"" + xml_escape(system) +
         "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
      s += (i ? " " : "") + fmt("%.1f", px(pts[i].first)) + "," + fmt("%.1f", py(pts[i].second));
    }
    s += "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(k);
    s += "<line x1=\"" + fmt("%.1f", w - right + 10) + "\" y1=\"" + fmt("%.1f", ly) + "\" x2=\"" +
         fmt("%.1f", w - right + 30) + "\" y2=\"" + fmt("%.1f", ly) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt("%.1f", w - right + 35) + "\" y=\"" + fmt("%.1f", ly + 4) + "\">" +
         xml_escape(system) + "</text>\n";
    ++k;
  }
  s += "</svg>\n";
  return s;
}

EmittedFiles emit_report(const EvalReport& r, const fs::path& dir, const std::string& stem) {
  if (r.rows.empty() && r.failures.empty()) throw DataError("refusing to emit an empty report");
  fs::create_directories(dir);
  EmittedFiles files;
  files.csv = dir / (stem + ".csv");
  files.json = dir / (stem + ".json");
  write_file_atomic(files.csv, report_csv(r));
  write_file_atomic(files.json, r.to_json().dump(2) + "\n");
  std::set<std::string> datasets;
  for (const auto& row : r.rows) datasets.insert(row.dataset);
  for (const auto& d : datasets) {
    const fs::path p = dir / (stem + "_" + d + ".svg");
    write_file_atomic(p, report_svg(r, d));
    files.svg.push_back(p);
  }
  return files;
}

}  // namespace plcadapt

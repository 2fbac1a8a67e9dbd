// src/dataset.cc

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

#include "plcadapt/dataset.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "plcadapt/audio_io.h"
#include "plcadapt/errors.h"
#include "plcadapt/io_util.h"

namespace plcadapt {

namespace fs = std::filesystem;

nlohmann::json ManifestRow::to_json() const {
  nlohmann::json j = {{"utterance_id", utterance_id},
                      {"audio_path", audio_path},
                      {"transcript", transcript},
                      {"language", language},
                      {"duration_s", duration_s}};
  if (features_path) j["features_path"] = *features_path;
  if (mask_path) j["mask_path"] = *mask_path;
  if (plr) j["plr"] = *plr;
  if (realized_plr) j["realized_plr"] = *realized_plr;
  return j;
}

ManifestRow ManifestRow::from_json(const nlohmann::json& j) {
  ManifestRow r;
  r.utterance_id = j.at("utterance_id").get<std::string>();
  r.audio_path = j.at("audio_path").get<std::string>();
  r.transcript = j.at("transcript").get<std::string>();
  r.language = j.at("language").get<std::string>();
  r.duration_s = j.value("duration_s", 0.0);
  if (j.contains("features_path")) r.features_path = j["features_path"].get<std::string>();
  if (j.contains("mask_path")) r.mask_path = j["mask_path"].get<std::string>();
  if (j.contains("plr")) r.plr = j["plr"].get<double>();
  if (j.contains("realized_plr")) r.realized_plr = j["realized_plr"].get<double>();
  return r;
}

bool is_language_tag(const std::string& tag) {
  // BCP-47 shaped: a 2-3 letter primary subtag, then alphanumeric subtags.
  std::istringstream ss(tag);
  std::string part;
  bool first = true;
  while (std::getline(ss, part, '-')) {
    if (first) {
      if (part.size() < 2 || part.size() > 3) return false;
      if (!std::all_of(part.begin(), part.end(), [](unsigned char c) { return std::isalpha(c); })) {
        return false;
      }
      first = false;
    } else {
      if (part.empty() || part.size() > 8) return false;
      if (!std::all_of(part.begin(), part.end(), [](unsigned char c) { return std::isalnum(c); })) {
        return false;
      }
    }
  }
  return !first && tag.back() != '-';
}

namespace {
std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).lexically_normal().string();
}
}  // namespace

DatasetManifest load_manifest(const fs::path& path, bool check_audio) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  DatasetManifest m;
  m.id = path.stem().string();
  // <corpus>/manifest.jsonl is named after its directory.
  if (m.id == "manifest" && fs::absolute(path).parent_path().has_filename()) {
    m.id = fs::absolute(path).parent_path().filename().string();
  }
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestRow row;
    try {
      row = ManifestRow::from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(row.utterance_id).second) {
      throw DataError(path.string() + ": duplicate utterance_id '" + row.utterance_id + "'");
    }
    if (!is_language_tag(row.language)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad language tag '" +
                      row.language + "'");
    }
    row.audio_path = resolve(base, row.audio_path);
    if (row.features_path) row.features_path = resolve(base, *row.features_path);
    if (row.mask_path) row.mask_path = resolve(base, *row.mask_path);
    if (check_audio && !fs::exists(row.audio_path)) {
      throw DataError("audio file not found: " + row.audio_path);
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

std::string manifest_to_jsonl(const DatasetManifest& m) {
  std::string out;
  for (const auto& r : m.rows) {
    out += r.to_json().dump();
    out += '\n';
  }
  return out;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  write_file_atomic(path, manifest_to_jsonl(m));
}

DatasetManifest manifest_from_tree(const fs::path& root, const std::string& language) {
  if (!is_language_tag(language)) throw ConfigError("bad language tag '" + language + "'");
  DatasetManifest m;
  m.id = root.filename().string();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".wav" || ext == ".flac") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    ManifestRow r;
    r.utterance_id = fs::relative(f, root).replace_extension().generic_string();
    std::replace(r.utterance_id.begin(), r.utterance_id.end(), '/', '-');
    r.audio_path = fs::absolute(f).string();
    fs::path txt = f;
    txt.replace_extension(".txt");
    if (fs::exists(txt)) {
      r.transcript = read_file(txt);
      while (!r.transcript.empty() && std::isspace(static_cast<unsigned char>(r.transcript.back()))) {
        r.transcript.pop_back();
      }
    }
    r.language = language;
    const Waveform w = read_audio(f);
    r.duration_s = static_cast<double>(w.samples.size()) / w.sample_rate;
    m.rows.push_back(std::move(r));
  }
  return m;
}

std::vector<Utterance> load_utterances(const DatasetManifest& m, const FrontendConfig& cfg,
                                       int workers) {
  std::vector<Utterance> out(m.rows.size());
  auto work = [&](size_t begin, size_t stride) {
    for (size_t i = begin; i < m.rows.size(); i += stride) {
      const auto& row = m.rows[i];
      Waveform w = read_audio(row.audio_path);
      try {
        out[i] = Utterance{row.utterance_id, compute_logmel(w, cfg), row.transcript, row.language};
      } catch (const Error& e) {
        throw DataError(row.audio_path + ": " + e.what());
      }
    }
  };
  const size_t n = static_cast<size_t>(std::max(1, workers));
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::future<void>> jobs;
    for (size_t w = 0; w < n; ++w) jobs.push_back(std::async(std::launch::async, work, w, n));
    for (auto& j : jobs) j.get();
  }
  return out;
}

}  // namespace plcadapt

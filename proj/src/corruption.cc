// src/corruption.cc

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

#include "plcadapt/corruption.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <regex>

#include "plcadapt/audio_io.h"
#include "plcadapt/errors.h"
#include "plcadapt/io_util.h"

namespace plcadapt {

namespace fs = std::filesystem;

std::vector<bool> LossMask::expand() const {
  std::vector<bool> lost(static_cast<size_t>(total_frames), false);
  for (const auto& s : spans) {
    for (int t = s.start; t < s.start + s.length; ++t) lost[static_cast<size_t>(t)] = true;
  }
  return lost;
}

LossMask LossMask::from_flags(const std::vector<bool>& lost) {
  LossMask m;
  m.total_frames = static_cast<int>(lost.size());
  for (int t = 0; t < m.total_frames;) {
    if (!lost[static_cast<size_t>(t)]) {
      ++t;
      continue;
    }
    int end = t;
    while (end < m.total_frames && lost[static_cast<size_t>(end)]) ++end;
    m.spans.push_back({t, end - t});
    t = end;
  }
  return m;
}

void LossMask::validate() const {
  if (total_frames < 0) throw DataError("mask: negative frame count");
  int next_free = 0;
  for (const auto& s : spans) {
    if (s.start < next_free || s.length < 1 || s.start + s.length > total_frames) {
      throw DataError("mask: spans must be sorted, disjoint, non-adjacent and in range");
    }
    next_free = s.start + s.length + 1;
  }
}

double realized_plr(const LossMask& mask) {
  if (mask.total_frames == 0) return 0.0;
  long lost = 0;
  for (const auto& s : mask.spans) lost += s.length;
  return static_cast<double>(lost) / mask.total_frames;
}

int SpanDistribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::kConstant:
      return low;
    case Kind::kUniform:
      return low + static_cast<int>(rng.below(static_cast<uint64_t>(high - low + 1)));
    case Kind::kGeometric: {
      if (mean <= 1.0) return 1;
      // Inverse CDF on {1, 2, ...}, rejecting draws above the truncation point.
      const double log_q = std::log1p(-1.0 / mean);
      for (;;) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        const double j = 1.0 + std::floor(std::log(u) / log_q);
        if (j <= max_length) return static_cast<int>(j);
      }
    }
  }
  return 1;
}

int SpanDistribution::min_length() const {
  return kind == Kind::kGeometric ? 1 : low;
}

double SpanDistribution::expected_mean() const {
  switch (kind) {
    case Kind::kConstant:
      return low;
    case Kind::kUniform:
      return 0.5 * (low + high);
    case Kind::kGeometric: {
      if (mean <= 1.0) return 1.0;
      const double p = 1.0 / mean;
      double num = 0.0, den = 0.0;
      for (int j = 1; j <= max_length; ++j) {
        const double w = std::pow(1.0 - p, j - 1) * p;
        num += j * w;
        den += w;
      }
      return num / den;
    }
  }
  return 1.0;
}

std::string SpanDistribution::describe() const {
  char buf[96];
  switch (kind) {
    case Kind::kConstant:
      std::snprintf(buf, sizeof buf, "constant(%d)", low);
      break;
    case Kind::kUniform:
      std::snprintf(buf, sizeof buf, "uniform(%d,%d)", low, high);
      break;
    case Kind::kGeometric:
      std::snprintf(buf, sizeof buf, "geometric(mean=%g,max=%d)", mean, max_length);
      break;
  }
  return buf;
}

SpanDistribution SpanDistribution::parse(const std::string& text) {
  static const std::regex geo(R"(\s*geometric\(\s*(?:mean\s*=\s*)?([0-9.eE+-]+)\s*(?:,\s*(?:max\s*=\s*)?([0-9]+)\s*)?\)\s*)");
  static const std::regex cst(R"(\s*constant\(\s*([0-9]+)\s*\)\s*)");
  static const std::regex uni(R"(\s*uniform\(\s*([0-9]+)\s*,\s*([0-9]+)\s*\)\s*)");
  std::smatch m;
  SpanDistribution d;
  if (std::regex_match(text, m, geo)) {
    d.kind = Kind::kGeometric;
    d.mean = std::stod(m[1]);
    if (m[2].matched) d.max_length = std::stoi(m[2]);
    if (!(d.mean >= 1.0) || d.max_length < 1) {
      throw ConfigError("geometric span law needs mean >= 1 and max >= 1: " + text);
    }
  } else if (std::regex_match(text, m, cst)) {
    d.kind = Kind::kConstant;
    d.low = d.high = std::stoi(m[1]);
    if (d.low < 1) throw ConfigError("constant span length must be >= 1: " + text);
  } else if (std::regex_match(text, m, uni)) {
    d.kind = Kind::kUniform;
    d.low = std::stoi(m[1]);
    d.high = std::stoi(m[2]);
    if (d.low < 1 || d.high < d.low) throw ConfigError("uniform span law needs 1 <= lo <= hi: " + text);
  } else {
    throw ConfigError("unknown span distribution: " + text);
  }
  return d;
}

std::string PlrDistribution::describe() const {
  char buf[64];
  if (low == high) {
    std::snprintf(buf, sizeof buf, "fixed(%g)", low);
  } else {
    std::snprintf(buf, sizeof buf, "uniform(%g,%g)", low, high);
  }
  return buf;
}

PlrDistribution PlrDistribution::parse(const std::string& text) {
  static const std::regex uni(R"(\s*uniform\(\s*([0-9.eE+-]+)\s*,\s*([0-9.eE+-]+)\s*\)\s*)");
  static const std::regex fixed(R"(\s*fixed\(\s*([0-9.eE+-]+)\s*\)\s*)");
  std::smatch m;
  PlrDistribution d;
  if (std::regex_match(text, m, uni)) {
    d.low = std::stod(m[1]);
    d.high = std::stod(m[2]);
  } else if (std::regex_match(text, m, fixed)) {
    d.low = d.high = std::stod(m[1]);
  } else {
    throw ConfigError("unknown drop-rate distribution: " + text);
  }
  if (!(d.low >= 0.0) || d.high < d.low || d.high > kMaxPlr) {
    throw ConfigError("drop-rate distribution must lie within [0, 0.95]: " + text);
  }
  return d;
}

void CorruptionConfig::validate() const {
  if (plr_target && !(*plr_target >= 0.0 && *plr_target <= kMaxPlr)) {
    throw ConfigError("plr_target must lie in [0, 0.95]");
  }
  if (!(plr_distribution.low >= 0.0) || plr_distribution.high < plr_distribution.low ||
      plr_distribution.high > kMaxPlr) {
    throw ConfigError("plr distribution must lie within [0, 0.95]");
  }
  const auto& s = span_distribution;
  if ((s.kind == SpanDistribution::Kind::kGeometric && (!(s.mean >= 1.0) || s.max_length < 1)) ||
      (s.kind != SpanDistribution::Kind::kGeometric && (s.low < 1 || s.high < s.low))) {
    throw ConfigError("invalid span distribution: " + s.describe());
  }
}

nlohmann::json CorruptionConfig::to_json() const {
  nlohmann::json j = {{"plr_distribution", plr_distribution.describe()},
                      {"span_distribution", span_distribution.describe()},
                      {"span_mean", span_distribution.expected_mean()},
                      {"seed", seed},
                      {"fill_policy", "zero_fill"}};
  if (plr_target) j["plr_target"] = *plr_target;
  return j;
}

LossMask sample_loss_mask(int total_frames, double plr, const SpanDistribution& spans,
                          uint64_t seed, std::string_view utterance_id) {
  if (total_frames < 1) throw DataError("sample_loss_mask: need at least one frame");
  if (!(plr >= 0.0 && plr <= kMaxPlr)) throw ConfigError("plr must lie in [0, 0.95]");
  LossMask mask;
  mask.total_frames = total_frames;
  if (plr > 0.0 && total_frames < spans.min_length()) {
    mask.infeasible = true;
    return mask;
  }
  const int budget = static_cast<int>(std::lround(plr * total_frames));
  if (budget == 0) return mask;

  Rng rng(derive_seed(seed, utterance_id));
  std::vector<int> lengths;
  for (int used = 0; used < budget;) {
    const int j = std::min(spans.sample(rng), budget - used);
    lengths.push_back(j);
    used += j;
  }
  const int clean = total_frames - budget;
  // Spans need one clean separator each; merge neighbours until they fit.
  while (static_cast<int>(lengths.size()) - 1 > clean) {
    const auto i = static_cast<size_t>(rng.below(lengths.size() - 1));
    lengths[i] += lengths[i + 1];
    lengths.erase(lengths.begin() + static_cast<std::ptrdiff_t>(i) + 1);
  }
  const int n = static_cast<int>(lengths.size());
  // Spread the remaining clean frames over n + 1 gaps uniformly over all
  // compositions: choose n bar positions among extra + n slots.
  const int extra = clean - (n - 1);
  std::vector<int> gaps(static_cast<size_t>(n) + 1, 0);
  {
    int slots = extra + n;
    int bars_left = n;
    int gap = 0;
    for (int i = 0; i < extra + n; ++i, --slots) {
      if (bars_left > 0 && rng.below(static_cast<uint64_t>(slots)) < static_cast<uint64_t>(bars_left)) {
        --bars_left;
        ++gap;
      } else {
        ++gaps[static_cast<size_t>(gap)];
      }
    }
  }
  int pos = gaps[0];
  for (int i = 0; i < n; ++i) {
    mask.spans.push_back({pos, lengths[static_cast<size_t>(i)]});
    pos += lengths[static_cast<size_t>(i)] + gaps[static_cast<size_t>(i) + 1] + (i + 1 < n ? 1 : 0);
  }
  return mask;
}

LossMask sample_loss_mask(int total_frames, const CorruptionConfig& cfg,
                          std::string_view utterance_id) {
  double plr;
  if (cfg.plr_target) {
    plr = *cfg.plr_target;
  } else {
    Rng rate_rng(derive_seed(cfg.seed ^ 0x5bd1e995ULL, utterance_id));
    plr = cfg.plr_distribution.sample(rate_rng);
  }
  return sample_loss_mask(total_frames, plr, cfg.span_distribution, cfg.seed, utterance_id);
}

double fill_value(FillPolicy fill) {
  switch (fill) {
    case FillPolicy::kZeroFill:
      return 0.0;
  }
  return 0.0;
}

MelSpectrogram apply_mask(const MelSpectrogram& m, const LossMask& mask, FillPolicy fill) {
  if (mask.total_frames != m.n_frames()) {
    throw DataError("mask covers " + std::to_string(mask.total_frames) +
                    " frames but the spectrogram has " + std::to_string(m.n_frames()));
  }
  MelSpectrogram out = m;
  const double v = fill_value(fill);
  for (const auto& s : mask.spans) out.values.middleCols(s.start, s.length).setConstant(v);
  return out;
}

nlohmann::json mask_to_json(const LossMask& mask, const std::string& utterance_id,
                            uint64_t seed, const nlohmann::json& provenance) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : mask.spans) spans.push_back({s.start, s.length});
  nlohmann::json j = {{"utterance_id", utterance_id},
                      {"T", mask.total_frames},
                      {"seed", seed},
                      {"spans", spans}};
  if (mask.infeasible) j["infeasible"] = true;
  if (!provenance.is_null()) {
    for (auto it = provenance.begin(); it != provenance.end(); ++it) j[it.key()] = it.value();
  }
  return j;
}

LossMask mask_from_json(const nlohmann::json& j) {
  LossMask m;
  try {
    m.total_frames = j.at("T").get<int>();
    for (const auto& s : j.at("spans")) m.spans.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    m.infeasible = j.value("infeasible", false);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed mask: ") + e.what());
  }
  m.validate();
  return m;
}

LossMask read_mask(const fs::path& path) {
  try {
    return mask_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed mask file " + path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string mask_hash(const LossMask& mask) {
  std::string buf;
  put_u32(buf, static_cast<uint32_t>(mask.total_frames));
  for (const auto& s : mask.spans) {
    put_u32(buf, static_cast<uint32_t>(s.start));
    put_u32(buf, static_cast<uint32_t>(s.length));
  }
  return sha256_hex(buf);
}

std::string plr_dir_name(double plr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "plr_%.3f", plr);
  return buf;
}

std::vector<FixedPlrCopy> build_fixed_plr_testset(const DatasetManifest& manifest,
                                                  const std::vector<double>& plrs,
                                                  const CorruptionConfig& cfg,
                                                  const FixedPlrOptions& options) {
  cfg.validate();
  for (size_t i = 0; i < plrs.size(); ++i) {
    if (!(plrs[i] >= 0.0 && plrs[i] <= kMaxPlr)) {
      throw ConfigError("fixed PLR values must lie in [0, 0.95]");
    }
    for (size_t k = 0; k < i; ++k) {
      if (plrs[k] == plrs[i]) throw ConfigError("fixed PLR values must be distinct");
    }
  }
  // Canonical order regardless of input order.
  DatasetManifest sorted = manifest;
  std::sort(sorted.rows.begin(), sorted.rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) { return a.utterance_id < b.utterance_id; });

  std::vector<FixedPlrCopy> out;
  std::vector<MelSpectrogram> clean;  // computed lazily, shared across rates
  for (double plr : plrs) {
    FixedPlrCopy copy;
    copy.plr = plr;
    const fs::path dir = options.out_dir / plr_dir_name(plr);
    copy.manifest_path = dir / "manifest.jsonl";
    if (!options.force && fs::exists(copy.manifest_path)) {
      copy.manifest = load_manifest(copy.manifest_path, false);
      copy.manifest.id = manifest.id;
      out.push_back(std::move(copy));
      continue;
    }
    if (clean.empty()) {
      clean.resize(sorted.rows.size());
      auto work = [&](size_t begin, size_t stride) {
        for (size_t i = begin; i < sorted.rows.size(); i += stride) {
          const auto& row = sorted.rows[i];
          if (row.features_path) {
            clean[i] = read_mel(*row.features_path, options.frontend.frame_hop_seconds());
          } else {
            clean[i] = compute_logmel(read_audio(row.audio_path), options.frontend);
          }
        }
      };
      const size_t n = static_cast<size_t>(std::max(1, options.workers));
      std::vector<std::future<void>> jobs;
      for (size_t w = 1; w < n; ++w) jobs.push_back(std::async(std::launch::async, work, w, n));
      work(0, n);
      for (auto& j : jobs) j.get();
    }
    fs::create_directories(dir);
    copy.manifest.id = manifest.id;
    for (size_t i = 0; i < sorted.rows.size(); ++i) {
      const auto& row = sorted.rows[i];
      const LossMask mask = sample_loss_mask(clean[i].n_frames(), plr, cfg.span_distribution,
                                             cfg.seed, row.utterance_id);
      nlohmann::json prov = options.provenance;
      if (prov.is_null()) prov = nlohmann::json::object();
      prov["plr"] = plr;
      prov["span_distribution"] = cfg.span_distribution.describe();
      const fs::path mask_path = dir / (row.utterance_id + ".mask.json");
      const fs::path mel_path = dir / (row.utterance_id + ".mel");
      write_file_atomic(mask_path, mask_to_json(mask, row.utterance_id, cfg.seed, prov).dump());
      write_mel(mel_path, apply_mask(clean[i], mask, cfg.fill_policy));
      ManifestRow r = row;
      r.mask_path = mask_path.string();
      r.features_path = mel_path.string();
      r.plr = plr;
      r.realized_plr = realized_plr(mask);
      copy.manifest.rows.push_back(std::move(r));
    }
    write_manifest(copy.manifest_path, copy.manifest);
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace plcadapt

// src/wer.cc

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

#include "plcadapt/wer.h"

#include <algorithm>
#include <sstream>

namespace plcadapt {

std::string TextNormalizer::apply(const std::string& text) const {
  std::string mapped;
  mapped.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (strip_punctuation && c < 0x80 && std::ispunct(c)) {
      if (c != '\'') mapped.push_back(' ');
      continue;
    }
    if (lowercase && c < 0x80) {
      mapped.push_back(static_cast<char>(std::tolower(c)));
    } else if (c < 0x80 && std::isspace(c)) {
      mapped.push_back(' ');
    } else {
      mapped.push_back(ch);
    }
  }
  std::string out;
  for (const auto& w : split_words(mapped)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string TextNormalizer::name() const {
  if (lowercase && strip_punctuation) return "default";
  if (!lowercase && !strip_punctuation) return "none";
  return std::string("custom(lowercase=") + (lowercase ? "1" : "0") +
         ",strip_punctuation=" + (strip_punctuation ? "1" : "0") + ")";
}

TextNormalizer TextNormalizer::parse(const std::string& name) {
  if (name == "default") return {};
  if (name == "none") return {false, false};
  throw ConfigError("unknown text normalizer: " + name);
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

double WerBreakdown::wer() const {
  if (reference_words == 0) return 0.0;
  return static_cast<double>(errors()) / static_cast<double>(reference_words);
}

WerBreakdown& WerBreakdown::operator+=(const WerBreakdown& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  reference_words += o.reference_words;
  return *this;
}

nlohmann::json WerBreakdown::to_json() const {
  return {{"subs", substitutions},
          {"dels", deletions},
          {"ins", insertions},
          {"ref_words", reference_words},
          {"wer", wer()}};
}

WerBreakdown align_words(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const size_t n = ref.size();
  const size_t m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int diag = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({diag, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  WerBreakdown b;
  b.reference_words = static_cast<int64_t>(n);
  size_t i = n;
  size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++b.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++b.deletions;
      --i;
    } else {
      ++b.insertions;
      --j;
    }
  }
  return b;
}

WerBreakdown wer(const std::string& reference, const std::string& hypothesis,
                 const TextNormalizer& normalizer) {
  const auto ref = split_words(normalizer.apply(reference));
  if (ref.empty()) throw UndefinedWerError("WER is undefined for an empty reference");
  return align_words(ref, split_words(normalizer.apply(hypothesis)));
}

}  // namespace plcadapt

// include/plcadapt/wer.h

// Copyright 2026  The plcadapt Authors
//
// See ../../LICENSE for clarification regarding multiple authors
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

#ifndef PLCADAPT_WER_H_
#define PLCADAPT_WER_H_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcadapt/errors.h"

namespace plcadapt {

// Text normalization applied to both sides before scoring. The default
// lowercases ASCII letters, drops apostrophes, turns other ASCII punctuation
// into spaces and collapses whitespace. Applying it twice changes nothing.
struct TextNormalizer {
  bool lowercase = true;
  bool strip_punctuation = true;

  std::string apply(const std::string& text) const;
  std::string name() const;
  static TextNormalizer parse(const std::string& name);  // "default" | "none"
};

std::vector<std::string> split_words(const std::string& text);

struct WerBreakdown {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t reference_words = 0;

  int64_t errors() const { return substitutions + deletions + insertions; }
  double wer() const;
  WerBreakdown& operator+=(const WerBreakdown& o);
  bool operator==(const WerBreakdown&) const = default;
  nlohmann::json to_json() const;
};

class UndefinedWerError : public DataError {
 public:
  using DataError::DataError;
};

// Minimal word-level edit distance with uniform costs. Among optimal
// alignments the backtrace prefers matches/substitutions, then deletions.
WerBreakdown align_words(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

// Throws UndefinedWerError when the normalized reference is empty.
WerBreakdown wer(const std::string& reference, const std::string& hypothesis,
                 const TextNormalizer& normalizer = {});

}  // namespace plcadapt

#endif  // PLCADAPT_WER_H_

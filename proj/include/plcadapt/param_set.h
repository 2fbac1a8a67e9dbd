// include/plcadapt/param_set.h

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

#ifndef PLCADAPT_PARAM_SET_H_
#define PLCADAPT_PARAM_SET_H_

#include <map>
#include <string>

#include "plcadapt/autograd.h"

namespace plcadapt {

using ag::Matrix;

// Named parameter arrays in a fixed (lexicographic) order.
class ParamSet {
 public:
  Matrix& add(const std::string& name, Matrix init);
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }

  const std::map<std::string, Matrix>& tensors() const { return tensors_; }
  std::map<std::string, Matrix>& tensors() { return tensors_; }

  size_t count() const;
  bool all_finite() const;

  // SHA-256 over names, shapes and the float32 little-endian view of every
  // value. Float32 is the storage precision, so the hash survives a
  // checkpoint round trip.
  std::string fingerprint() const;

  // Rounds every value to float32 precision.
  void round_to_float32();

 private:
  std::map<std::string, Matrix> tensors_;
};

using GradMap = std::map<std::string, Matrix>;

// Binds a ParamSet into one computation graph. Leaves are created lazily and
// reused, so a parameter used twice accumulates both contributions.
class ParamBinding {
 public:
  ParamBinding(const ParamSet& params, bool trainable)
      : params_(params), trainable_(trainable) {}

  ag::Var operator()(const std::string& name);

  // Gradients for every parameter (zeros for parameters that were not used
  // or received no gradient).
  GradMap gradients() const;

 private:
  const ParamSet& params_;
  bool trainable_;
  std::map<std::string, ag::Var> leaves_;
};

}  // namespace plcadapt

#endif  // PLCADAPT_PARAM_SET_H_

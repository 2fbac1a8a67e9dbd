// include/plcadapt/optimizer.h

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

#ifndef PLCADAPT_OPTIMIZER_H_
#define PLCADAPT_OPTIMIZER_H_

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "plcadapt/param_set.h"

namespace plcadapt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  nlohmann::json to_json() const;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Parameters without an entry in `grads` are left alone.
  void step(ParamSet& params, const GradMap& grads, double lr);

  int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }

  // Moments as "m/<name>" and "v/<name>" tensors, for checkpoints.
  std::map<std::string, Matrix> state_tensors() const;
  void load_state(const std::map<std::string, Matrix>& tensors, int64_t steps);

 private:
  AdamConfig cfg_;
  int64_t steps_ = 0;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
};

double global_norm(const GradMap& grads);
// Rescales in place when the norm exceeds `max_norm`; returns the norm before
// clipping.
double clip_global_norm(GradMap& grads, double max_norm);
bool all_finite(const GradMap& grads);

}  // namespace plcadapt

#endif  // PLCADAPT_OPTIMIZER_H_

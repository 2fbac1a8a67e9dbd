// src/optimizer.cc

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

#include "plcadapt/optimizer.h"

#include <cmath>

namespace plcadapt {

nlohmann::json AdamConfig::to_json() const {
  return {{"name", "adam"}, {"beta1", beta1}, {"beta2", beta2}, {"epsilon", epsilon}};
}

void Adam::step(ParamSet& params, const GradMap& grads, double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (const auto& [name, g] : grads) {
    Matrix& p = params.at(name);
    auto [mit, m_new] = m_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
    auto [vit, v_new] = v_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
  }
}

std::map<std::string, Matrix> Adam::state_tensors() const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, m] : m_) out.emplace("m/" + name, m);
  for (const auto& [name, v] : v_) out.emplace("v/" + name, v);
  return out;
}

void Adam::load_state(const std::map<std::string, Matrix>& tensors, int64_t steps) {
  m_.clear();
  v_.clear();
  for (const auto& [name, t] : tensors) {
    if (name.starts_with("m/")) m_.emplace(name.substr(2), t);
    if (name.starts_with("v/")) v_.emplace(name.substr(2), t);
  }
  steps_ = steps;
}

double global_norm(const GradMap& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(GradMap& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads) g *= s;
  }
  return norm;
}

bool all_finite(const GradMap& grads) {
  for (const auto& [name, g] : grads) {
    if (!g.allFinite()) return false;
  }
  return true;
}

}  // namespace plcadapt

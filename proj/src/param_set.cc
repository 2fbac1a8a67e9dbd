// src/param_set.cc

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

#include "plcadapt/param_set.h"

#include <cmath>
#include <stdexcept>

#include "plcadapt/io_util.h"

namespace plcadapt {

Matrix& ParamSet::add(const std::string& name, Matrix init) {
  auto [it, inserted] = tensors_.emplace(name, std::move(init));
  if (!inserted) throw std::logic_error("duplicate parameter: " + name);
  return it->second;
}

Matrix& ParamSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Matrix& ParamSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

size_t ParamSet::count() const {
  size_t n = 0;
  for (const auto& [_, m] : tensors_) n += static_cast<size_t>(m.size());
  return n;
}

bool ParamSet::all_finite() const {
  for (const auto& [_, m] : tensors_) {
    if (!m.allFinite()) return false;
  }
  return true;
}

std::string ParamSet::fingerprint() const {
  Sha256 h;
  std::string buf;
  for (const auto& [name, m] : tensors_) {
    buf.clear();
    buf.append(name);
    buf.push_back('\0');
    put_u64(buf, static_cast<uint64_t>(m.rows()));
    put_u64(buf, static_cast<uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        put_f32(buf, static_cast<float>(m(r, c)));
      }
    }
    h.update(buf);
  }
  return h.hex_digest();
}

void ParamSet::round_to_float32() {
  for (auto& [_, m] : tensors_) {
    m = m.cast<float>().cast<double>();
  }
}

ag::Var ParamBinding::operator()(const std::string& name) {
  auto it = leaves_.find(name);
  if (it != leaves_.end()) return it->second;
  const Matrix& value = params_.at(name);
  ag::Var leaf = trainable_ ? ag::parameter(value) : ag::constant_ref(value);
  leaves_.emplace(name, leaf);
  return leaf;
}

GradMap ParamBinding::gradients() const {
  GradMap out;
  for (const auto& [name, m] : params_.tensors()) {
    auto it = leaves_.find(name);
    if (it != leaves_.end() && it->second->grad.size() != 0) {
      out.emplace(name, it->second->grad);
    } else {
      out.emplace(name, Matrix::Zero(m.rows(), m.cols()));
    }
  }
  return out;
}

}  // namespace plcadapt

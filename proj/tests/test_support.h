// tests/test_support.h

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

#ifndef PLCADAPT_TESTS_TEST_SUPPORT_H_
#define PLCADAPT_TESTS_TEST_SUPPORT_H_

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "plcadapt/asr_backend.h"
#include "plcadapt/autograd.h"
#include "plcadapt/dataset.h"
#include "plcadapt/rng.h"

namespace plcadapt::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("plcadapt-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(PLCADAPT_TEST_DATA_DIR) / name;
}

inline ag::Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Relative error with an absolute floor, the usual finite-difference metric.
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central difference of f with respect to `x(i)`.
inline double central_difference(ag::Matrix& x, Eigen::Index i, const std::function<double()>& f,
                                 double h = 1e-5) {
  const double saved = x.data()[i];
  x.data()[i] = saved + h;
  const double up = f();
  x.data()[i] = saved - h;
  const double down = f();
  x.data()[i] = saved;
  return (up - down) / (2 * h);
}

// Tiny attention recognizer over a handful of characters.
inline ReferenceSpec miniature_backend_spec() {
  ReferenceSpec s;
  s.encoder_channels = 6;
  s.encoder_kernel = 3;
  s.encoder_pools = {1};
  s.embed_dim = 4;
  s.hidden_dim = 5;
  return s;
}

inline std::unique_ptr<ReferenceBackend> miniature_backend(const std::string& id, int n_mels,
                                                           uint64_t seed = 11) {
  FrontendConfig fe;
  fe.n_mels = n_mels;
  const ReferenceSpec spec = miniature_backend_spec();
  Vocabulary vocab({"en"}, U" abc");
  ParamSet p = reference_model::init_params(spec, n_mels, vocab.size(), seed);
  return std::make_unique<ReferenceBackend>(id, fe, spec, vocab, std::move(p));
}

}  // namespace plcadapt::testing

#endif  // PLCADAPT_TESTS_TEST_SUPPORT_H_

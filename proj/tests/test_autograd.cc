// tests/test_autograd.cc

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

#include <gtest/gtest.h>

#include <vector>

#include "plcadapt/autograd.h"
#include "test_support.h"

namespace plcadapt {
namespace {

using ag::Matrix;
using ag::Var;

// Checks d(sum(w .* f(inputs)))/d(inputs) against central differences. A
// fixed random weighting makes every output cell matter.
void check_gradients(std::vector<Matrix> inputs, const std::function<Var(std::vector<Var>&)>& f,
                     double tol = 1e-6, uint64_t seed = 1) {
  Rng rng(seed);
  Matrix weights;
  auto evaluate = [&](bool record, std::vector<Var>* leaves) {
    std::vector<Var> vars;
    for (auto& m : inputs) vars.push_back(record ? ag::parameter(m) : ag::constant(m));
    Var out = f(vars);
    if (weights.size() == 0) weights = testing::random_matrix(rng, out->rows(), out->cols());
    Var loss = ag::sum(ag::mul(out, ag::constant(weights)));
    if (leaves) *leaves = vars;
    return loss;
  };
  std::vector<Var> leaves;
  Var loss = evaluate(true, &leaves);
  ag::backward(loss);
  for (size_t k = 0; k < inputs.size(); ++k) {
    const Matrix analytic = leaves[k]->grad.size() ? leaves[k]->grad : Matrix::Zero(inputs[k].rows(), inputs[k].cols());
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double numeric = testing::central_difference(
          inputs[k], i, [&] { return evaluate(false, nullptr)->scalar(); });
      EXPECT_NEAR(analytic.data()[i], numeric, tol * std::max(1.0, std::abs(numeric)))
          << "input " << k << " cell " << i;
    }
  }
}

Matrix rnd(Eigen::Index r, Eigen::Index c, uint64_t seed) {
  Rng rng(seed);
  return testing::random_matrix(rng, r, c);
}

// Inputs kept away from the kinks of relu and max.
Matrix spread(Eigen::Index r, Eigen::Index c, uint64_t seed) {
  Matrix m = rnd(r, c, seed);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += (m.data()[i] >= 0 ? 0.1 : -0.1) + 0.01 * i;
  return m;
}

TEST(Autograd, ElementwiseOps) {
  check_gradients({rnd(3, 4, 1), rnd(3, 4, 2)}, [](auto& v) { return ag::add(v[0], v[1]); });
  check_gradients({rnd(3, 4, 1), rnd(3, 4, 2)}, [](auto& v) { return ag::sub(v[0], v[1]); });
  check_gradients({rnd(3, 4, 1), rnd(3, 4, 2)}, [](auto& v) { return ag::mul(v[0], v[1]); });
  check_gradients({rnd(3, 4, 1)}, [](auto& v) { return ag::scale(v[0], -2.5); });
  check_gradients({spread(3, 4, 1)}, [](auto& v) { return ag::relu(v[0]); });
  check_gradients({rnd(3, 4, 1)}, [](auto& v) { return ag::tanh(v[0]); });
  check_gradients({rnd(3, 4, 1)}, [](auto& v) { return ag::sigmoid(v[0]); });
}

TEST(Autograd, LinearAlgebraOps) {
  check_gradients({rnd(3, 4, 1), rnd(4, 2, 2)}, [](auto& v) { return ag::matmul(v[0], v[1]); });
  check_gradients({rnd(3, 4, 1)}, [](auto& v) { return ag::transpose(v[0]); });
  check_gradients({rnd(3, 4, 1), rnd(3, 1, 2)}, [](auto& v) { return ag::add_bias(v[0], v[1]); });
  check_gradients({rnd(3, 4, 1)}, [](auto& v) { return ag::softmax(v[0]); });
  check_gradients({rnd(3, 4, 1)}, [](auto& v) { return ag::mean(v[0]); });
}

TEST(Autograd, SlicingAndConcatenation) {
  check_gradients({rnd(3, 4, 1), rnd(2, 4, 2)}, [](auto& v) {
    const Var parts[] = {v[0], v[1], v[0]};
    return ag::concat_rows(parts);
  });
  check_gradients({rnd(3, 4, 1), rnd(3, 1, 2)}, [](auto& v) {
    const Var parts[] = {v[1], v[0]};
    return ag::concat_cols(parts);
  });
  check_gradients({rnd(3, 6, 1)}, [](auto& v) { return ag::slice_cols(v[0], 2, 3); });
  check_gradients({rnd(5, 2, 1)}, [](auto& v) { return ag::slice_rows(v[0], 1, 3); });
}

TEST(Autograd, Losses) {
  check_gradients({spread(2, 5, 1), rnd(2, 5, 2)}, [](auto& v) { return ag::mean_abs_diff(v[0], v[1]); });
  const std::vector<int> targets = {0, 3, 1};
  check_gradients({rnd(4, 3, 1)}, [&](auto& v) { return ag::cross_entropy(v[0], targets); });
}

TEST(Autograd, CrossEntropyOfUniformLogitsIsLogVocab) {
  const std::vector<int> targets = {2, 0};
  Var ce = ag::cross_entropy(ag::constant(Matrix::Zero(7, 2)), targets);
  EXPECT_NEAR(ce->scalar(), std::log(7.0), 1e-12);
}

TEST(Autograd, ImageOps) {
  const ag::Grid g{4, 6};
  check_gradients({rnd(2, 24, 1), rnd(3, 2 * 9, 2), rnd(3, 1, 3)},
                  [&](auto& v) { return ag::conv2d(v[0], g, v[1], v[2], 3, 3); });
  check_gradients({rnd(2, 24, 1), rnd(3, 2 * 5, 2), rnd(3, 1, 3)},
                  [&](auto& v) { return ag::conv2d(v[0], g, v[1], v[2], 5, 1); });
  check_gradients({spread(2, 24, 1)}, [&](auto& v) { return ag::maxpool2d(v[0], g, 2, 2); });
  check_gradients({rnd(2, 24, 1)}, [&](auto& v) { return ag::avgpool2d(v[0], g, 2, 3); });
  check_gradients({rnd(2, 24, 1)}, [&](auto& v) { return ag::upsample_nearest(v[0], g, 2, 2); });
  check_gradients({rnd(2, 24, 1)}, [&](auto& v) { return ag::pad_grid(v[0], g, 2, 1, -1.5); });
  check_gradients({rnd(2, 24, 1)}, [&](auto& v) { return ag::crop_grid(v[0], g, {3, 5}); });
}

TEST(Autograd, ConvolutionMatchesDirectSum) {
  // 'same' 3x3 correlation with zero padding, written out longhand.
  const ag::Grid g{3, 4};
  const Matrix x = rnd(2, 12, 4), w = rnd(1, 18, 5), b = Matrix::Constant(1, 1, 0.25);
  const Matrix y = ag::conv2d(ag::constant(x), g, ag::constant(w), ag::constant(b), 3, 3)->val();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      double acc = 0.25;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const int rr = r + i - 1, cc = c + j - 1;
          if (rr < 0 || rr >= 3 || cc < 0 || cc >= 4) continue;
          for (int ch = 0; ch < 2; ++ch) acc += w(0, (i * 3 + j) * 2 + ch) * x(ch, rr * 4 + cc);
        }
      }
      EXPECT_NEAR(y(0, r * 4 + c), acc, 1e-12);
    }
  }
}

TEST(Autograd, ExternalLossInjectsGradient) {
  const Matrix xv = rnd(2, 3, 1);
  Var x = ag::parameter(xv);
  Matrix g = rnd(2, 3, 2);
  Var l = ag::add(ag::external_loss(x, 1.5, g), ag::scale(ag::sum(x), 2.0));
  EXPECT_NEAR(l->scalar(), 1.5 + 2.0 * x->val().sum(), 1e-12);
  ag::backward(l, 0.5);
  EXPECT_TRUE(x->grad.isApprox(0.5 * (g.array() + 2.0).matrix()));
}

TEST(Autograd, SharedLeafAccumulates) {
  const Matrix xv = rnd(2, 2, 1);
  Var x = ag::parameter(xv);
  ag::backward(ag::sum(ag::add(x, ag::mul(x, x))));
  EXPECT_TRUE(x->grad.isApprox((1.0 + 2.0 * x->val().array()).matrix()));
}

TEST(Autograd, NoGradGuardSkipsRecording) {
  Matrix m = rnd(2, 2, 1);
  {
    ag::NoGradGuard guard;
    EXPECT_FALSE(ag::grad_enabled());
    Var y = ag::tanh(ag::parameter(m));
    EXPECT_FALSE(y->requires_grad);
  }
  EXPECT_TRUE(ag::grad_enabled());
}

}  // namespace
}  // namespace plcadapt

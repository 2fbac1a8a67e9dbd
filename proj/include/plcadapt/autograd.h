// include/plcadapt/autograd.h

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

#ifndef PLCADAPT_AUTOGRAD_H_
#define PLCADAPT_AUTOGRAD_H_

// A small reverse-mode autodiff over dense Eigen matrices. Every value is a
// 2-D matrix; image-like tensors are stored as [channels x (rows * cols)] with
// pixel index r * cols + c, so a single-channel mel spectrogram stored
// frame-major is already a valid [1 x (T * n_mels)] image.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace plcadapt::ag {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Matrix value;
  // Leaves may alias an externally owned matrix instead of copying it.
  const Matrix* external = nullptr;
  Matrix grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward;

  const Matrix& val() const { return external ? *external : value; }
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
  double scalar() const { return val()(0, 0); }

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

// Gradient recording is on by default and can be disabled per thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var constant(Matrix value);
// Aliases `value`; it must outlive the graph.
Var constant_ref(const Matrix& value);
Var constant_ref(Matrix&&) = delete;
// Aliases `value` and records gradients for it (when grad mode is on).
Var parameter(const Matrix& value);
Var parameter(Matrix&&) = delete;

// Runs reverse accumulation from a 1x1 root.
void backward(const Var& root, double seed = 1.0);

struct Grid {
  int rows = 0;
  int cols = 0;
  int size() const { return rows * cols; }
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
// Adds column vector `bias` to every column of `a`.
Var add_bias(const Var& a, const Var& bias);
Var relu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
// Column-wise softmax.
Var softmax(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
// Mean over all cells of |a - b|.
Var mean_abs_diff(const Var& a, const Var& b);
// Token-mean negative log-likelihood of `targets[u]` under column u of
// `logits` ([vocab x U]).
Var cross_entropy(const Var& logits, std::span<const int> targets);
// Scalar whose value and input gradient were computed elsewhere.
Var external_loss(const Var& input, double value, Matrix input_grad);

// 'same' convolution with odd kernel sizes. `weight` is
// [out x (kh * kw * in)], block (i * kw + j) holding the taps for offset (i, j).
Var conv2d(const Var& x, Grid grid, const Var& weight, const Var& bias, int kh,
           int kw);
// Non-overlapping max pooling; grid dims must divide evenly.
Var maxpool2d(const Var& x, Grid grid, int ph, int pw);
Var avgpool2d(const Var& x, Grid grid, int ph, int pw);
Var upsample_nearest(const Var& x, Grid grid, int fh, int fw);
// Extends the grid at the bottom/right with a constant.
Var pad_grid(const Var& x, Grid grid, int extra_rows, int extra_cols,
             double fill);
// Keeps the top-left `out` region.
Var crop_grid(const Var& x, Grid grid, Grid out);

}  // namespace plcadapt::ag

#endif  // PLCADAPT_AUTOGRAD_H_

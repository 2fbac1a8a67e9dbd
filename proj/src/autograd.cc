// src/autograd.cc

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

#include "plcadapt/autograd.h"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace plcadapt::ag {

namespace {

thread_local bool g_grad_enabled = true;

Var make_node(Matrix value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward_fn);
  }
  return node;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a->rows() != b->rows() || a->cols() != b->cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

// Copies x ([c x rows*cols]) into a zero-padded grid of
// [(rows + kh - 1) x (cols + kw - 1)].
Matrix pad_for_conv(const Matrix& x, Grid g, int kh, int kw) {
  const int ph = (kh - 1) / 2;
  const int pw = (kw - 1) / 2;
  const int wp = g.cols + kw - 1;
  const int hp = g.rows + kh - 1;
  Matrix xp = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(hp) * wp);
  for (int r = 0; r < g.rows; ++r) {
    xp.middleCols(static_cast<Eigen::Index>(r + ph) * wp + pw, g.cols) =
        x.middleCols(static_cast<Eigen::Index>(r) * g.cols, g.cols);
  }
  return xp;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

Var constant_ref(const Matrix& value) {
  auto node = std::make_shared<Node>();
  node->external = &value;
  return node;
}

Var parameter(const Matrix& value) {
  auto node = std::make_shared<Node>();
  node->external = &value;
  node->requires_grad = g_grad_enabled;
  return node;
}

void backward(const Var& root, double seed) {
  if (root->rows() != 1 || root->cols() != 1) {
    throw std::invalid_argument("backward: root must be a scalar");
  }
  if (!root->requires_grad) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->accumulate(Matrix::Constant(1, 1, seed));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_node(a->val() + b->val(), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->accumulate(self.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_node(a->val() - b->val(), {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(-self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make_node(a->val().cwiseProduct(b->val()), {a, b}, [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(pb->val()));
    if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(pa->val()));
  });
}

Var scale(const Var& a, double s) {
  return make_node(a->val() * s, {a}, [s](Node& self) {
    self.parents[0]->accumulate(self.grad * s);
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a->cols() != b->rows()) throw std::invalid_argument("matmul: inner dims");
  Matrix out = a->val() * b->val();
  return make_node(std::move(out), {a, b}, [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) pa->accumulate(self.grad * pb->val().transpose());
    if (pb->requires_grad) pb->accumulate(pa->val().transpose() * self.grad);
  });
}

Var transpose(const Var& a) {
  return make_node(a->val().transpose(), {a}, [](Node& self) {
    self.parents[0]->accumulate(self.grad.transpose());
  });
}

Var add_bias(const Var& a, const Var& bias) {
  if (bias->cols() != 1 || bias->rows() != a->rows()) {
    throw std::invalid_argument("add_bias: bias must be [rows x 1]");
  }
  Matrix out = a->val().colwise() + bias->val().col(0);
  return make_node(std::move(out), {a, bias}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) {
      self.parents[1]->accumulate(self.grad.rowwise().sum());
    }
  });
}

Var relu(const Var& a) {
  Matrix out = a->val().cwiseMax(0.0);
  return make_node(std::move(out), {a}, [](Node& self) {
    Matrix g = (self.value.array() > 0.0).select(self.grad.array(), 0.0).matrix();
    self.parents[0]->accumulate(g);
  });
}

Var tanh(const Var& a) {
  Matrix out = a->val().array().tanh().matrix();
  return make_node(std::move(out), {a}, [](Node& self) {
    self.parents[0]->accumulate(
        (self.grad.array() * (1.0 - self.value.array().square())).matrix());
  });
}

Var sigmoid(const Var& a) {
  Matrix out = (1.0 / (1.0 + (-a->val().array()).exp())).matrix();
  return make_node(std::move(out), {a}, [](Node& self) {
    self.parents[0]->accumulate(
        (self.grad.array() * self.value.array() * (1.0 - self.value.array()))
            .matrix());
  });
}

Var concat_rows(std::span<const Var> parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front()->cols();
  for (const auto& p : parts) {
    if (p->cols() != cols) throw std::invalid_argument("concat_rows: cols");
    rows += p->rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p->rows()) = p->val();
    at += p->rows();
  }
  return make_node(std::move(out), {parts.begin(), parts.end()}, [](Node& self) {
    Eigen::Index at = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad) p->accumulate(self.grad.middleRows(at, p->rows()));
      at += p->rows();
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front()->rows();
  for (const auto& p : parts) {
    if (p->rows() != rows) throw std::invalid_argument("concat_cols: rows");
    cols += p->cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p->cols()) = p->val();
    at += p->cols();
  }
  return make_node(std::move(out), {parts.begin(), parts.end()}, [](Node& self) {
    Eigen::Index at = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad) p->accumulate(self.grad.middleCols(at, p->cols()));
      at += p->cols();
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a->cols()) {
    throw std::invalid_argument("slice_cols: out of range");
  }
  return make_node(a->val().middleCols(start, count), {a},
                   [start, count](Node& self) {
                     auto& p = self.parents[0];
                     if (p->grad.size() == 0) p->grad = Matrix::Zero(p->rows(), p->cols());
                     p->grad.middleCols(start, count) += self.grad;
                   });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a->rows()) {
    throw std::invalid_argument("slice_rows: out of range");
  }
  return make_node(a->val().middleRows(start, count), {a},
                   [start, count](Node& self) {
                     auto& p = self.parents[0];
                     if (p->grad.size() == 0) p->grad = Matrix::Zero(p->rows(), p->cols());
                     p->grad.middleRows(start, count) += self.grad;
                   });
}

Var softmax(const Var& a) {
  Matrix out = a->val();
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double m = out.col(c).maxCoeff();
    out.col(c) = (out.col(c).array() - m).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return make_node(std::move(out), {a}, [](Node& self) {
    const Matrix& y = self.value;
    Eigen::RowVectorXd dots = y.cwiseProduct(self.grad).colwise().sum();
    Matrix g = y.cwiseProduct(self.grad - Matrix::Ones(y.rows(), 1) * dots);
    self.parents[0]->accumulate(g);
  });
}

Var sum(const Var& a) {
  return make_node(Matrix::Constant(1, 1, a->val().sum()), {a}, [](Node& self) {
    auto& p = self.parents[0];
    p->accumulate(Matrix::Constant(p->rows(), p->cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a->val().size());
  return make_node(Matrix::Constant(1, 1, a->val().sum() / n), {a},
                   [n](Node& self) {
                     auto& p = self.parents[0];
                     p->accumulate(
                         Matrix::Constant(p->rows(), p->cols(), self.grad(0, 0) / n));
                   });
}

Var mean_abs_diff(const Var& a, const Var& b) {
  check_same_shape(a, b, "mean_abs_diff");
  Matrix diff = a->val() - b->val();
  const double n = static_cast<double>(diff.size());
  const double value = diff.cwiseAbs().sum() / n;
  return make_node(Matrix::Constant(1, 1, value), {a, b},
                   [diff = std::move(diff), n](Node& self) {
                     Matrix g = diff.array().sign().matrix() * (self.grad(0, 0) / n);
                     if (self.parents[0]->requires_grad) self.parents[0]->accumulate(g);
                     if (self.parents[1]->requires_grad) self.parents[1]->accumulate(-g);
                   });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  const Matrix& z = logits->val();
  if (static_cast<size_t>(z.cols()) != targets.size() || targets.empty()) {
    throw std::invalid_argument("cross_entropy: one target per column required");
  }
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index u = 0; u < z.cols(); ++u) {
    const int t = targets[static_cast<size_t>(u)];
    if (t < 0 || t >= z.rows()) throw std::invalid_argument("cross_entropy: target id");
    const double m = z.col(u).maxCoeff();
    probs.col(u) = (z.col(u).array() - m).exp().matrix();
    const double s = probs.col(u).sum();
    probs.col(u) /= s;
    total += (m + std::log(s)) - z(t, u);
  }
  const double n = static_cast<double>(z.cols());
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_node(Matrix::Constant(1, 1, total / n), {logits},
                   [probs = std::move(probs), tgt = std::move(tgt), n](Node& self) {
                     Matrix g = probs;
                     for (size_t u = 0; u < tgt.size(); ++u) {
                       g(tgt[u], static_cast<Eigen::Index>(u)) -= 1.0;
                     }
                     self.parents[0]->accumulate(g * (self.grad(0, 0) / n));
                   });
}

Var external_loss(const Var& input, double value, Matrix input_grad) {
  if (input_grad.rows() != input->rows() || input_grad.cols() != input->cols()) {
    throw std::invalid_argument("external_loss: gradient shape mismatch");
  }
  return make_node(Matrix::Constant(1, 1, value), {input},
                   [g = std::move(input_grad)](Node& self) {
                     self.parents[0]->accumulate(g * self.grad(0, 0));
                   });
}

Var conv2d(const Var& x, Grid grid, const Var& weight, const Var& bias, int kh,
           int kw) {
  const Eigen::Index cin = x->rows();
  const Eigen::Index cout = weight->rows();
  if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d: odd kernels only");
  if (x->cols() != grid.size()) throw std::invalid_argument("conv2d: grid size");
  if (weight->cols() != cin * kh * kw) throw std::invalid_argument("conv2d: weight shape");
  if (bias->rows() != cout || bias->cols() != 1) {
    throw std::invalid_argument("conv2d: bias shape");
  }
  // Taps become constant offsets in the flattened padded grid, so each tap is
  // one GEMM over a contiguous column block.
  const int wp = grid.cols + kw - 1;
  const Eigen::Index nq = static_cast<Eigen::Index>(grid.rows - 1) * wp + grid.cols;
  const Matrix& w = weight->val();
  Matrix out(cout, grid.size());
  {
    const Matrix xp = pad_for_conv(x->val(), grid, kh, kw);
    Matrix acc = Matrix::Zero(cout, nq);
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const Eigen::Index k = static_cast<Eigen::Index>(i) * kw + j;
        acc.noalias() += w.middleCols(k * cin, cin) *
                         xp.middleCols(static_cast<Eigen::Index>(i) * wp + j, nq);
      }
    }
    for (int r = 0; r < grid.rows; ++r) {
      out.middleCols(static_cast<Eigen::Index>(r) * grid.cols, grid.cols) =
          acc.middleCols(static_cast<Eigen::Index>(r) * wp, grid.cols);
    }
    out.colwise() += bias->val().col(0);
  }
  return make_node(std::move(out), {x, weight, bias},
                   [grid, kh, kw, cin, wp, nq](Node& self) {
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    auto& pb = self.parents[2];
    const Eigen::Index cout = self.grad.rows();
    Matrix gq = Matrix::Zero(cout, nq);
    for (int r = 0; r < grid.rows; ++r) {
      gq.middleCols(static_cast<Eigen::Index>(r) * wp, grid.cols) =
          self.grad.middleCols(static_cast<Eigen::Index>(r) * grid.cols, grid.cols);
    }
    if (pb->requires_grad) pb->accumulate(self.grad.rowwise().sum());
    if (pw->requires_grad) {
      const Matrix xp = pad_for_conv(px->val(), grid, kh, kw);
      Matrix gw(cout, cin * kh * kw);
      for (int i = 0; i < kh; ++i) {
        for (int j = 0; j < kw; ++j) {
          const Eigen::Index k = static_cast<Eigen::Index>(i) * kw + j;
          gw.middleCols(k * cin, cin).noalias() =
              gq * xp.middleCols(static_cast<Eigen::Index>(i) * wp + j, nq).transpose();
        }
      }
      pw->accumulate(gw);
    }
    if (px->requires_grad) {
      const int ph = (kh - 1) / 2;
      const int pwd = (kw - 1) / 2;
      const int hp = grid.rows + kh - 1;
      Matrix gxp = Matrix::Zero(cin, static_cast<Eigen::Index>(hp) * wp);
      const Matrix& w = pw->val();
      for (int i = 0; i < kh; ++i) {
        for (int j = 0; j < kw; ++j) {
          const Eigen::Index k = static_cast<Eigen::Index>(i) * kw + j;
          gxp.middleCols(static_cast<Eigen::Index>(i) * wp + j, nq).noalias() +=
              w.middleCols(k * cin, cin).transpose() * gq;
        }
      }
      Matrix gx(cin, grid.size());
      for (int r = 0; r < grid.rows; ++r) {
        gx.middleCols(static_cast<Eigen::Index>(r) * grid.cols, grid.cols) =
            gxp.middleCols(static_cast<Eigen::Index>(r + ph) * wp + pwd, grid.cols);
      }
      px->accumulate(gx);
    }
  });
}

Var avgpool2d(const Var& x, Grid grid, int ph, int pw) {
  if (grid.rows % ph != 0 || grid.cols % pw != 0) {
    throw std::invalid_argument("avgpool2d: grid not divisible by pool size");
  }
  if (x->cols() != grid.size()) throw std::invalid_argument("avgpool2d: grid size");
  const Matrix& v = x->val();
  const int orows = grid.rows / ph;
  const int ocols = grid.cols / pw;
  const double w = 1.0 / (ph * pw);
  Matrix out = Matrix::Zero(v.rows(), static_cast<Eigen::Index>(orows) * ocols);
  for (int r = 0; r < orows; ++r) {
    for (int q = 0; q < ocols; ++q) {
      const Eigen::Index o = static_cast<Eigen::Index>(r) * ocols + q;
      for (int i = 0; i < ph; ++i) {
        for (int j = 0; j < pw; ++j) out.col(o) += v.col((r * ph + i) * grid.cols + (q * pw + j));
      }
      out.col(o) *= w;
    }
  }
  return make_node(std::move(out), {x}, [grid, ph, pw, ocols, w](Node& self) {
    Matrix g(self.grad.rows(), grid.size());
    for (int rr = 0; rr < grid.rows; ++rr) {
      for (int cc = 0; cc < grid.cols; ++cc) {
        g.col(rr * grid.cols + cc) = w * self.grad.col((rr / ph) * ocols + cc / pw);
      }
    }
    self.parents[0]->accumulate(g);
  });
}

Var maxpool2d(const Var& x, Grid grid, int ph, int pw) {
  if (grid.rows % ph != 0 || grid.cols % pw != 0) {
    throw std::invalid_argument("maxpool2d: grid not divisible by pool size");
  }
  if (x->cols() != grid.size()) throw std::invalid_argument("maxpool2d: grid size");
  const Matrix& v = x->val();
  const int orows = grid.rows / ph;
  const int ocols = grid.cols / pw;
  const Eigen::Index c = v.rows();
  Matrix out(c, static_cast<Eigen::Index>(orows) * ocols);
  std::vector<int> argmax(static_cast<size_t>(out.size()));
  for (int r = 0; r < orows; ++r) {
    for (int q = 0; q < ocols; ++q) {
      const Eigen::Index o = static_cast<Eigen::Index>(r) * ocols + q;
      for (Eigen::Index ch = 0; ch < c; ++ch) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = 0;
        for (int i = 0; i < ph; ++i) {
          for (int j = 0; j < pw; ++j) {
            const int idx = (r * ph + i) * grid.cols + (q * pw + j);
            const double val = v(ch, idx);
            if (val > best) {
              best = val;
              best_idx = idx;
            }
          }
        }
        out(ch, o) = best;
        argmax[static_cast<size_t>(o * c + ch)] = best_idx;
      }
    }
  }
  return make_node(std::move(out), {x},
                   [argmax = std::move(argmax), c, n = grid.size()](Node& self) {
    Matrix g = Matrix::Zero(c, n);
    for (Eigen::Index o = 0; o < self.grad.cols(); ++o) {
      for (Eigen::Index ch = 0; ch < c; ++ch) {
        g(ch, argmax[static_cast<size_t>(o * c + ch)]) += self.grad(ch, o);
      }
    }
    self.parents[0]->accumulate(g);
  });
}

Var upsample_nearest(const Var& x, Grid grid, int fh, int fw) {
  if (x->cols() != grid.size()) throw std::invalid_argument("upsample: grid size");
  const int orows = grid.rows * fh;
  const int ocols = grid.cols * fw;
  const Matrix& v = x->val();
  Matrix out(v.rows(), static_cast<Eigen::Index>(orows) * ocols);
  for (int r = 0; r < orows; ++r) {
    for (int q = 0; q < ocols; ++q) {
      out.col(static_cast<Eigen::Index>(r) * ocols + q) =
          v.col(static_cast<Eigen::Index>(r / fh) * grid.cols + q / fw);
    }
  }
  return make_node(std::move(out), {x}, [grid, fh, fw, orows, ocols](Node& self) {
    Matrix g = Matrix::Zero(self.grad.rows(), grid.size());
    for (int r = 0; r < orows; ++r) {
      for (int q = 0; q < ocols; ++q) {
        g.col(static_cast<Eigen::Index>(r / fh) * grid.cols + q / fw) +=
            self.grad.col(static_cast<Eigen::Index>(r) * ocols + q);
      }
    }
    self.parents[0]->accumulate(g);
  });
}

Var pad_grid(const Var& x, Grid grid, int extra_rows, int extra_cols, double fill) {
  if (x->cols() != grid.size()) throw std::invalid_argument("pad_grid: grid size");
  const Grid out_grid{grid.rows + extra_rows, grid.cols + extra_cols};
  Matrix out = Matrix::Constant(x->rows(), out_grid.size(), fill);
  for (int r = 0; r < grid.rows; ++r) {
    out.middleCols(static_cast<Eigen::Index>(r) * out_grid.cols, grid.cols) =
        x->val().middleCols(static_cast<Eigen::Index>(r) * grid.cols, grid.cols);
  }
  return make_node(std::move(out), {x}, [grid, out_grid](Node& self) {
    Matrix g(self.grad.rows(), grid.size());
    for (int r = 0; r < grid.rows; ++r) {
      g.middleCols(static_cast<Eigen::Index>(r) * grid.cols, grid.cols) =
          self.grad.middleCols(static_cast<Eigen::Index>(r) * out_grid.cols, grid.cols);
    }
    self.parents[0]->accumulate(g);
  });
}

Var crop_grid(const Var& x, Grid grid, Grid out_grid) {
  if (x->cols() != grid.size() || out_grid.rows > grid.rows ||
      out_grid.cols > grid.cols) {
    throw std::invalid_argument("crop_grid: bad shapes");
  }
  Matrix out(x->rows(), out_grid.size());
  for (int r = 0; r < out_grid.rows; ++r) {
    out.middleCols(static_cast<Eigen::Index>(r) * out_grid.cols, out_grid.cols) =
        x->val().middleCols(static_cast<Eigen::Index>(r) * grid.cols, out_grid.cols);
  }
  return make_node(std::move(out), {x}, [grid, out_grid](Node& self) {
    Matrix g = Matrix::Zero(self.grad.rows(), grid.size());
    for (int r = 0; r < out_grid.rows; ++r) {
      g.middleCols(static_cast<Eigen::Index>(r) * grid.cols, out_grid.cols) =
          self.grad.middleCols(static_cast<Eigen::Index>(r) * out_grid.cols,
                               out_grid.cols);
    }
    self.parents[0]->accumulate(g);
  });
}

}  // namespace plcadapt::ag

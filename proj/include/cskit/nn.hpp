// Copyright 2026 cskit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Minimal reverse-mode autodiff over Eigen vectors, sized for desk-scale
// sequence models. A Tape is rebuilt per training example; parameters live
// in a ParamStore and receive gradients during backward().

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cskit/common.hpp"

namespace cskit {

inline Eigen::VectorXd log_softmax_vec(const Eigen::VectorXd& x) {
  const double mx = x.maxCoeff();
  const double lse = mx + std::log((x.array() - mx).exp().sum());
  return (x.array() - lse).matrix();
}

// Log-softmax with one entry excluded from normalization and support; the
// excluded entry is set to -inf.
inline Eigen::VectorXd log_softmax_masked_vec(const Eigen::VectorXd& x,
                                              int masked_index) {
  double mx = neg_inf();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (i != masked_index) mx = std::max(mx, x[i]);
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (i != masked_index) s += std::exp(x[i] - mx);
  const double lse = mx + std::log(s);
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out[i] = (i == static_cast<Eigen::Index>(masked_index)) ? neg_inf()
                                                            : x[i] - lse;
  return out;
}

struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
};

class ParamStore {
 public:
  int add(std::string name, int rows, int cols) {
    Tensor t;
    t.name = std::move(name);
    t.value = Eigen::MatrixXd::Zero(rows, cols);
    t.grad = Eigen::MatrixXd::Zero(rows, cols);
    tensors_.push_back(std::move(t));
    return static_cast<int>(tensors_.size()) - 1;
  }

  Tensor& at(int id) { return tensors_.at(id); }
  const Tensor& at(int id) const { return tensors_.at(id); }
  int count() const { return static_cast<int>(tensors_.size()); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& t : tensors_) t.grad.setZero();
  }

  // Uniform(-r, r) init with r = 1/sqrt(fan_in), fan_in = cols.
  void init_uniform(Rng& rng) {
    for (auto& t : tensors_) {
      const double r = 1.0 / std::sqrt(static_cast<double>(
                           std::max<Eigen::Index>(1, t.value.cols())));
      for (Eigen::Index i = 0; i < t.value.rows(); ++i)
        for (Eigen::Index j = 0; j < t.value.cols(); ++j)
          t.value(i, j) = rng.uniform(-r, r);
    }
  }

  double grad_norm() const {
    double s = 0.0;
    for (const auto& t : tensors_) s += t.grad.squaredNorm();
    return std::sqrt(s);
  }

  // Scales gradients so the global norm does not exceed max_norm. Returns
  // the pre-clip norm.
  double clip_grad_norm(double max_norm) {
    const double n = grad_norm();
    if (n > max_norm && n > 0.0) {
      const double s = max_norm / n;
      for (auto& t : tensors_) t.grad *= s;
    }
    return n;
  }

  void scale_grad(double s) {
    for (auto& t : tensors_) t.grad *= s;
  }

  // Flatten / restore all parameter values; used by finite-difference checks
  // and the checkpoint writer.
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(scalar_count());
    std::size_t k = 0;
    for (const auto& t : tensors_)
      for (Eigen::Index i = 0; i < t.value.rows(); ++i)
        for (Eigen::Index j = 0; j < t.value.cols(); ++j) v[k++] = t.value(i, j);
    return v;
  }

  Eigen::VectorXd flatten_grad() const {
    Eigen::VectorXd v(scalar_count());
    std::size_t k = 0;
    for (const auto& t : tensors_)
      for (Eigen::Index i = 0; i < t.grad.rows(); ++i)
        for (Eigen::Index j = 0; j < t.grad.cols(); ++j) v[k++] = t.grad(i, j);
    return v;
  }

  void unflatten(const Eigen::VectorXd& v) {
    std::size_t k = 0;
    for (auto& t : tensors_)
      for (Eigen::Index i = 0; i < t.value.rows(); ++i)
        for (Eigen::Index j = 0; j < t.value.cols(); ++j) t.value(i, j) = v[k++];
  }

  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::vector<Tensor>& tensors() { return tensors_; }

 private:
  std::vector<Tensor> tensors_;
};

// Reverse-mode tape. Node values are column vectors; scalars are size-1
// vectors. Matrices enter only as parameters (MatVec / EmbedRow).
class Tape {
 public:
  using Id = std::int32_t;

  explicit Tape(ParamStore* params) : params_(params) {}

  Id input(const Eigen::VectorXd& v) { return push(Op::kInput, -1, -1, -1, v); }

  Id constant(double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return push(Op::kInput, -1, -1, -1, v);
  }

  Id param_vec(int param) {
    const Tensor& t = params_->at(param);
    return push(Op::kParamVec, -1, -1, param, t.value.col(0));
  }

  Id embed_row(int param, int row) {
    const Tensor& t = params_->at(param);
    return push(Op::kEmbedRow, -1, -1, param, t.value.row(row).transpose(), row);
  }

  Id matvec(int param, Id v) {
    const Tensor& t = params_->at(param);
    return push(Op::kMatVec, v, -1, param, t.value * val(v));
  }

  Id add(Id a, Id b) { return push(Op::kAdd, a, b, -1, val(a) + val(b)); }

  Id tanh(Id a) {
    return push(Op::kTanh, a, -1, -1, val(a).array().tanh().matrix());
  }

  Id log_softmax(Id a) {
    return push(Op::kLogSoftmax, a, -1, -1, log_softmax_vec(val(a)));
  }

  // Masked entry is dropped from normalization and must never be picked.
  Id log_softmax_masked(Id a, int masked_index) {
    return push(Op::kLogSoftmax, a, -1, -1,
                log_softmax_masked_vec(val(a), masked_index), masked_index);
  }

  Id pick(Id a, int index) {
    Eigen::VectorXd v(1);
    v[0] = val(a)[index];
    return push(Op::kPick, a, -1, -1, v, index);
  }

  Id log_add_exp2(Id a, Id b) {
    Eigen::VectorXd v(1);
    v[0] = log_add_exp(val(a)[0], val(b)[0]);
    return push(Op::kLogAddExp, a, b, -1, v);
  }

  Id scale(Id a, double c) {
    return push(Op::kScale, a, -1, -1, val(a) * c, -1, c);
  }

  const Eigen::VectorXd& val(Id id) const { return nodes_[id].val; }
  double scalar(Id id) const { return nodes_[id].val[0]; }
  std::size_t node_count() const { return nodes_.size(); }

  // Accumulates d(root)/d(param) into ParamStore grads. root must be scalar.
  void backward(Id root) {
    if (nodes_[root].val.size() != 1)
      throw std::invalid_argument("Tape::backward: root is not a scalar");
    grads_.assign(nodes_.size(), Eigen::VectorXd());
    ensure_grad(root)[0] = 1.0;
    for (Id i = static_cast<Id>(nodes_.size()) - 1; i >= 0; --i) {
      if (grads_[i].size() == 0) continue;  // not on any path to root
      const Node& n = nodes_[i];
      const Eigen::VectorXd& g = grads_[i];
      switch (n.op) {
        case Op::kInput:
          break;
        case Op::kParamVec:
          params_->at(n.param).grad.col(0) += g;
          break;
        case Op::kEmbedRow:
          params_->at(n.param).grad.row(n.index) += g.transpose();
          break;
        case Op::kMatVec: {
          Tensor& t = params_->at(n.param);
          t.grad.noalias() += g * nodes_[n.a].val.transpose();
          ensure_grad(n.a).noalias() += t.value.transpose() * g;
          break;
        }
        case Op::kAdd:
          ensure_grad(n.a) += g;
          ensure_grad(n.b) += g;
          break;
        case Op::kTanh:
          ensure_grad(n.a).array() += g.array() * (1.0 - n.val.array().square());
          break;
        case Op::kLogSoftmax: {
          // dx = g - softmax * sum(g); a masked entry has softmax 0 and
          // receives no gradient because it is never picked.
          const double gsum = g.sum();
          Eigen::VectorXd& ga = ensure_grad(n.a);
          for (Eigen::Index k = 0; k < g.size(); ++k) {
            if (k == static_cast<Eigen::Index>(n.index)) continue;
            ga[k] += g[k] - std::exp(n.val[k]) * gsum;
          }
          break;
        }
        case Op::kPick:
          ensure_grad(n.a)[n.index] += g[0];
          break;
        case Op::kLogAddExp: {
          const double out = n.val[0];
          const double va = nodes_[n.a].val[0];
          const double vb = nodes_[n.b].val[0];
          if (va != neg_inf()) ensure_grad(n.a)[0] += g[0] * std::exp(va - out);
          if (vb != neg_inf()) ensure_grad(n.b)[0] += g[0] * std::exp(vb - out);
          break;
        }
        case Op::kScale:
          ensure_grad(n.a) += n.aux * g;
          break;
      }
    }
  }

 private:
  enum class Op : std::uint8_t {
    kInput,
    kParamVec,
    kEmbedRow,
    kMatVec,
    kAdd,
    kTanh,
    kLogSoftmax,
    kPick,
    kLogAddExp,
    kScale,
  };

  struct Node {
    Op op;
    Id a, b;
    int param;
    int index;      // row for kEmbedRow, element for kPick, mask for kLogSoftmax
    double aux;     // factor for kScale
    Eigen::VectorXd val;
  };

  Id push(Op op, Id a, Id b, int param, Eigen::VectorXd v, int index = -1,
          double aux = 0.0) {
    nodes_.push_back(Node{op, a, b, param, index, aux, std::move(v)});
    return static_cast<Id>(nodes_.size()) - 1;
  }

  Eigen::VectorXd& ensure_grad(Id id) {
    if (grads_[id].size() == 0)
      grads_[id] = Eigen::VectorXd::Zero(nodes_[id].val.size());
    return grads_[id];
  }

  ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<Eigen::VectorXd> grads_;
};

// Adam with bias correction. State is kept per tensor and allocated on the
// first step.
class AdamOptimizer {
 public:
  AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params, double lr) {
    if (m_.empty()) {
      for (const auto& t : params.tensors()) {
        m_.push_back(Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
        v_.push_back(Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (int i = 0; i < params.count(); ++i) {
      Tensor& p = params.at(i);
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
      const Eigen::MatrixXd mhat = m_[i] / bc1;
      const Eigen::MatrixXd vhat = v_[i] / bc2;
      p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps_);
    }
  }

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace cskit

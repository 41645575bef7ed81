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
// Neural transducer: Elman acoustic and label encoders, a standard two-layer
// tanh joiner or a "simple" additive-logits joiner, the lattice loss, Adam
// training, a recurrent NNLM, and internal-LM scores. Direct (inference)
// evaluation and tape (training) evaluation share the same formulas and
// operation order, so they agree bit for bit.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cskit/common.hpp"
#include "cskit/corpus.hpp"
#include "cskit/nn.hpp"

namespace cskit {

// Rows are frames, columns are feature dimensions.
using FeatureSequence = Eigen::MatrixXd;

enum class JoinerVariant { kStandard, kSimple };

inline const char* joiner_name(JoinerVariant v) {
  return v == JoinerVariant::kStandard ? "standard" : "simple";
}

inline JoinerVariant joiner_from_name(std::string_view s) {
  if (s == "standard") return JoinerVariant::kStandard;
  if (s == "simple") return JoinerVariant::kSimple;
  throw std::invalid_argument("unknown joiner variant: " + std::string(s));
}

struct ModelDims {
  int feature_dim = 8;
  int frame_stack = 1;
  int hidden_dim = 16;
  int joiner_hidden = 16;
  int vocab_size = 0;  // includes blank

  int stacked_dim() const { return feature_dim * frame_stack; }

  void validate() const {
    if (feature_dim <= 0 || frame_stack <= 0 || hidden_dim <= 0 ||
        joiner_hidden <= 0 || vocab_size < 2)
      throw std::invalid_argument("ModelDims: invalid dimensions");
  }
};

// Training hyperparameters. The learning-rate defaults follow the reference
// recipe: 1e-4 for (pre)training, 2.5e-4 for fine-tuning, exponential decay
// of 0.96 per epoch, gradient-norm clipping at 5.0.
inline constexpr double kPretrainLr = 1e-4;
inline constexpr double kFinetuneLr = 2.5e-4;
inline constexpr double kLrDecay = 0.96;
inline constexpr double kGradClip = 5.0;

struct TrainConfig {
  int epochs = 10;
  int batch_size = 8;
  double lr = kPretrainLr;
  double lr_decay = kLrDecay;
  double grad_clip = kGradClip;
  double divergence_limit = 1e4;
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// Groups consecutive frames into non-overlapping windows of `stack` frames
// (zero-padded tail), concatenating them feature-wise.
inline Eigen::MatrixXd stack_frames(const FeatureSequence& x, int stack) {
  if (stack <= 1) return x;
  const Eigen::Index t_out = (x.rows() + stack - 1) / stack;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t_out, x.cols() * stack);
  for (Eigen::Index t = 0; t < t_out; ++t)
    for (int k = 0; k < stack; ++k) {
      const Eigen::Index src = t * stack + k;
      if (src < x.rows()) out.block(t, k * x.cols(), 1, x.cols()) = x.row(src);
    }
  return out;
}

class TransducerModel {
 public:
  TransducerModel(const ModelDims& dims, JoinerVariant variant,
                  UnionVocab vocab)
      : dims_(dims), variant_(variant), vocab_(std::move(vocab)) {
    dims_.vocab_size = vocab_.size();
    dims_.validate();
    const int h = dims_.hidden_dim;
    const int v = dims_.vocab_size;
    ac_w_in_ = params_.add("acoustic.w_in", h, dims_.stacked_dim());
    ac_w_rec_ = params_.add("acoustic.w_rec", h, h);
    ac_bias_ = params_.add("acoustic.bias", h, 1);
    // Row vocab_size of the embedding is the learned begin-of-sentence row;
    // row 0 (blank) is never read.
    lb_embed_ = params_.add("label.embed", v + 1, h);
    lb_w_rec_ = params_.add("label.w_rec", h, h);
    lb_bias_ = params_.add("label.bias", h, 1);
    if (variant_ == JoinerVariant::kStandard) {
      jo_w1_ = params_.add("joiner.w1", dims_.joiner_hidden, h);
      jo_b1_ = params_.add("joiner.b1", dims_.joiner_hidden, 1);
      jo_w2_ = params_.add("joiner.w2", v, dims_.joiner_hidden);
      jo_b2_ = params_.add("joiner.b2", v, 1);
    } else {
      jo_aw_ = params_.add("joiner.acoustic_w", v, h);
      jo_ab_ = params_.add("joiner.acoustic_b", v, 1);
      jo_lw_ = params_.add("joiner.label_w", v, h);
      jo_lb_ = params_.add("joiner.label_b", v, 1);
    }
  }

  void init(Rng& rng) { params_.init_uniform(rng); }

  const ModelDims& dims() const { return dims_; }
  JoinerVariant variant() const { return variant_; }
  const UnionVocab& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  int blank_id() const { return vocab_.blank_id(); }
  int bos_row() const { return dims_.vocab_size; }

  // ---- Direct (inference) evaluation ----

  // Returns one hidden row per (stacked) frame.
  Eigen::MatrixXd encode_acoustic(const FeatureSequence& x) const {
    if (x.cols() != dims_.feature_dim)
      throw std::invalid_argument("encode_acoustic: feature dim mismatch");
    const Eigen::MatrixXd xs = stack_frames(x, dims_.frame_stack);
    Eigen::MatrixXd out(xs.rows(), dims_.hidden_dim);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(dims_.hidden_dim);
    for (Eigen::Index t = 0; t < xs.rows(); ++t) {
      const Eigen::VectorXd xt = xs.row(t).transpose();
      h = (((value(ac_w_in_) * xt).eval() + (value(ac_w_rec_) * h).eval())
               .eval() +
           value(ac_bias_).col(0))
              .array()
              .tanh()
              .matrix();
      out.row(t) = h.transpose();
    }
    return out;
  }

  Eigen::VectorXd label_start() const {
    return label_step_row(Eigen::VectorXd::Zero(dims_.hidden_dim), bos_row());
  }

  Eigen::VectorXd label_step(const Eigen::VectorXd& state, int token) const {
    check_label_token(token);
    return label_step_row(state, token);
  }

  // States after consuming 0..U prefix tokens; result[u] conditions the
  // prediction of token u.
  std::vector<Eigen::VectorXd> label_states(const std::vector<int>& y) const {
    std::vector<Eigen::VectorXd> states;
    states.reserve(y.size() + 1);
    states.push_back(label_start());
    for (int tok : y) states.push_back(label_step(states.back(), tok));
    return states;
  }

  Eigen::VectorXd joint_logits(const Eigen::VectorXd& h,
                               const Eigen::VectorXd& g) const {
    if (variant_ == JoinerVariant::kStandard) {
      const Eigen::VectorXd s = h + g;
      const Eigen::VectorXd a =
          ((value(jo_w1_) * s).eval() + value(jo_b1_).col(0))
              .array()
              .tanh()
              .matrix();
      return (value(jo_w2_) * a).eval() + value(jo_b2_).col(0);
    }
    return acoustic_branch_logits(h) + label_branch_logits(g);
  }

  // Per-language branch logits exist only for the simple joiner.
  Eigen::VectorXd acoustic_branch_logits(const Eigen::VectorXd& h) const {
    require_simple("acoustic_branch_logits");
    return (value(jo_aw_) * h).eval() + value(jo_ab_).col(0);
  }

  Eigen::VectorXd label_branch_logits(const Eigen::VectorXd& g) const {
    require_simple("label_branch_logits");
    return (value(jo_lw_) * g).eval() + value(jo_lb_).col(0);
  }

  // Full posterior (including blank) at frame t given a label prefix.
  Eigen::VectorXd joint_log_probs(const FeatureSequence& x,
                                  const std::vector<int>& y_prefix,
                                  int t) const {
    const Eigen::MatrixXd enc = encode_acoustic(x);
    if (t < 0 || t >= enc.rows())
      throw std::out_of_range("joint_log_probs: frame index out of range");
    Eigen::VectorXd g = label_start();
    for (int tok : y_prefix) g = label_step(g, tok);
    return log_softmax_vec(joint_logits(enc.row(t).transpose(), g));
  }

  // Internal LM: the joiner evaluated with a zero acoustic embedding,
  // renormalized over non-blank labels. Depends only on the label state.
  Eigen::VectorXd ilm_log_probs(const Eigen::VectorXd& g) const {
    const Eigen::VectorXd logits =
        joint_logits(Eigen::VectorXd::Zero(dims_.hidden_dim), g);
    return log_softmax_masked_vec(logits, blank_id());
  }

  double ilm_sequence_log_prob(const std::vector<int>& y) const {
    double lp = 0.0;
    Eigen::VectorXd g = label_start();
    for (int tok : y) {
      lp += ilm_log_probs(g)[tok];
      g = label_step(g, tok);
    }
    return lp;
  }

  // ---- Lattice loss (tape evaluation) ----

  // Negative log marginal probability of y given x, summed over all
  // blank-interleaved alignment paths. Accumulates parameter gradients when
  // requested.
  double loss(const FeatureSequence& x, const std::vector<int>& y,
              bool accumulate_grad = false) {
    for (int tok : y) check_label_token(tok);
    const Eigen::MatrixXd xs = stack_frames(x, dims_.frame_stack);
    const int big_t = static_cast<int>(xs.rows());
    const int big_u = static_cast<int>(y.size());
    if (big_t == 0)
      throw std::invalid_argument("TransducerModel::loss: empty input");

    Tape tape(&params_);
    // Acoustic states h_0..h_{T-1}.
    std::vector<Tape::Id> h(big_t);
    Tape::Id prev = tape.input(Eigen::VectorXd::Zero(dims_.hidden_dim));
    for (int t = 0; t < big_t; ++t) {
      const Tape::Id pre = tape.add(
          tape.add(tape.matvec(ac_w_in_, tape.input(xs.row(t).transpose())),
                   tape.matvec(ac_w_rec_, prev)),
          tape.param_vec(ac_bias_));
      h[t] = tape.tanh(pre);
      prev = h[t];
    }
    // Label states g_0..g_U.
    std::vector<Tape::Id> g(big_u + 1);
    Tape::Id gprev = tape.input(Eigen::VectorXd::Zero(dims_.hidden_dim));
    g[0] = tape_label_step(tape, gprev, bos_row());
    for (int u = 0; u < big_u; ++u) g[u + 1] = tape_label_step(tape, g[u], y[u]);

    // Log-posteriors on the lattice.
    std::vector<std::vector<Tape::Id>> lp(big_t,
                                          std::vector<Tape::Id>(big_u + 1));
    for (int t = 0; t < big_t; ++t)
      for (int u = 0; u <= big_u; ++u)
        lp[t][u] = tape.log_softmax(tape_joint_logits(tape, h[t], g[u]));

    // Forward recursion: alpha(t,u) = logaddexp(alpha(t-1,u) + blank,
    // alpha(t,u-1) + label).
    std::vector<std::vector<Tape::Id>> alpha(
        big_t, std::vector<Tape::Id>(big_u + 1, -1));
    for (int t = 0; t < big_t; ++t) {
      for (int u = 0; u <= big_u; ++u) {
        if (t == 0 && u == 0) {
          alpha[0][0] = tape.constant(0.0);
          continue;
        }
        Tape::Id horizontal = -1, vertical = -1;
        if (t > 0)
          horizontal = tape.add(alpha[t - 1][u],
                                tape.pick(lp[t - 1][u], blank_id()));
        if (u > 0)
          vertical = tape.add(alpha[t][u - 1], tape.pick(lp[t][u - 1], y[u - 1]));
        if (horizontal >= 0 && vertical >= 0)
          alpha[t][u] = tape.log_add_exp2(horizontal, vertical);
        else
          alpha[t][u] = horizontal >= 0 ? horizontal : vertical;
      }
    }
    const Tape::Id total = tape.add(alpha[big_t - 1][big_u],
                                    tape.pick(lp[big_t - 1][big_u], blank_id()));
    const Tape::Id nll = tape.scale(total, -1.0);
    if (accumulate_grad) tape.backward(nll);
    return tape.scalar(nll);
  }

  // ---- Checkpointing (bit-exact text format) ----

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw std::runtime_error("TransducerModel::save: cannot write " + path);
    out << "cskit checkpoint 1\n";
    out << "variant " << joiner_name(variant_) << "\n";
    out << "dims " << dims_.feature_dim << " " << dims_.frame_stack << " "
        << dims_.hidden_dim << " " << dims_.joiner_hidden << " "
        << dims_.vocab_size << "\n";
    vocab_.write_entries(out);
    write_params(out, params_);
  }

  static TransducerModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw std::runtime_error("TransducerModel::load: cannot read " + path);
    std::string line;
    std::getline(in, line);
    if (line != "cskit checkpoint 1")
      throw std::runtime_error("TransducerModel::load: bad header in " + path);
    std::getline(in, line);
    if (line.rfind("variant ", 0) != 0)
      throw std::runtime_error("TransducerModel::load: missing variant");
    const JoinerVariant variant = joiner_from_name(line.substr(8));
    std::getline(in, line);
    std::istringstream dims_in(line);
    std::string tag;
    ModelDims dims;
    dims_in >> tag >> dims.feature_dim >> dims.frame_stack >> dims.hidden_dim >>
        dims.joiner_hidden >> dims.vocab_size;
    if (tag != "dims")
      throw std::runtime_error("TransducerModel::load: missing dims");
    UnionVocab vocab = UnionVocab::read_entries(in);
    TransducerModel model(dims, variant, std::move(vocab));
    read_params(in, model.params_);
    return model;
  }

  static void write_params(std::ostream& out, const ParamStore& params) {
    out << "params " << params.count() << "\n";
    out << std::hexfloat;
    for (const auto& t : params.tensors()) {
      out << t.name << " " << t.value.rows() << " " << t.value.cols() << "\n";
      for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
          if (j) out << " ";
          out << t.value(i, j);
        }
        out << "\n";
      }
    }
    out << std::defaultfloat;
  }

  static void read_params(std::istream& in, ParamStore& params) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("params ", 0) != 0)
      throw std::runtime_error("checkpoint: missing params section");
    const int count = std::stoi(line.substr(7));
    if (count != params.count())
      throw std::runtime_error("checkpoint: parameter count mismatch");
    for (int k = 0; k < count; ++k) {
      if (!std::getline(in, line))
        throw std::runtime_error("checkpoint: truncated params");
      std::istringstream head(line);
      std::string name;
      Eigen::Index rows, cols;
      head >> name >> rows >> cols;
      Tensor& t = params.at(k);
      if (name != t.name || rows != t.value.rows() || cols != t.value.cols())
        throw std::runtime_error("checkpoint: tensor mismatch for " + t.name);
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line))
          throw std::runtime_error("checkpoint: truncated tensor " + t.name);
        std::istringstream row(line);
        for (Eigen::Index j = 0; j < cols; ++j) {
          std::string tok;
          row >> tok;
          t.value(i, j) = std::strtod(tok.c_str(), nullptr);
        }
      }
    }
  }

 private:
  const Eigen::MatrixXd& value(int id) const { return params_.at(id).value; }

  void check_label_token(int token) const {
    if (token <= 0 || token >= dims_.vocab_size)
      throw std::invalid_argument("transducer: label token out of range: " +
                                  std::to_string(token));
  }

  void require_simple(const char* what) const {
    if (variant_ != JoinerVariant::kSimple)
      throw std::logic_error(std::string(what) +
                             ": only defined for the simple joiner");
  }

  Eigen::VectorXd label_step_row(const Eigen::VectorXd& state, int row) const {
    return (((value(lb_embed_).row(row).transpose().eval() +
              (value(lb_w_rec_) * state).eval())
                 .eval() +
             value(lb_bias_).col(0))
                .array()
                .tanh())
        .matrix();
  }

  Tape::Id tape_label_step(Tape& tape, Tape::Id state, int row) {
    return tape.tanh(tape.add(
        tape.add(tape.embed_row(lb_embed_, row), tape.matvec(lb_w_rec_, state)),
        tape.param_vec(lb_bias_)));
  }

  Tape::Id tape_joint_logits(Tape& tape, Tape::Id h, Tape::Id g) {
    if (variant_ == JoinerVariant::kStandard) {
      const Tape::Id s = tape.add(h, g);
      const Tape::Id a = tape.tanh(
          tape.add(tape.matvec(jo_w1_, s), tape.param_vec(jo_b1_)));
      return tape.add(tape.matvec(jo_w2_, a), tape.param_vec(jo_b2_));
    }
    const Tape::Id ab = tape.add(tape.matvec(jo_aw_, h), tape.param_vec(jo_ab_));
    const Tape::Id lb = tape.add(tape.matvec(jo_lw_, g), tape.param_vec(jo_lb_));
    return tape.add(ab, lb);
  }

  ModelDims dims_;
  JoinerVariant variant_;
  UnionVocab vocab_;
  ParamStore params_;
  int ac_w_in_ = -1, ac_w_rec_ = -1, ac_bias_ = -1;
  int lb_embed_ = -1, lb_w_rec_ = -1, lb_bias_ = -1;
  int jo_w1_ = -1, jo_b1_ = -1, jo_w2_ = -1, jo_b2_ = -1;
  int jo_aw_ = -1, jo_ab_ = -1, jo_lw_ = -1, jo_lb_ = -1;
};

inline double transducer_loss(TransducerModel& model, const FeatureSequence& x,
                              const std::vector<int>& y,
                              bool accumulate_grad = false) {
  return model.loss(x, y, accumulate_grad);
}

// ---- Datasets ----

struct Example {
  std::string id;
  Lang lang = Lang::EN;
  std::string transcript;
  FeatureSequence features;
  std::vector<int> tokens;  // filled by encode_dataset
};

using Dataset = std::vector<Example>;

inline void encode_dataset(Dataset& data, const TextCodec& codec) {
  for (auto& ex : data) ex.tokens = codec.encode_text(ex.transcript);
}

// ---- Training ----

// One Adam step on a batch; returns the mean per-utterance loss.
inline double train_step(TransducerModel& model,
                         const std::vector<const Example*>& batch,
                         AdamOptimizer& opt, double lr, double grad_clip) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  model.params().zero_grad();
  double total = 0.0;
  for (const Example* ex : batch)
    total += model.loss(ex->features, ex->tokens, /*accumulate_grad=*/true);
  const double inv = 1.0 / static_cast<double>(batch.size());
  model.params().scale_grad(inv);
  model.params().clip_grad_norm(grad_clip);
  opt.step(model.params(), lr);
  return total * inv;
}

inline TrainStats train_transducer(TransducerModel& model,
                                   const std::vector<const Example*>& data,
                                   const TrainConfig& cfg, Rng& rng) {
  if (data.empty())
    throw std::invalid_argument("train_transducer: empty dataset");
  AdamOptimizer opt;
  TrainStats stats;
  std::vector<int> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    const double lr = cfg.lr * std::pow(cfg.lr_decay, epoch);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const Example*> batch;
      for (std::size_t i = start;
           i < order.size() && i < start + static_cast<std::size_t>(cfg.batch_size);
           ++i)
        batch.push_back(data[order[i]]);
      loss_sum += train_step(model, batch, opt, lr, cfg.grad_clip);
      ++batches;
    }
    const double mean = loss_sum / batches;
    if (!std::isfinite(mean) || mean > cfg.divergence_limit)
      throw std::runtime_error("train_transducer: diverged at epoch " +
                               std::to_string(epoch) +
                               " (loss=" + std::to_string(mean) + ")");
    stats.epoch_loss.push_back(mean);
  }
  return stats;
}

inline TrainStats train_transducer(TransducerModel& model, const Dataset& data,
                                   const TrainConfig& cfg, Rng& rng) {
  std::vector<const Example*> ptrs;
  ptrs.reserve(data.size());
  for (const auto& ex : data) ptrs.push_back(&ex);
  return train_transducer(model, ptrs, cfg, rng);
}

// Draws batches with a fixed language composition: round(percent_en/100 * B)
// examples from the EN pool, the rest from the ZH pool. Each pool is
// consumed without replacement in shuffled order and reshuffled on wrap.
class BatchSampler {
 public:
  BatchSampler(std::vector<const Example*> en_pool,
               std::vector<const Example*> zh_pool, int batch_size,
               int percent_en, Rng rng)
      : en_(std::move(en_pool)),
        zh_(std::move(zh_pool)),
        rng_(rng) {
    if (batch_size <= 0)
      throw std::invalid_argument("BatchSampler: batch_size must be positive");
    if (percent_en < 0 || percent_en > 100)
      throw std::invalid_argument("BatchSampler: percent_en out of range");
    en_per_batch_ = static_cast<int>(
        std::lround(percent_en / 100.0 * batch_size));
    zh_per_batch_ = batch_size - en_per_batch_;
    if (en_per_batch_ > 0 && en_.empty())
      throw std::invalid_argument("BatchSampler: EN pool required but empty");
    if (zh_per_batch_ > 0 && zh_.empty())
      throw std::invalid_argument("BatchSampler: ZH pool required but empty");
    rng_.shuffle(en_);
    rng_.shuffle(zh_);
  }

  int en_per_batch() const { return en_per_batch_; }
  int zh_per_batch() const { return zh_per_batch_; }

  std::vector<const Example*> next() {
    std::vector<const Example*> batch;
    batch.reserve(en_per_batch_ + zh_per_batch_);
    for (int i = 0; i < en_per_batch_; ++i) batch.push_back(draw(en_, en_pos_));
    for (int i = 0; i < zh_per_batch_; ++i) batch.push_back(draw(zh_, zh_pos_));
    return batch;
  }

 private:
  const Example* draw(std::vector<const Example*>& pool, std::size_t& pos) {
    if (pos >= pool.size()) {
      rng_.shuffle(pool);
      pos = 0;
    }
    return pool[pos++];
  }

  std::vector<const Example*> en_, zh_;
  int en_per_batch_ = 0, zh_per_batch_ = 0;
  std::size_t en_pos_ = 0, zh_pos_ = 0;
  Rng rng_;
};

// ---- Recurrent NNLM over non-blank vocabulary ids ----

class NnlmModel {
 public:
  NnlmModel(int hidden_dim, UnionVocab vocab)
      : hidden_dim_(hidden_dim), vocab_(std::move(vocab)) {
    if (hidden_dim_ <= 0 || vocab_.size() < 2)
      throw std::invalid_argument("NnlmModel: invalid dimensions");
    const int v = vocab_.size();
    embed_ = params_.add("nnlm.embed", v + 1, hidden_dim_);
    w_rec_ = params_.add("nnlm.w_rec", hidden_dim_, hidden_dim_);
    bias_ = params_.add("nnlm.bias", hidden_dim_, 1);
    w_out_ = params_.add("nnlm.w_out", v - 1, hidden_dim_);
    b_out_ = params_.add("nnlm.b_out", v - 1, 1);
  }

  void init(Rng& rng) { params_.init_uniform(rng); }

  int hidden_dim() const { return hidden_dim_; }
  const UnionVocab& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  int bos_row() const { return vocab_.size(); }

  Eigen::VectorXd start() const {
    return step_row(Eigen::VectorXd::Zero(hidden_dim_), bos_row());
  }

  Eigen::VectorXd step(const Eigen::VectorXd& state, int token) const {
    check_token(token);
    return step_row(state, token);
  }

  // Log-distribution over non-blank ids; entry k scores vocabulary id k+1.
  Eigen::VectorXd log_probs(const Eigen::VectorXd& state) const {
    return log_softmax_vec((value(w_out_) * state).eval() +
                           value(b_out_).col(0));
  }

  double token_log_prob(const Eigen::VectorXd& state, int token) const {
    check_token(token);
    return log_probs(state)[token - 1];
  }

  double sequence_log_prob(const std::vector<int>& y) const {
    double lp = 0.0;
    Eigen::VectorXd state = start();
    for (int tok : y) {
      lp += token_log_prob(state, tok);
      state = step(state, tok);
    }
    return lp;
  }

  // Negative log-likelihood of the sequence; gradients accumulate when
  // requested. Returns the summed NLL (not per-token).
  double loss(const std::vector<int>& y, bool accumulate_grad = false) {
    if (y.empty()) throw std::invalid_argument("NnlmModel::loss: empty sequence");
    for (int tok : y) check_token(tok);
    Tape tape(&params_);
    Tape::Id state = tape_step(
        tape, tape.input(Eigen::VectorXd::Zero(hidden_dim_)), bos_row());
    Tape::Id nll = tape.constant(0.0);
    for (int tok : y) {
      const Tape::Id lp = tape.log_softmax(
          tape.add(tape.matvec(w_out_, state), tape.param_vec(b_out_)));
      nll = tape.add(nll, tape.scale(tape.pick(lp, tok - 1), -1.0));
      state = tape_step(tape, state, tok);
    }
    if (accumulate_grad) tape.backward(nll);
    return tape.scalar(nll);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("NnlmModel::save: cannot write " + path);
    out << "cskit nnlm 1\n";
    out << "hidden " << hidden_dim_ << "\n";
    vocab_.write_entries(out);
    TransducerModel::write_params(out, params_);
  }

  static NnlmModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("NnlmModel::load: cannot read " + path);
    std::string line;
    std::getline(in, line);
    if (line != "cskit nnlm 1")
      throw std::runtime_error("NnlmModel::load: bad header in " + path);
    std::getline(in, line);
    if (line.rfind("hidden ", 0) != 0)
      throw std::runtime_error("NnlmModel::load: missing hidden dim");
    const int hidden = std::stoi(line.substr(7));
    UnionVocab vocab = UnionVocab::read_entries(in);
    NnlmModel model(hidden, std::move(vocab));
    TransducerModel::read_params(in, model.params_);
    return model;
  }

 private:
  const Eigen::MatrixXd& value(int id) const { return params_.at(id).value; }

  void check_token(int token) const {
    if (token <= 0 || token >= vocab_.size())
      throw std::invalid_argument("NnlmModel: token out of range: " +
                                  std::to_string(token));
  }

  Eigen::VectorXd step_row(const Eigen::VectorXd& state, int row) const {
    return (((value(embed_).row(row).transpose().eval() +
              (value(w_rec_) * state).eval())
                 .eval() +
             value(bias_).col(0))
                .array()
                .tanh())
        .matrix();
  }

  Tape::Id tape_step(Tape& tape, Tape::Id state, int row) {
    return tape.tanh(tape.add(
        tape.add(tape.embed_row(embed_, row), tape.matvec(w_rec_, state)),
        tape.param_vec(bias_)));
  }

  int hidden_dim_;
  UnionVocab vocab_;
  ParamStore params_;
  int embed_ = -1, w_rec_ = -1, bias_ = -1, w_out_ = -1, b_out_ = -1;
};

struct NnlmTrainStats {
  std::vector<double> epoch_loss;  // mean per-token NLL per epoch
};

inline NnlmTrainStats train_nnlm(NnlmModel& model,
                                 const std::vector<std::vector<int>>& corpus,
                                 const TrainConfig& cfg, Rng& rng) {
  std::vector<int> usable;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!corpus[i].empty()) usable.push_back(static_cast<int>(i));
  if (usable.empty())
    throw std::invalid_argument("train_nnlm: no non-empty sequences");
  AdamOptimizer opt;
  NnlmTrainStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(usable);
    const double lr = cfg.lr * std::pow(cfg.lr_decay, epoch);
    double nll_sum = 0.0;
    std::size_t token_sum = 0;
    for (std::size_t start = 0; start < usable.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      model.params().zero_grad();
      double batch_nll = 0.0;
      std::size_t batch_tokens = 0;
      for (std::size_t i = start;
           i < usable.size() && i < start + static_cast<std::size_t>(cfg.batch_size);
           ++i) {
        const auto& y = corpus[usable[i]];
        batch_nll += model.loss(y, /*accumulate_grad=*/true);
        batch_tokens += y.size();
      }
      model.params().scale_grad(1.0 / static_cast<double>(batch_tokens));
      model.params().clip_grad_norm(cfg.grad_clip);
      opt.step(model.params(), lr);
      nll_sum += batch_nll;
      token_sum += batch_tokens;
    }
    const double mean = nll_sum / static_cast<double>(token_sum);
    if (!std::isfinite(mean) || mean > cfg.divergence_limit)
      throw std::runtime_error("train_nnlm: diverged at epoch " +
                               std::to_string(epoch));
    stats.epoch_loss.push_back(mean);
  }
  return stats;
}

}  // namespace cskit

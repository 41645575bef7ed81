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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "cskit/model.hpp"

using namespace cskit;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cskit_model_" + name))
      .string();
}

UnionVocab tiny_vocab() {
  // Units a, b, c, d plus two ZH characters; blank + 6 => vocab size 7.
  const BpeModel bpe = train_bpe({tokenize_mixed("ab cd")}, 0);
  return UnionVocab::build(bpe, {"\xe4\xb8\x80", "\xe4\xba\x8c"});
}

TransducerModel random_model(JoinerVariant variant, std::uint64_t seed,
                             int feature_dim = 3, int hidden = 4) {
  ModelDims dims;
  dims.feature_dim = feature_dim;
  dims.frame_stack = 1;
  dims.hidden_dim = hidden;
  dims.joiner_hidden = hidden;
  TransducerModel model(dims, variant, tiny_vocab());
  Rng rng(seed);
  model.init(rng);
  return model;
}

FeatureSequence random_features(int t, int dim, std::uint64_t seed) {
  Rng rng(seed);
  FeatureSequence x(t, dim);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < dim; ++j) x(i, j) = rng.gaussian();
  return x;
}

// Reference loss: log-space forward DP over joint_log_probs, which encodes
// the acoustic/label paths independently of the tape-based loss().
double dp_loss(const TransducerModel& model, const FeatureSequence& x,
               const std::vector<int>& y) {
  const int big_t = static_cast<int>(x.rows());
  const int big_u = static_cast<int>(y.size());
  std::vector<std::vector<Eigen::VectorXd>> lp(big_t);
  for (int t = 0; t < big_t; ++t)
    for (int u = 0; u <= big_u; ++u)
      lp[t].push_back(model.joint_log_probs(
          x, std::vector<int>(y.begin(), y.begin() + u), t));
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> alpha(
      big_t, std::vector<double>(big_u + 1, kNegInf));
  alpha[0][0] = 0.0;
  for (int t = 0; t < big_t; ++t)
    for (int u = 0; u <= big_u; ++u) {
      if (t == 0 && u == 0) continue;
      double a = kNegInf;
      if (t > 0) a = alpha[t - 1][u] + lp[t - 1][u][model.blank_id()];
      if (u > 0)
        a = log_add_exp(a, alpha[t][u - 1] + lp[t][u - 1][y[u - 1]]);
      alpha[t][u] = a;
    }
  return -(alpha[big_t - 1][big_u] + lp[big_t - 1][big_u][model.blank_id()]);
}

Example make_example(const std::string& id, Lang lang, int t, int dim,
                     std::vector<int> tokens, std::uint64_t seed) {
  Example ex;
  ex.id = id;
  ex.lang = lang;
  ex.features = random_features(t, dim, seed);
  ex.tokens = std::move(tokens);
  return ex;
}

}  // namespace

TEST_CASE("stack_frames groups windows and zero-pads the tail") {
  FeatureSequence x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  const Eigen::MatrixXd out = stack_frames(x, 2);
  REQUIRE(out.rows() == 2);
  REQUIRE(out.cols() == 4);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 2.0);
  CHECK(out(0, 2) == 3.0);
  CHECK(out(0, 3) == 4.0);
  CHECK(out(1, 0) == 5.0);
  CHECK(out(1, 1) == 6.0);
  CHECK(out(1, 2) == 0.0);
  CHECK(out(1, 3) == 0.0);
  CHECK(stack_frames(x, 1) == x);
}

TEST_CASE("training constants follow the reference recipe") {
  CHECK(kPretrainLr == 1e-4);
  CHECK(kFinetuneLr == 2.5e-4);
  CHECK(kLrDecay == 0.96);
  CHECK(kGradClip == 5.0);
  const TrainConfig cfg;
  CHECK(cfg.lr == kPretrainLr);
  CHECK(cfg.lr_decay == kLrDecay);
  CHECK(cfg.grad_clip == kGradClip);
}

TEST_CASE("joiner variant names round-trip") {
  CHECK(joiner_from_name("standard") == JoinerVariant::kStandard);
  CHECK(joiner_from_name("simple") == JoinerVariant::kSimple);
  CHECK(joiner_name(JoinerVariant::kSimple) == std::string("simple"));
  CHECK_THROWS_AS(joiner_from_name("fancy"), std::invalid_argument);
}

TEST_CASE("ModelDims validation rejects bad dimensions") {
  ModelDims dims;
  dims.vocab_size = 5;
  CHECK_NOTHROW(dims.validate());
  dims.hidden_dim = 0;
  CHECK_THROWS_AS(dims.validate(), std::invalid_argument);
  dims.hidden_dim = 4;
  dims.vocab_size = 1;
  CHECK_THROWS_AS(dims.validate(), std::invalid_argument);
}

TEST_CASE("lattice loss matches an independent DP over joint posteriors") {
  for (JoinerVariant variant :
       {JoinerVariant::kStandard, JoinerVariant::kSimple}) {
    TransducerModel model = random_model(variant, 11);
    const FeatureSequence x = random_features(4, 3, 21);
    const std::vector<int> y = {1, 3, 2};
    CHECK_THAT(model.loss(x, y),
               Catch::Matchers::WithinAbs(dp_loss(model, x, y), 1e-9));
  }
}

TEST_CASE("lattice loss with empty target is the blank path") {
  TransducerModel model = random_model(JoinerVariant::kStandard, 5);
  const FeatureSequence x = random_features(5, 3, 6);
  double blank_sum = 0.0;
  for (int t = 0; t < 5; ++t)
    blank_sum += model.joint_log_probs(x, {}, t)[model.blank_id()];
  CHECK_THAT(model.loss(x, {}), Catch::Matchers::WithinAbs(-blank_sum, 1e-9));
}

TEST_CASE("loss rejects empty input and invalid tokens") {
  TransducerModel model = random_model(JoinerVariant::kSimple, 7);
  const FeatureSequence x = random_features(3, 3, 8);
  CHECK_THROWS_AS(model.loss(FeatureSequence(0, 3), {1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(model.loss(x, {0}), std::invalid_argument);   // blank
  CHECK_THROWS_AS(model.loss(x, {-1}), std::invalid_argument);
  CHECK_THROWS_AS(model.loss(x, {model.vocab().size()}),
                  std::invalid_argument);
}

TEST_CASE("loss gradients accumulate across calls") {
  TransducerModel model = random_model(JoinerVariant::kStandard, 9);
  const FeatureSequence x = random_features(3, 3, 10);
  const std::vector<int> y = {2, 1};
  model.params().zero_grad();
  model.loss(x, y, /*accumulate_grad=*/true);
  const Eigen::VectorXd once = model.params().flatten_grad();
  model.loss(x, y, /*accumulate_grad=*/true);
  const Eigen::VectorXd twice = model.params().flatten_grad();
  CHECK((twice - 2.0 * once).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("joint_log_probs validates the frame index") {
  TransducerModel model = random_model(JoinerVariant::kStandard, 13);
  const FeatureSequence x = random_features(2, 3, 14);
  CHECK_THROWS_AS(model.joint_log_probs(x, {}, 2), std::out_of_range);
  CHECK_THROWS_AS(model.joint_log_probs(x, {}, -1), std::out_of_range);
}

TEST_CASE("branch logits exist only for the simple joiner") {
  TransducerModel standard = random_model(JoinerVariant::kStandard, 15);
  TransducerModel simple = random_model(JoinerVariant::kSimple, 15);
  const Eigen::VectorXd h = Eigen::VectorXd::Ones(4);
  CHECK_THROWS_AS(standard.acoustic_branch_logits(h), std::logic_error);
  CHECK_THROWS_AS(standard.label_branch_logits(h), std::logic_error);
  // Simple joint logits decompose into the two branches.
  const Eigen::VectorXd g = simple.label_start();
  const Eigen::VectorXd joint = simple.joint_logits(h, g);
  const Eigen::VectorXd sum =
      simple.acoustic_branch_logits(h) + simple.label_branch_logits(g);
  CHECK((joint - sum).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ILM depends only on the label state") {
  TransducerModel model = random_model(JoinerVariant::kSimple, 17);
  const std::vector<int> y = {1, 2, 4};
  double lp = 0.0;
  Eigen::VectorXd g = model.label_start();
  for (int tok : y) {
    const Eigen::VectorXd ilm = model.ilm_log_probs(g);
    // Renormalized over non-blank labels: blank is -inf, rest sum to one.
    CHECK(std::isinf(ilm[model.blank_id()]));
    double total = -std::numeric_limits<double>::infinity();
    for (int k = 1; k < model.vocab().size(); ++k)
      total = log_add_exp(total, ilm[k]);
    CHECK_THAT(total, Catch::Matchers::WithinAbs(0.0, 1e-12));
    lp += ilm[tok];
    g = model.label_step(g, tok);
  }
  CHECK_THAT(model.ilm_sequence_log_prob(y),
             Catch::Matchers::WithinAbs(lp, 1e-12));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  for (JoinerVariant variant :
       {JoinerVariant::kStandard, JoinerVariant::kSimple}) {
    TransducerModel model = random_model(variant, 19);
    const std::string path =
        temp_path(std::string("ckpt_") + joiner_name(variant) + ".txt");
    model.save(path);
    const TransducerModel loaded = TransducerModel::load(path);
    std::remove(path.c_str());
    CHECK(loaded.variant() == model.variant());
    CHECK(loaded.vocab() == model.vocab());
    CHECK(loaded.dims().hidden_dim == model.dims().hidden_dim);
    REQUIRE(loaded.params().flatten() == model.params().flatten());
  }
}

TEST_CASE("loaded checkpoints reproduce losses exactly") {
  TransducerModel model = random_model(JoinerVariant::kStandard, 23);
  const std::string path = temp_path("ckpt_loss.txt");
  model.save(path);
  TransducerModel loaded = TransducerModel::load(path);
  std::remove(path.c_str());
  const FeatureSequence x = random_features(4, 3, 24);
  const std::vector<int> y = {3, 1};
  CHECK(loaded.loss(x, y) == model.loss(x, y));
}

TEST_CASE("frame stacking changes the encoder input width") {
  ModelDims dims;
  dims.feature_dim = 3;
  dims.frame_stack = 2;
  dims.hidden_dim = 4;
  dims.joiner_hidden = 4;
  TransducerModel model(dims, JoinerVariant::kStandard, tiny_vocab());
  Rng rng(31);
  model.init(rng);
  // 5 frames stack to 3 windows.
  const FeatureSequence x = random_features(5, 3, 32);
  CHECK(model.encode_acoustic(x).rows() == 3);
  CHECK_NOTHROW(model.loss(x, {1}));
}

TEST_CASE("train_step rejects empty batches and lowers loss over epochs") {
  TransducerModel model = random_model(JoinerVariant::kStandard, 33);
  AdamOptimizer opt;
  CHECK_THROWS_AS(train_step(model, {}, opt, 1e-3, 5.0),
                  std::invalid_argument);

  Dataset data;
  for (int i = 0; i < 6; ++i)
    data.push_back(make_example("u" + std::to_string(i), Lang::EN, 4, 3,
                                {1 + (i % 3), 2}, 100 + i));
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 3;
  cfg.lr = 5e-3;
  cfg.lr_decay = 1.0;
  Rng rng(34);
  const TrainStats stats = train_transducer(model, data, cfg, rng);
  REQUIRE(stats.epoch_loss.size() == 30);
  CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());
}

TEST_CASE("train_transducer rejects an empty dataset") {
  TransducerModel model = random_model(JoinerVariant::kSimple, 35);
  TrainConfig cfg;
  Rng rng(36);
  CHECK_THROWS_AS(train_transducer(model, Dataset{}, cfg, rng),
                  std::invalid_argument);
}

TEST_CASE("BatchSampler composes batches by language percentage") {
  Dataset en, zh;
  for (int i = 0; i < 5; ++i) {
    en.push_back(make_example("e" + std::to_string(i), Lang::EN, 2, 3, {1},
                              200 + i));
    zh.push_back(make_example("z" + std::to_string(i), Lang::ZH, 2, 3, {2},
                              300 + i));
  }
  std::vector<const Example*> en_ptr, zh_ptr;
  for (const auto& ex : en) en_ptr.push_back(&ex);
  for (const auto& ex : zh) zh_ptr.push_back(&ex);

  Rng rng(40);
  BatchSampler sampler(en_ptr, zh_ptr, /*batch_size=*/8, /*percent_en=*/25.0,
                       rng);
  CHECK(sampler.en_per_batch() == 2);
  CHECK(sampler.zh_per_batch() == 6);
  for (int step = 0; step < 4; ++step) {
    const auto batch = sampler.next();
    REQUIRE(batch.size() == 8);
    int en_count = 0;
    for (const Example* ex : batch) en_count += ex->lang == Lang::EN ? 1 : 0;
    CHECK(en_count == 2);
  }

  Rng rng2(41);
  BatchSampler all_en(en_ptr, zh_ptr, 4, 100.0, rng2);
  CHECK(all_en.en_per_batch() == 4);
  for (const Example* ex : all_en.next()) CHECK(ex->lang == Lang::EN);
}

TEST_CASE("BatchSampler validates pools and arguments") {
  Dataset en;
  en.push_back(make_example("e0", Lang::EN, 2, 3, {1}, 50));
  std::vector<const Example*> en_ptr{&en[0]};
  std::vector<const Example*> empty;
  Rng rng(42);
  CHECK_THROWS_AS(BatchSampler(en_ptr, empty, 4, 50.0, rng),
                  std::invalid_argument);  // ZH pool needed but empty
  CHECK_NOTHROW(BatchSampler(en_ptr, empty, 4, 100.0, rng));
  CHECK_THROWS_AS(BatchSampler(en_ptr, en_ptr, 0, 50.0, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(BatchSampler(en_ptr, en_ptr, 4, 101.0, rng),
                  std::invalid_argument);
}

TEST_CASE("NNLM log-probabilities normalize and compose") {
  NnlmModel lm(4, tiny_vocab());
  Rng rng(43);
  lm.init(rng);
  Eigen::VectorXd state = lm.start();
  const Eigen::VectorXd lp = lm.log_probs(state);
  REQUIRE(lp.size() == lm.vocab().size() - 1);
  double total = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < lp.size(); ++k) total = log_add_exp(total, lp[k]);
  CHECK_THAT(total, Catch::Matchers::WithinAbs(0.0, 1e-12));

  const std::vector<int> y = {2, 1, 4};
  double sum = 0.0;
  for (int tok : y) {
    sum += lm.token_log_prob(state, tok);
    state = lm.step(state, tok);
  }
  CHECK_THAT(lm.sequence_log_prob(y), Catch::Matchers::WithinAbs(sum, 1e-12));
  CHECK_THAT(lm.loss(y), Catch::Matchers::WithinAbs(-sum, 1e-9));
}

TEST_CASE("NNLM validates tokens and inputs") {
  NnlmModel lm(4, tiny_vocab());
  Rng rng(44);
  lm.init(rng);
  CHECK_THROWS_AS(lm.loss({}), std::invalid_argument);
  CHECK_THROWS_AS(lm.sequence_log_prob({0}), std::invalid_argument);
  CHECK_THROWS_AS(lm.sequence_log_prob({lm.vocab().size()}),
                  std::invalid_argument);
  CHECK_THROWS_AS(NnlmModel(0, tiny_vocab()), std::invalid_argument);
}

TEST_CASE("NNLM checkpoints round-trip bit-exactly") {
  NnlmModel lm(5, tiny_vocab());
  Rng rng(45);
  lm.init(rng);
  const std::string path = temp_path("nnlm.txt");
  lm.save(path);
  const NnlmModel loaded = NnlmModel::load(path);
  std::remove(path.c_str());
  CHECK(loaded.vocab() == lm.vocab());
  REQUIRE(loaded.params().flatten() == lm.params().flatten());
  CHECK(loaded.sequence_log_prob({1, 2}) == lm.sequence_log_prob({1, 2}));
}

TEST_CASE("train_nnlm lowers the per-token NLL") {
  NnlmModel lm(6, tiny_vocab());
  Rng rng(46);
  lm.init(rng);
  std::vector<std::vector<int>> corpus;
  for (int i = 0; i < 8; ++i) corpus.push_back({1 + (i % 2), 3, 2});
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 4;
  cfg.lr = 1e-2;
  cfg.lr_decay = 1.0;
  Rng order(47);
  const NnlmTrainStats stats = train_nnlm(lm, corpus, cfg, order);
  REQUIRE(stats.epoch_loss.size() == 40);
  CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());
  CHECK_THROWS_AS(train_nnlm(lm, {{}}, cfg, order), std::invalid_argument);
}

TEST_CASE("encode_dataset fills tokens from transcripts") {
  const UnionVocab vocab = tiny_vocab();
  const BpeModel bpe = train_bpe({tokenize_mixed("ab cd")}, 0);
  const TextCodec codec{&vocab, &bpe};
  Dataset data;
  data.push_back(make_example("u0", Lang::EN, 2, 3, {}, 60));
  data[0].transcript = "ab";
  encode_dataset(data, codec);
  REQUIRE(data[0].tokens.size() == 2);
  CHECK(vocab.entry(data[0].tokens[0]).surface == "a");
  CHECK(vocab.entry(data[0].tokens[1]).surface == "b");
}

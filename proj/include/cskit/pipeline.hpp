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
// Scenario assembly on top of the synthetic world, dataset serialization,
// and the seeded end-to-end experiment (teachers, SSL students, code-switch
// text generation, NNLM fusion, scoring). Every number in the report is a
// pure function of the configuration, so reruns are byte-identical.

#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cskit/align.hpp"
#include "cskit/common.hpp"
#include "cskit/corpus.hpp"
#include "cskit/csgen.hpp"
#include "cskit/decode.hpp"
#include "cskit/eval.hpp"
#include "cskit/model.hpp"
#include "cskit/ssl.hpp"
#include "cskit/testbed.hpp"

namespace cskit {

// ---- Dataset serialization (JSON lines) ----

inline nlohmann::ordered_json example_to_json(const Example& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["lang"] = lang_name(ex.lang);
  j["transcript"] = ex.transcript;
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < ex.features.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < ex.features.cols(); ++c)
      row.push_back(ex.features(r, c));
    rows.push_back(std::move(row));
  }
  j["features"] = std::move(rows);
  return j;
}

inline Example example_from_json(const nlohmann::json& j) {
  Example ex;
  ex.id = j.at("id").get<std::string>();
  ex.lang = lang_from_name(j.at("lang").get<std::string>());
  ex.transcript = j.at("transcript").get<std::string>();
  const auto& rows = j.at("features");
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d =
      n == 0 ? 0 : static_cast<Eigen::Index>(rows.front().size());
  ex.features.resize(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[r];
    if (static_cast<Eigen::Index>(row.size()) != d)
      throw std::runtime_error("example_from_json: ragged feature rows in " +
                               ex.id);
    for (Eigen::Index c = 0; c < d; ++c)
      ex.features(r, c) = row[c].get<double>();
  }
  return ex;
}

inline void save_dataset_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("save_dataset_jsonl: cannot write " + path);
  for (const auto& ex : data) out << example_to_json(ex).dump() << "\n";
}

inline Dataset load_dataset_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset_jsonl: cannot read " + path);
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      data.push_back(example_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("load_dataset_jsonl: line " +
                               std::to_string(lineno) + ": " + e.what());
    }
  }
  return data;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_lines: cannot read " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

inline void write_lines(const std::vector<std::string>& lines,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_lines: cannot write " + path);
  for (const auto& l : lines) out << l << "\n";
}

// ---- Scenario assembly ----

struct ScenarioConfig {
  WorldConfig world;  // world.seed is overridden from `seed`
  int supervised_per_lang = 100;
  int unlabeled_per_lang = 300;
  int test_mono_per_lang = 50;
  int test_cs = 200;
  int parallel_pairs = 400;
  int min_len = 2, max_len = 4;        // utterance lengths in tokens
  int cs_min_len = 3, cs_max_len = 5;  // code-switched test utterances
  double cs_phrase_fraction = 0.25;    // two-token EN runs; rest single-token
  std::uint64_t seed = 1;
};

struct Scenario {
  SynthWorld world;
  WorldVocab wv;
  Dataset supervised;  // EN block then ZH block
  Dataset unlabeled_en, unlabeled_zh;  // transcripts retained as hidden refs
  Dataset test_mono_en, test_mono_zh, test_cs;
  std::vector<ParallelPair> parallel;

  TextCodec codec() const { return wv.codec(); }
};

inline std::vector<const Example*> dataset_ptrs(const Dataset& data) {
  std::vector<const Example*> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(&ex);
  return out;
}

inline Dataset filter_lang(const Dataset& data, Lang lang) {
  Dataset out;
  for (const auto& ex : data)
    if (ex.lang == lang) out.push_back(ex);
  return out;
}

inline Scenario make_scenario(const ScenarioConfig& cfg) {
  WorldConfig wc = cfg.world;
  wc.seed = derive_seed(cfg.seed, "world");
  Scenario sc{SynthWorld(wc), {}, {}, {}, {}, {}, {}, {}, {}};
  sc.wv = make_world_vocab(sc.world);

  auto fill_mono = [&](Dataset& ds, Lang lang, const char* tag, int count,
                       Lang ex_tag) {
    Rng rng(derive_seed(cfg.seed, tag));
    for (int k = 0; k < count; ++k) {
      const Sentence s =
          sc.world.mono_sentence(lang, cfg.min_len, cfg.max_len, rng);
      ds.push_back(sc.world.example(
          s, ex_tag, std::string(tag) + "_" + std::to_string(k),
          derive_seed(cfg.seed, std::string(tag) + "_utt", k)));
    }
  };
  fill_mono(sc.supervised, Lang::EN, "sup_en", cfg.supervised_per_lang,
            Lang::EN);
  fill_mono(sc.supervised, Lang::ZH, "sup_zh", cfg.supervised_per_lang,
            Lang::ZH);
  fill_mono(sc.unlabeled_en, Lang::EN, "unl_en", cfg.unlabeled_per_lang,
            Lang::EN);
  fill_mono(sc.unlabeled_zh, Lang::ZH, "unl_zh", cfg.unlabeled_per_lang,
            Lang::ZH);
  fill_mono(sc.test_mono_en, Lang::EN, "test_en", cfg.test_mono_per_lang,
            Lang::EN);
  fill_mono(sc.test_mono_zh, Lang::ZH, "test_zh", cfg.test_mono_per_lang,
            Lang::ZH);

  {
    Rng rng(derive_seed(cfg.seed, "test_cs"));
    for (int k = 0; k < cfg.test_cs; ++k) {
      const bool phrase =
          cfg.cs_min_len > 2 && rng.uniform() < cfg.cs_phrase_fraction;
      const Sentence s = sc.world.cs_sentence(cfg.cs_min_len, cfg.cs_max_len,
                                              phrase ? 2 : 1, rng);
      sc.test_cs.push_back(sc.world.example(
          s, Lang::ZH, "test_cs_" + std::to_string(k),
          derive_seed(cfg.seed, "test_cs_utt", k)));
    }
  }
  {
    Rng rng(derive_seed(cfg.seed, "parallel"));
    for (int k = 0; k < cfg.parallel_pairs; ++k)
      sc.parallel.push_back(sc.world.parallel_pair(
          cfg.cs_min_len, cfg.cs_max_len, rng, "par" + std::to_string(k)));
  }

  const TextCodec codec = sc.codec();
  encode_dataset(sc.supervised, codec);
  encode_dataset(sc.unlabeled_en, codec);
  encode_dataset(sc.unlabeled_zh, codec);
  encode_dataset(sc.test_mono_en, codec);
  encode_dataset(sc.test_mono_zh, codec);
  encode_dataset(sc.test_cs, codec);
  return sc;
}

// ---- End-to-end experiment ----

struct ExperimentConfig {
  ScenarioConfig scenario;  // scenario.seed is overridden from `seed`
  int hidden_dim = 16;
  int joiner_hidden = 16;
  int frame_stack = 1;
  double train_lr = 3e-3;  // desk-scale working rate (reference values are
                           // kPretrainLr / kFinetuneLr)
  double lr_decay = 0.99;  // slower than kLrDecay to suit the longer schedule
  int teacher_epochs = 80;
  int baseline_epochs = 120;
  int pretrain_epochs = 48;
  int finetune_epochs = 48;
  int nnlm_epochs = 80;
  double nnlm_lr = 1e-2;
  int nnlm_cs_epochs = 32;    // CS fine-tuning on generated text
  double nnlm_cs_lr = 2.5e-3;
  int batch_size = 8;
  int ssl_even_percent_en = 50;
  int ssl_zh_percent_en = 25;  // biased toward the matrix language
  int align_iterations = 5;
  FusionConfig fusion;  // lambdas used for the NNLM fusion comparison
  int bootstrap_resamples = 1000;
  std::vector<int> recall_top_ns = {1, 5, 10};
  std::uint64_t seed = 1;
};

struct RecallPoint {
  int top_n = 0;
  int keywords = 0;
  double acoustic = 0.0;
  double label = 0.0;
  double nnlm_base = 0.0;
  double nnlm_cs = 0.0;
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  std::vector<double> align_ll;
  int cs_generated = 0;
  PseudoLabelStats pl_en, pl_zh;
  double baseline_cs = 0.0, ssl_even_cs = 0.0, ssl_zh_cs = 0.0;
  double baseline_mono_en = 0.0, baseline_mono_zh = 0.0;
  double ssl_even_mono_zh = 0.0, ssl_zh_mono_zh = 0.0;
  double fusion_base_cs = 0.0, fusion_cs_cs = 0.0;
  SignificanceReport fusion_significance;  // CS-trained LM (A) vs base LM (B)
  std::vector<RecallPoint> recall;
};

inline std::vector<std::string> decode_to_text(const TransducerModel& model,
                                               const Dataset& data,
                                               const FusionConfig& cfg,
                                               const TextCodec& codec,
                                               const NnlmModel* lm = nullptr) {
  std::vector<std::string> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    const auto hyps = beam_search(model, ex.features, cfg, lm);
    out.push_back(hyps.empty() ? std::string()
                               : codec.decode(hyps.front().tokens));
  }
  return out;
}

inline std::vector<std::string> dataset_refs(const Dataset& data) {
  std::vector<std::string> refs;
  refs.reserve(data.size());
  for (const auto& ex : data) refs.push_back(ex.transcript);
  return refs;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  ScenarioConfig sc_cfg = cfg.scenario;
  sc_cfg.seed = derive_seed(cfg.seed, "scenario");
  const Scenario sc = make_scenario(sc_cfg);
  const TextCodec codec = sc.codec();

  ModelDims dims;
  dims.feature_dim = sc.world.config().feature_dim;
  dims.frame_stack = cfg.frame_stack;
  dims.hidden_dim = cfg.hidden_dim;
  dims.joiner_hidden = cfg.joiner_hidden;
  dims.vocab_size = sc.wv.vocab.size();

  auto make_tc = [&](int epochs, double lr) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = cfg.batch_size;
    tc.lr = lr;
    tc.lr_decay = cfg.lr_decay;
    return tc;
  };
  auto fit = [&](const Dataset& data, int epochs, const char* tag) {
    TransducerModel model(dims, JoinerVariant::kSimple, sc.wv.vocab);
    Rng init_rng(derive_seed(cfg.seed, std::string(tag) + "_init"));
    model.init(init_rng);
    Rng train_rng(derive_seed(cfg.seed, std::string(tag) + "_train"));
    train_transducer(model, data, make_tc(epochs, cfg.train_lr), train_rng);
    return model;
  };

  const Dataset sup_en = filter_lang(sc.supervised, Lang::EN);
  const Dataset sup_zh = filter_lang(sc.supervised, Lang::ZH);
  const TransducerModel teacher_en = fit(sup_en, cfg.teacher_epochs, "teacher_en");
  const TransducerModel teacher_zh = fit(sup_zh, cfg.teacher_epochs, "teacher_zh");
  const TransducerModel baseline =
      fit(sc.supervised, cfg.baseline_epochs, "baseline");

  auto run_ssl = [&](int percent_en, const char* tag) {
    SslConfig ssl_cfg;
    ssl_cfg.percent_en = percent_en;
    ssl_cfg.pretrain = make_tc(cfg.pretrain_epochs, cfg.train_lr);
    ssl_cfg.finetune = make_tc(cfg.finetune_epochs, cfg.train_lr);
    return ssl_train(dims, JoinerVariant::kSimple, sc.wv.vocab, teacher_en,
                     teacher_zh, dataset_ptrs(sc.unlabeled_en),
                     dataset_ptrs(sc.unlabeled_zh), sc.supervised, codec,
                     ssl_cfg, derive_seed(cfg.seed, tag));
  };
  const SslResult ssl_even = run_ssl(cfg.ssl_even_percent_en, "ssl_even");
  const SslResult ssl_zh = run_ssl(cfg.ssl_zh_percent_en, "ssl_zh");

  ExperimentReport report;
  report.seed = cfg.seed;
  report.pl_en = ssl_even.pl_en;
  report.pl_zh = ssl_even.pl_zh;

  // Code-switched text generation feeding the CS language model.
  AlignerConfig align_cfg;
  const AlignTrainResult align = train_aligner(sc.parallel,
                                               cfg.align_iterations, align_cfg);
  report.align_ll = align.log_likelihood;
  std::vector<std::vector<int>> lm_base_corpus, lm_cs_corpus;
  for (const auto& ex : sc.supervised)
    lm_base_corpus.push_back(codec.encode_text(ex.transcript));
  GenConfig gen_cfg;
  gen_cfg.mode = GenConfig::Mode::TokenOrPhrase;
  for (const auto& pair : sc.parallel) {
    const ParallelPair aligned = align_pair(align.model, pair);
    for (const auto& cs : generate_cs(aligned, gen_cfg)) {
      lm_cs_corpus.push_back(codec.encode_text(cs.text()));
      ++report.cs_generated;
    }
  }

  // Base LM on supervised transcripts; the CS LM is the same model
  // fine-tuned further on the generated code-switched text.
  NnlmModel nnlm_base(cfg.hidden_dim, sc.wv.vocab);
  {
    Rng init_rng(derive_seed(cfg.seed, "nnlm_base_init"));
    nnlm_base.init(init_rng);
    Rng train_rng(derive_seed(cfg.seed, "nnlm_base_train"));
    train_nnlm(nnlm_base, lm_base_corpus, make_tc(cfg.nnlm_epochs, cfg.nnlm_lr),
               train_rng);
  }
  NnlmModel nnlm_cs = nnlm_base;
  {
    Rng train_rng(derive_seed(cfg.seed, "nnlm_cs_train"));
    train_nnlm(nnlm_cs, lm_cs_corpus,
               make_tc(cfg.nnlm_cs_epochs, cfg.nnlm_cs_lr), train_rng);
  }

  // Scoring.
  FusionConfig plain;
  plain.lambda_lm = 0.0;
  plain.lambda_ilm = 0.0;
  plain.beam_size = cfg.fusion.beam_size;
  plain.max_symbols_per_frame = cfg.fusion.max_symbols_per_frame;

  const auto refs_cs = dataset_refs(sc.test_cs);
  const auto refs_en = dataset_refs(sc.test_mono_en);
  const auto refs_zh = dataset_refs(sc.test_mono_zh);

  auto score = [&](const TransducerModel& model, const Dataset& data,
                   const std::vector<std::string>& refs,
                   const FusionConfig& fc, const NnlmModel* lm) {
    return corpus_mer(refs, decode_to_text(model, data, fc, codec, lm)).rate();
  };
  report.baseline_cs = score(baseline, sc.test_cs, refs_cs, plain, nullptr);
  report.ssl_even_cs =
      score(ssl_even.model, sc.test_cs, refs_cs, plain, nullptr);
  report.ssl_zh_cs = score(ssl_zh.model, sc.test_cs, refs_cs, plain, nullptr);
  report.baseline_mono_en =
      score(baseline, sc.test_mono_en, refs_en, plain, nullptr);
  report.baseline_mono_zh =
      score(baseline, sc.test_mono_zh, refs_zh, plain, nullptr);
  report.ssl_even_mono_zh =
      score(ssl_even.model, sc.test_mono_zh, refs_zh, plain, nullptr);
  report.ssl_zh_mono_zh =
      score(ssl_zh.model, sc.test_mono_zh, refs_zh, plain, nullptr);

  const auto fusion_base_hyps =
      decode_to_text(baseline, sc.test_cs, cfg.fusion, codec, &nnlm_base);
  const auto fusion_cs_hyps =
      decode_to_text(baseline, sc.test_cs, cfg.fusion, codec, &nnlm_cs);
  report.fusion_base_cs = corpus_mer(refs_cs, fusion_base_hyps).rate();
  report.fusion_cs_cs = corpus_mer(refs_cs, fusion_cs_hyps).rate();
  report.fusion_significance =
      significance(refs_cs, fusion_cs_hyps, fusion_base_hyps,
                   cfg.bootstrap_resamples, derive_seed(cfg.seed, "sig"));

  const auto cs_ptrs = dataset_ptrs(sc.test_cs);
  for (int n : cfg.recall_top_ns) {
    const RecallReport base =
        encoder_recall(baseline, cs_ptrs, Lang::EN, n, &nnlm_base);
    const RecallReport with_cs =
        encoder_recall(baseline, cs_ptrs, Lang::EN, n, &nnlm_cs);
    report.recall.push_back({n, base.keywords, base.acoustic_recall(),
                             base.label_recall(), base.nnlm_recall(),
                             with_cs.nnlm_recall()});
  }
  return report;
}

// Stable JSON rendering used by the CLI; rerunning with the same seed must
// produce identical bytes.
inline nlohmann::ordered_json experiment_report_json(
    const ExperimentReport& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["align_ll"] = r.align_ll;
  j["cs_generated"] = r.cs_generated;
  j["pseudo_labels"] = {{"en_kept", r.pl_en.kept},
                        {"en_dropped", r.pl_en.dropped_empty},
                        {"zh_kept", r.pl_zh.kept},
                        {"zh_dropped", r.pl_zh.dropped_empty}};
  j["mer"] = {{"baseline_cs", r.baseline_cs},
              {"ssl_even_cs", r.ssl_even_cs},
              {"ssl_zh_cs", r.ssl_zh_cs},
              {"baseline_mono_en", r.baseline_mono_en},
              {"baseline_mono_zh", r.baseline_mono_zh},
              {"ssl_even_mono_zh", r.ssl_even_mono_zh},
              {"ssl_zh_mono_zh", r.ssl_zh_mono_zh},
              {"fusion_base_cs", r.fusion_base_cs},
              {"fusion_cs_cs", r.fusion_cs_cs}};
  j["fusion_significance"] = {{"mer_a", r.fusion_significance.mer_a},
                              {"mer_b", r.fusion_significance.mer_b},
                              {"mean_diff", r.fusion_significance.mean_diff},
                              {"p_value", r.fusion_significance.p_value},
                              {"resamples", r.fusion_significance.resamples}};
  auto recall = nlohmann::ordered_json::array();
  for (const auto& p : r.recall)
    recall.push_back({{"top_n", p.top_n},
                      {"keywords", p.keywords},
                      {"acoustic", p.acoustic},
                      {"label", p.label},
                      {"nnlm_base", p.nnlm_base},
                      {"nnlm_cs", p.nnlm_cs}});
  j["recall"] = std::move(recall);
  return j;
}

}  // namespace cskit

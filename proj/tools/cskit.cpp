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
// Command-line entry point. Every pipeline stage is a subcommand; all
// randomness flows from --seed; logs go to stderr, data to files (or stdout
// where noted). Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cskit/align.hpp"
#include "cskit/common.hpp"
#include "cskit/corpus.hpp"
#include "cskit/csgen.hpp"
#include "cskit/decode.hpp"
#include "cskit/eval.hpp"
#include "cskit/model.hpp"
#include "cskit/pipeline.hpp"
#include "cskit/ssl.hpp"
#include "cskit/testbed.hpp"

namespace {

using cskit::Dataset;
using cskit::Example;
using cskit::Lang;
using cskit::Rng;
using cskit::TextCodec;

// The resolved-configuration log every subcommand emits before running.
void log_config(const CLI::App* sub) {
  std::cerr << "[" << sub->get_name() << "] resolved config:\n";
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i)
        value += (i ? " " : "") + results[i];
      if (results.empty()) value = "true";
    } else {
      value = opt->get_default_str();
      if (value.empty()) value = "(unset)";
    }
    std::cerr << "  " << opt->get_name() << " = " << value << "\n";
  }
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::vector<std::vector<int>> encode_lines(const std::vector<std::string>& lines,
                                           const TextCodec& codec) {
  std::vector<std::vector<int>> out;
  out.reserve(lines.size());
  for (const auto& line : lines) out.push_back(codec.encode_text(line));
  return out;
}

cskit::TrainConfig make_train_config(int epochs, int batch, double lr) {
  cskit::TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch;
  tc.lr = lr;
  return tc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cskit: code-switching speech recognition toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Declarative config file (INI format)");
  app.allow_config_extras(false);

  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--seed", seed, "Master random seed")->capture_default_str();
  app.add_option("--threads", threads, "Worker thread cap")
      ->capture_default_str();

  // ---- tokenize ----
  auto* c_tok = app.add_subcommand(
      "tokenize", "Segment raw text into Latin words and CJK characters");
  c_tok->fallthrough();
  std::string tok_in, tok_out, tok_tags;
  c_tok->add_option("--in", tok_in, "Input text, one sentence per line")
      ->required();
  c_tok->add_option("--out", tok_out, "Tokenized output")->required();
  c_tok->add_option("--tags", tok_tags, "Optional per-token language tag file");

  // ---- bpe ----
  auto* c_bpe = app.add_subcommand(
      "bpe", "Train BPE merges or encode text with a trained model");
  c_bpe->fallthrough();
  std::string bpe_in, bpe_zh_in, bpe_model_out, bpe_vocab_out, bpe_model,
      bpe_out;
  int bpe_merges = 100;
  c_bpe->add_option("--in", bpe_in, "Input text")->required();
  c_bpe->add_option("--merges", bpe_merges, "Merge count (training)")
      ->capture_default_str();
  c_bpe->add_option("--model-out", bpe_model_out, "Write trained BPE here");
  c_bpe->add_option("--zh-in", bpe_zh_in,
                    "ZH text whose characters join the union vocabulary");
  c_bpe->add_option("--vocab-out", bpe_vocab_out,
                    "Write the union vocabulary here (needs --zh-in)");
  c_bpe->add_option("--model", bpe_model, "Trained BPE model (encoding)");
  c_bpe->add_option("--out", bpe_out, "Encoded output (encoding)");

  // ---- align-train ----
  auto* c_alt = app.add_subcommand("align-train",
                                   "EM-train the word alignment model");
  c_alt->fallthrough();
  std::string alt_parallel, alt_model_out;
  int alt_iterations = 5;
  double alt_tension = 4.0, alt_null = 0.08;
  c_alt->add_option("--parallel", alt_parallel, "src ||| tgt corpus")
      ->required();
  c_alt->add_option("--iterations", alt_iterations, "EM iterations")
      ->capture_default_str();
  c_alt->add_option("--tension", alt_tension, "Diagonal prior tension")
      ->capture_default_str();
  c_alt->add_option("--null-prob", alt_null, "Null alignment probability")
      ->capture_default_str();
  c_alt->add_option("--model-out", alt_model_out, "Write the t-table here")
      ->required();

  // ---- align ----
  auto* c_aln = app.add_subcommand("align",
                                   "Viterbi-align a parallel corpus");
  c_aln->fallthrough();
  std::string aln_parallel, aln_model, aln_out;
  c_aln->add_option("--parallel", aln_parallel, "src ||| tgt corpus")
      ->required();
  c_aln->add_option("--model", aln_model, "Trained t-table")->required();
  c_aln->add_option("--out", aln_out, "Alignment output (i-j per pair)")
      ->required();

  // ---- gen-cs ----
  auto* c_gen = app.add_subcommand(
      "gen-cs", "Generate code-switched text under the equivalence constraint");
  c_gen->fallthrough();
  std::string gen_mode = "token", gen_parallel, gen_align, gen_src_pos,
              gen_tgt_pos, gen_out;
  int gen_max_per_pair = 0;
  c_gen->add_option("--mode", gen_mode, "token | phrase")
      ->check(CLI::IsMember({"token", "phrase"}))
      ->capture_default_str();
  c_gen->add_option("--parallel", gen_parallel, "src ||| tgt corpus")
      ->required();
  c_gen->add_option("--align", gen_align, "Alignment file (i-j per pair)")
      ->required();
  c_gen->add_option("--src-pos", gen_src_pos, "Source POS tag file")
      ->required();
  c_gen->add_option("--tgt-pos", gen_tgt_pos, "Target POS tag file")
      ->required();
  c_gen->add_option("--max-per-pair", gen_max_per_pair,
                    "Per-pair output budget (0 = unlimited)")
      ->capture_default_str();
  c_gen->add_option("--out", gen_out, "Generated sentences, one per line")
      ->required();
  std::string gen_jsonl;
  c_gen->add_option("--jsonl", gen_jsonl,
                    "Optional JSON-lines output with substitution metadata");

  // ---- synth-world ----
  auto* c_syn = app.add_subcommand("synth-world",
                                   "Emit a complete synthetic scenario");
  c_syn->fallthrough();
  std::string syn_dir;
  cskit::ScenarioConfig syn_cfg;
  c_syn->add_option("--out-dir", syn_dir, "Output directory")->required();
  c_syn->add_option("--vocab-size", syn_cfg.world.vocab_size,
                    "Vocabulary size per language")
      ->capture_default_str();
  c_syn->add_option("--noise", syn_cfg.world.noise_sigma,
                    "Acoustic noise sigma")
      ->capture_default_str();
  c_syn->add_option("--supervised", syn_cfg.supervised_per_lang,
                    "Supervised utterances per language")
      ->capture_default_str();
  c_syn->add_option("--unlabeled", syn_cfg.unlabeled_per_lang,
                    "Unlabeled utterances per language")
      ->capture_default_str();
  c_syn->add_option("--test-mono", syn_cfg.test_mono_per_lang,
                    "Monolingual test utterances per language")
      ->capture_default_str();
  c_syn->add_option("--test-cs", syn_cfg.test_cs,
                    "Code-switched test utterances")
      ->capture_default_str();
  c_syn->add_option("--parallel-pairs", syn_cfg.parallel_pairs,
                    "Parallel sentence pairs")
      ->capture_default_str();

  // ---- train ----
  auto* c_trn = app.add_subcommand("train", "Supervised transducer training");
  c_trn->fallthrough();
  std::string trn_data, trn_vocab, trn_bpe, trn_variant = "simple",
              trn_model_out;
  int trn_epochs = 10, trn_batch = 8, trn_hidden = 16, trn_joiner = 16,
      trn_stack = 1;
  double trn_lr = cskit::kPretrainLr;
  c_trn->add_option("--data", trn_data, "Training dataset (JSON lines)")
      ->required();
  c_trn->add_option("--vocab", trn_vocab, "Union vocabulary file")->required();
  c_trn->add_option("--bpe", trn_bpe, "BPE model file")->required();
  c_trn->add_option("--variant", trn_variant, "standard | simple")
      ->check(CLI::IsMember({"standard", "simple"}))
      ->capture_default_str();
  c_trn->add_option("--epochs", trn_epochs)->capture_default_str();
  c_trn->add_option("--batch-size", trn_batch)->capture_default_str();
  c_trn->add_option("--lr", trn_lr)->capture_default_str();
  c_trn->add_option("--hidden", trn_hidden)->capture_default_str();
  c_trn->add_option("--joiner-hidden", trn_joiner)->capture_default_str();
  c_trn->add_option("--frame-stack", trn_stack)->capture_default_str();
  c_trn->add_option("--model-out", trn_model_out, "Checkpoint path")
      ->required();

  // ---- ssl ----
  auto* c_ssl = app.add_subcommand(
      "ssl", "Two-stage semi-supervised training from monolingual teachers");
  c_ssl->fallthrough();
  std::string ssl_teacher_en, ssl_teacher_zh, ssl_unl_en, ssl_unl_zh,
      ssl_supervised, ssl_vocab, ssl_bpe, ssl_variant = "simple",
      ssl_model_out;
  int ssl_percent_en = 50, ssl_pre_epochs = 10, ssl_ft_epochs = 10,
      ssl_batch = 8;
  double ssl_lr = cskit::kPretrainLr, ssl_lr_ft = cskit::kFinetuneLr;
  int ssl_hidden = 16, ssl_joiner = 16, ssl_stack = 1;
  c_ssl->add_option("--teacher-en", ssl_teacher_en, "EN teacher checkpoint")
      ->required();
  c_ssl->add_option("--teacher-zh", ssl_teacher_zh, "ZH teacher checkpoint")
      ->required();
  c_ssl->add_option("--unlabeled-en", ssl_unl_en, "EN unlabeled dataset")
      ->required();
  c_ssl->add_option("--unlabeled-zh", ssl_unl_zh, "ZH unlabeled dataset")
      ->required();
  c_ssl->add_option("--supervised", ssl_supervised, "Supervised dataset")
      ->required();
  c_ssl->add_option("--vocab", ssl_vocab, "Union vocabulary file")->required();
  c_ssl->add_option("--bpe", ssl_bpe, "BPE model file")->required();
  c_ssl->add_option("--variant", ssl_variant, "standard | simple")
      ->check(CLI::IsMember({"standard", "simple"}))
      ->capture_default_str();
  c_ssl->add_option("--percent-en", ssl_percent_en,
                    "Stage-1 per-batch EN percentage")
      ->capture_default_str();
  c_ssl->add_option("--pretrain-epochs", ssl_pre_epochs)->capture_default_str();
  c_ssl->add_option("--finetune-epochs", ssl_ft_epochs)->capture_default_str();
  c_ssl->add_option("--batch-size", ssl_batch)->capture_default_str();
  c_ssl->add_option("--lr", ssl_lr)->capture_default_str();
  c_ssl->add_option("--lr-finetune", ssl_lr_ft)->capture_default_str();
  c_ssl->add_option("--hidden", ssl_hidden)->capture_default_str();
  c_ssl->add_option("--joiner-hidden", ssl_joiner)->capture_default_str();
  c_ssl->add_option("--frame-stack", ssl_stack)->capture_default_str();
  c_ssl->add_option("--model-out", ssl_model_out, "Checkpoint path")
      ->required();

  // ---- finetune-lm ----
  auto* c_lm = app.add_subcommand(
      "finetune-lm", "Train a fresh NNLM or fine-tune an existing one");
  c_lm->fallthrough();
  std::string lm_in, lm_text, lm_vocab, lm_bpe, lm_out;
  int lm_epochs = 10, lm_batch = 8, lm_hidden = 16;
  double lm_lr = cskit::kFinetuneLr;
  c_lm->add_option("--lm", lm_in, "Existing NNLM to fine-tune (else fresh)");
  c_lm->add_option("--text", lm_text, "Training text, one sentence per line")
      ->required();
  c_lm->add_option("--vocab", lm_vocab, "Union vocabulary (fresh model)");
  c_lm->add_option("--bpe", lm_bpe, "BPE model file")->required();
  c_lm->add_option("--epochs", lm_epochs)->capture_default_str();
  c_lm->add_option("--batch-size", lm_batch)->capture_default_str();
  c_lm->add_option("--lr", lm_lr)->capture_default_str();
  c_lm->add_option("--hidden", lm_hidden)->capture_default_str();
  c_lm->add_option("--model-out", lm_out, "Checkpoint path")->required();

  // ---- decode ----
  auto* c_dec = app.add_subcommand("decode",
                                   "Beam-search decoding with shallow fusion");
  c_dec->fallthrough();
  std::string dec_data, dec_model, dec_lm, dec_out;
  cskit::FusionConfig dec_fusion;
  dec_fusion.lambda_lm = 0.0;
  dec_fusion.lambda_ilm = 0.0;
  c_dec->add_option("--data", dec_data, "Dataset to decode (JSON lines)")
      ->required();
  c_dec->add_option("--model", dec_model, "Transducer checkpoint")->required();
  c_dec->add_option("--lm", dec_lm, "NNLM checkpoint for fusion");
  c_dec->add_option("--lambda-lm", dec_fusion.lambda_lm, "LM fusion weight")
      ->capture_default_str();
  c_dec->add_option("--lambda-ilm", dec_fusion.lambda_ilm,
                    "Internal LM subtraction weight")
      ->capture_default_str();
  c_dec->add_option("--beam", dec_fusion.beam_size)->capture_default_str();
  c_dec->add_option("--max-symbols", dec_fusion.max_symbols_per_frame,
                    "Per-frame emission cap")
      ->capture_default_str();
  c_dec->add_option("--out", dec_out, "Hypothesis text output")->required();
  std::string dec_nbest;
  c_dec->add_option("--nbest", dec_nbest,
                    "Optional JSON-lines n-best output with score parts");

  // ---- score-mer ----
  auto* c_mer = app.add_subcommand("score-mer", "Mixed error rate scoring");
  c_mer->fallthrough();
  std::string mer_ref, mer_hyp, mer_json;
  c_mer->add_option("--ref", mer_ref, "Reference text")->required();
  c_mer->add_option("--hyp", mer_hyp, "Hypothesis text")->required();
  c_mer->add_option("--json", mer_json, "Optional JSON report path");

  // ---- recall ----
  auto* c_rec = app.add_subcommand(
      "recall", "Per-encoder minor-language keyword recall (simple joiner)");
  c_rec->fallthrough();
  std::string rec_data, rec_model, rec_lm, rec_bpe, rec_minor = "en", rec_json;
  std::vector<int> rec_top_ns = {1, 5, 10};
  c_rec->add_option("--data", rec_data, "Dataset with references")->required();
  c_rec->add_option("--model", rec_model, "Transducer checkpoint")->required();
  c_rec->add_option("--lm", rec_lm, "Optional NNLM checkpoint");
  c_rec->add_option("--bpe", rec_bpe, "BPE model file")->required();
  c_rec->add_option("--minor", rec_minor, "Minor language: en | zh")
      ->check(CLI::IsMember({"en", "zh"}))
      ->capture_default_str();
  c_rec->add_option("--top-n", rec_top_ns, "Top-N values")
      ->delimiter(',')
      ->capture_default_str();
  c_rec->add_option("--json", rec_json, "Optional JSON report path");
  std::string rec_csv;
  c_rec->add_option("--csv", rec_csv,
                    "Optional CSV (source,top_n,recall) for plotting");

  // ---- significance ----
  auto* c_sig = app.add_subcommand("significance",
                                   "Paired bootstrap on corpus MER");
  c_sig->fallthrough();
  std::string sig_ref, sig_a, sig_b;
  int sig_resamples = 1000;
  c_sig->add_option("--ref", sig_ref, "Reference text")->required();
  c_sig->add_option("--hyp-a", sig_a, "System A hypotheses")->required();
  c_sig->add_option("--hyp-b", sig_b, "System B hypotheses")->required();
  c_sig->add_option("--resamples", sig_resamples)->capture_default_str();

  // ---- repro ----
  auto* c_rep = app.add_subcommand(
      "repro", "Run the full seeded pipeline and emit one JSON report");
  c_rep->fallthrough();
  std::string rep_out;
  bool rep_fast = false;
  c_rep->add_option("--out", rep_out, "Report path (default stdout)");
  c_rep->add_flag("--fast", rep_fast, "Reduced-size run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_tok) {
      log_config(c_tok);
      std::vector<cskit::Sentence> corpus = cskit::read_corpus(tok_in);
      std::string text, tags;
      for (const auto& s : corpus) {
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
          if (i) {
            text += ' ';
            tags += ' ';
          }
          text += s.tokens[i].surface;
          tags += cskit::lang_name(s.tokens[i].lang);
        }
        text += '\n';
        tags += '\n';
      }
      write_text(tok_out, text);
      if (!tok_tags.empty()) write_text(tok_tags, tags);
    } else if (*c_bpe) {
      log_config(c_bpe);
      if (!bpe_model_out.empty()) {
        const auto corpus = cskit::read_corpus(bpe_in);
        const cskit::BpeModel model = cskit::train_bpe(corpus, bpe_merges);
        cskit::save_bpe(model, bpe_model_out);
        if (!bpe_vocab_out.empty()) {
          if (bpe_zh_in.empty())
            throw std::runtime_error("--vocab-out requires --zh-in");
          std::vector<std::string> zh_chars;
          for (const auto& s : cskit::read_corpus(bpe_zh_in))
            for (const auto& tok : s.tokens)
              if (tok.lang == Lang::ZH) zh_chars.push_back(tok.surface);
          cskit::UnionVocab::build(model, zh_chars).save(bpe_vocab_out);
        }
      } else if (!bpe_model.empty()) {
        if (bpe_out.empty()) throw std::runtime_error("--out is required");
        const cskit::BpeModel model = cskit::load_bpe(bpe_model);
        std::string text;
        for (const auto& s : cskit::read_corpus(bpe_in)) {
          bool first = true;
          for (const auto& tok : s.tokens) {
            if (tok.lang == Lang::ZH) {
              if (!first) text += ' ';
              text += tok.surface;
              first = false;
            } else {
              for (const auto& unit : model.encode_word(tok.surface)) {
                if (!first) text += ' ';
                text += unit;
                first = false;
              }
            }
          }
          text += '\n';
        }
        write_text(bpe_out, text);
      } else {
        throw std::runtime_error("bpe: pass --model-out (train) or --model (encode)");
      }
    } else if (*c_alt) {
      log_config(c_alt);
      cskit::AlignerConfig cfg;
      cfg.diagonal_tension = alt_tension;
      cfg.null_prob = alt_null;
      cfg.threads = threads;
      const auto pairs = cskit::read_parallel_corpus(alt_parallel);
      const auto result = cskit::train_aligner(pairs, alt_iterations, cfg);
      for (std::size_t i = 0; i < result.log_likelihood.size(); ++i)
        std::cerr << "iter " << i << " ll " << result.log_likelihood[i] << "\n";
      if (result.diagnostics.skipped_empty_pairs)
        std::cerr << "skipped empty pairs: "
                  << result.diagnostics.skipped_empty_pairs << "\n";
      result.model.save(alt_model_out);
    } else if (*c_aln) {
      log_config(c_aln);
      const auto model = cskit::AlignmentModel::load(aln_model);
      auto pairs = cskit::read_parallel_corpus(aln_parallel);
      cskit::AlignDiagnostics diag;
      for (auto& p : pairs) p = cskit::align_pair(model, p, &diag);
      if (diag.unseen_target_words)
        std::cerr << "unseen target words: " << diag.unseen_target_words << "\n";
      cskit::write_alignments(pairs, aln_out);
    } else if (*c_gen) {
      log_config(c_gen);
      auto pairs = cskit::read_parallel_corpus(gen_parallel);
      cskit::attach_pos(pairs, cskit::read_pos_file(gen_src_pos),
                        cskit::read_pos_file(gen_tgt_pos));
      cskit::attach_alignments(pairs, cskit::read_alignments(gen_align));
      cskit::GenConfig cfg;
      cfg.mode = gen_mode == "phrase" ? cskit::GenConfig::Mode::TokenOrPhrase
                                      : cskit::GenConfig::Mode::TokenOnly;
      if (gen_max_per_pair > 0) cfg.max_outputs_per_pair = gen_max_per_pair;
      std::string text, jsonl;
      long long count = 0;
      for (const auto& p : pairs)
        for (const auto& cs : cskit::generate_cs(p, cfg)) {
          text += cs.text();
          text += '\n';
          if (!gen_jsonl.empty()) {
            nlohmann::ordered_json j;
            j["text"] = cs.text();
            j["origin"] = cs.origin;
            j["sub_span"] = {cs.sub_start, cs.sub_len};
            j["sub_kind"] = cskit::sub_kind_name(cs.kind);
            j["switch_points"] = cskit::switch_points(cs.tokens);
            jsonl += j.dump();
            jsonl += '\n';
          }
          ++count;
        }
      write_text(gen_out, text);
      if (!gen_jsonl.empty()) write_text(gen_jsonl, jsonl);
      std::cerr << "generated " << count << " sentences\n";
    } else if (*c_syn) {
      log_config(c_syn);
      syn_cfg.seed = seed;
      const cskit::Scenario sc = cskit::make_scenario(syn_cfg);
      namespace fs = std::filesystem;
      fs::create_directories(syn_dir);
      auto path = [&](const char* name) {
        return (fs::path(syn_dir) / name).string();
      };
      cskit::save_bpe(sc.wv.bpe, path("bpe.model"));
      sc.wv.vocab.save(path("vocab.txt"));
      cskit::save_dataset_jsonl(sc.supervised, path("supervised.jsonl"));
      cskit::save_dataset_jsonl(cskit::filter_lang(sc.supervised, Lang::EN),
                                path("supervised_en.jsonl"));
      cskit::save_dataset_jsonl(cskit::filter_lang(sc.supervised, Lang::ZH),
                                path("supervised_zh.jsonl"));
      cskit::save_dataset_jsonl(sc.unlabeled_en, path("unlabeled_en.jsonl"));
      cskit::save_dataset_jsonl(sc.unlabeled_zh, path("unlabeled_zh.jsonl"));
      cskit::save_dataset_jsonl(sc.test_mono_en, path("test_mono_en.jsonl"));
      cskit::save_dataset_jsonl(sc.test_mono_zh, path("test_mono_zh.jsonl"));
      cskit::save_dataset_jsonl(sc.test_cs, path("test_cs.jsonl"));
      cskit::write_parallel_corpus(sc.parallel, path("parallel.txt"));
      std::vector<std::vector<std::string>> src_pos, tgt_pos;
      for (const auto& p : sc.parallel) {
        src_pos.push_back(p.src_pos);
        tgt_pos.push_back(p.tgt_pos);
      }
      cskit::write_pos_file(src_pos, path("src_pos.txt"));
      cskit::write_pos_file(tgt_pos, path("tgt_pos.txt"));
      cskit::write_alignments(sc.parallel, path("gold_align.txt"));
      std::vector<std::string> sup_text;
      for (const auto& ex : sc.supervised) sup_text.push_back(ex.transcript);
      cskit::write_lines(sup_text, path("supervised_text.txt"));
    } else if (*c_trn) {
      log_config(c_trn);
      const cskit::UnionVocab vocab = cskit::UnionVocab::load(trn_vocab);
      const cskit::BpeModel bpe = cskit::load_bpe(trn_bpe);
      const TextCodec codec{&vocab, &bpe};
      Dataset data = cskit::load_dataset_jsonl(trn_data);
      cskit::encode_dataset(data, codec);
      cskit::ModelDims dims;
      dims.feature_dim =
          data.empty() ? 1 : static_cast<int>(data.front().features.cols());
      dims.frame_stack = trn_stack;
      dims.hidden_dim = trn_hidden;
      dims.joiner_hidden = trn_joiner;
      dims.vocab_size = vocab.size();
      cskit::TransducerModel model(dims,
                                   cskit::joiner_from_name(trn_variant), vocab);
      Rng init_rng(cskit::derive_seed(seed, "train_init"));
      model.init(init_rng);
      Rng train_rng(cskit::derive_seed(seed, "train_order"));
      const auto stats = cskit::train_transducer(
          model, data, make_train_config(trn_epochs, trn_batch, trn_lr),
          train_rng);
      for (std::size_t e = 0; e < stats.epoch_loss.size(); ++e)
        std::cerr << "epoch " << e << " loss " << stats.epoch_loss[e] << "\n";
      model.save(trn_model_out);
    } else if (*c_ssl) {
      log_config(c_ssl);
      const cskit::UnionVocab vocab = cskit::UnionVocab::load(ssl_vocab);
      const cskit::BpeModel bpe = cskit::load_bpe(ssl_bpe);
      const TextCodec codec{&vocab, &bpe};
      const auto teacher_en = cskit::TransducerModel::load(ssl_teacher_en);
      const auto teacher_zh = cskit::TransducerModel::load(ssl_teacher_zh);
      const Dataset unl_en = cskit::load_dataset_jsonl(ssl_unl_en);
      const Dataset unl_zh = cskit::load_dataset_jsonl(ssl_unl_zh);
      Dataset supervised = cskit::load_dataset_jsonl(ssl_supervised);
      cskit::encode_dataset(supervised, codec);
      cskit::ModelDims dims;
      dims.feature_dim = supervised.empty()
                             ? 1
                             : static_cast<int>(supervised.front().features.cols());
      dims.frame_stack = ssl_stack;
      dims.hidden_dim = ssl_hidden;
      dims.joiner_hidden = ssl_joiner;
      dims.vocab_size = vocab.size();
      cskit::SslConfig cfg;
      cfg.percent_en = ssl_percent_en;
      cfg.pretrain = make_train_config(ssl_pre_epochs, ssl_batch, ssl_lr);
      cfg.finetune = make_train_config(ssl_ft_epochs, ssl_batch, ssl_lr_ft);
      const auto result = cskit::ssl_train(
          dims, cskit::joiner_from_name(ssl_variant), vocab, teacher_en,
          teacher_zh, cskit::dataset_ptrs(unl_en), cskit::dataset_ptrs(unl_zh),
          supervised, codec, cfg, cskit::derive_seed(seed, "ssl"));
      std::cerr << "pseudo-labels en kept " << result.pl_en.kept << " dropped "
                << result.pl_en.dropped_empty << ", zh kept "
                << result.pl_zh.kept << " dropped "
                << result.pl_zh.dropped_empty << "\n";
      result.model.save(ssl_model_out);
    } else if (*c_lm) {
      log_config(c_lm);
      const cskit::BpeModel bpe = cskit::load_bpe(lm_bpe);
      cskit::NnlmModel model = [&] {
        if (!lm_in.empty()) return cskit::NnlmModel::load(lm_in);
        if (lm_vocab.empty())
          throw std::runtime_error("finetune-lm: --vocab required for a fresh model");
        cskit::NnlmModel fresh(lm_hidden, cskit::UnionVocab::load(lm_vocab));
        Rng init_rng(cskit::derive_seed(seed, "lm_init"));
        fresh.init(init_rng);
        return fresh;
      }();
      const TextCodec codec{&model.vocab(), &bpe};
      const auto corpus = encode_lines(cskit::read_lines(lm_text), codec);
      Rng train_rng(cskit::derive_seed(seed, "lm_train"));
      const auto stats = cskit::train_nnlm(
          model, corpus, make_train_config(lm_epochs, lm_batch, lm_lr),
          train_rng);
      for (std::size_t e = 0; e < stats.epoch_loss.size(); ++e)
        std::cerr << "epoch " << e << " nll/token " << stats.epoch_loss[e]
                  << "\n";
      model.save(lm_out);
    } else if (*c_dec) {
      log_config(c_dec);
      const auto model = cskit::TransducerModel::load(dec_model);
      const TextCodec codec{&model.vocab(), nullptr};
      const Dataset data = cskit::load_dataset_jsonl(dec_data);
      std::unique_ptr<cskit::NnlmModel> lm;
      if (!dec_lm.empty())
        lm = std::make_unique<cskit::NnlmModel>(cskit::NnlmModel::load(dec_lm));
      const auto hyps =
          cskit::decode_to_text(model, data, dec_fusion, codec, lm.get());
      cskit::write_lines(hyps, dec_out);
      if (!dec_nbest.empty()) {
        std::string jsonl;
        for (const auto& ex : data) {
          const auto nbest =
              cskit::beam_search(model, ex.features, dec_fusion, lm.get());
          for (std::size_t r = 0; r < nbest.size(); ++r) {
            nlohmann::ordered_json j;
            j["utt_id"] = ex.id;
            j["rank"] = r;
            j["text"] = codec.decode(nbest[r].tokens);
            j["log_t"] = nbest[r].log_t;
            j["log_lm"] = nbest[r].log_lm;
            j["log_ilm"] = nbest[r].log_ilm;
            j["combined"] = nbest[r].combined;
            jsonl += j.dump();
            jsonl += '\n';
          }
        }
        write_text(dec_nbest, jsonl);
      }
    } else if (*c_mer) {
      log_config(c_mer);
      const auto refs = cskit::read_lines(mer_ref);
      const auto hyps = cskit::read_lines(mer_hyp);
      const cskit::CorpusMer report = cskit::corpus_mer(refs, hyps);
      std::cout << "mer " << report.rate() << "\n";
      std::cout << "substitutions " << report.pooled.substitutions
                << " deletions " << report.pooled.deletions << " insertions "
                << report.pooled.insertions << " ref-tokens "
                << report.pooled.ref_len << "\n";
      if (report.skipped_empty_refs)
        std::cerr << "skipped empty references: " << report.skipped_empty_refs
                  << "\n";
      if (!mer_json.empty()) {
        nlohmann::ordered_json j;
        j["mer"] = report.rate();
        j["substitutions"] = report.pooled.substitutions;
        j["deletions"] = report.pooled.deletions;
        j["insertions"] = report.pooled.insertions;
        j["ref_tokens"] = report.pooled.ref_len;
        j["hyp_tokens"] = report.pooled.hyp_len;
        j["scored_pairs"] = report.scored_pairs;
        j["skipped_empty_refs"] = report.skipped_empty_refs;
        write_text(mer_json, j.dump(2) + "\n");
      }
    } else if (*c_rec) {
      log_config(c_rec);
      const auto model = cskit::TransducerModel::load(rec_model);
      const cskit::BpeModel bpe = cskit::load_bpe(rec_bpe);
      const TextCodec codec{&model.vocab(), &bpe};
      Dataset data = cskit::load_dataset_jsonl(rec_data);
      cskit::encode_dataset(data, codec);
      std::unique_ptr<cskit::NnlmModel> lm;
      if (!rec_lm.empty())
        lm = std::make_unique<cskit::NnlmModel>(cskit::NnlmModel::load(rec_lm));
      const Lang minor = rec_minor == "en" ? Lang::EN : Lang::ZH;
      nlohmann::ordered_json points = nlohmann::ordered_json::array();
      std::string csv = "source,top_n,recall\n";
      for (int n : rec_top_ns) {
        const cskit::RecallReport r = cskit::encoder_recall(
            model, cskit::dataset_ptrs(data), minor, n, lm.get());
        std::cout << "top-" << n << " acoustic " << r.acoustic_recall()
                  << " label " << r.label_recall();
        if (lm) std::cout << " nnlm " << r.nnlm_recall();
        std::cout << " keywords " << r.keywords << "\n";
        nlohmann::ordered_json p;
        p["top_n"] = n;
        p["keywords"] = r.keywords;
        p["acoustic"] = r.acoustic_recall();
        p["label"] = r.label_recall();
        if (lm) p["nnlm"] = r.nnlm_recall();
        points.push_back(std::move(p));
        csv += "acoustic," + std::to_string(n) + "," +
               std::to_string(r.acoustic_recall()) + "\n";
        csv += "label," + std::to_string(n) + "," +
               std::to_string(r.label_recall()) + "\n";
        if (lm)
          csv += "nnlm," + std::to_string(n) + "," +
                 std::to_string(r.nnlm_recall()) + "\n";
      }
      if (!rec_json.empty()) write_text(rec_json, points.dump(2) + "\n");
      if (!rec_csv.empty()) write_text(rec_csv, csv);
    } else if (*c_sig) {
      log_config(c_sig);
      const cskit::SignificanceReport r = cskit::significance(
          cskit::read_lines(sig_ref), cskit::read_lines(sig_a),
          cskit::read_lines(sig_b), sig_resamples, seed);
      std::cout << "mer-a " << r.mer_a << " mer-b " << r.mer_b << " mean-diff "
                << r.mean_diff << " p " << r.p_value << "\n";
    } else if (*c_rep) {
      log_config(c_rep);
      cskit::ExperimentConfig cfg;
      cfg.seed = seed;
      if (rep_fast) {
        cfg.scenario.supervised_per_lang = 30;
        cfg.scenario.unlabeled_per_lang = 80;
        cfg.scenario.test_mono_per_lang = 20;
        cfg.scenario.test_cs = 60;
        cfg.scenario.parallel_pairs = 120;
        cfg.teacher_epochs = 8;
        cfg.baseline_epochs = 10;
        cfg.pretrain_epochs = 5;
        cfg.finetune_epochs = 5;
        cfg.nnlm_epochs = 8;
        cfg.nnlm_cs_epochs = 4;
        cfg.bootstrap_resamples = 500;
      }
      const cskit::ExperimentReport report = cskit::run_experiment(cfg);
      const std::string text =
          cskit::experiment_report_json(report).dump(2) + "\n";
      if (rep_out.empty())
        std::cout << text;
      else
        write_text(rep_out, text);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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
// Mixed error rate (word errors for Latin script, character errors for CJK),
// per-encoder keyword recall, and paired-bootstrap significance testing.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cskit/common.hpp"
#include "cskit/corpus.hpp"
#include "cskit/model.hpp"

namespace cskit {

// Scoring units: Latin-script words and individual CJK characters, with
// punctuation stripped — the same segmentation used for tokenization.
inline std::vector<std::string> mer_tokens(std::string_view text) {
  std::vector<std::string> toks;
  for (const auto& tok : tokenize_mixed(text).tokens)
    toks.push_back(tok.surface);
  return toks;
}

struct MerCounts {
  long long substitutions = 0;
  long long deletions = 0;
  long long insertions = 0;
  long long ref_len = 0;
  long long hyp_len = 0;

  long long errors() const { return substitutions + deletions + insertions; }

  double rate() const {
    if (ref_len == 0)
      return errors() == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    return static_cast<double>(errors()) / static_cast<double>(ref_len);
  }
};

// Levenshtein alignment with unit costs. Ties are resolved preferring
// match/substitution, then deletion, then insertion, so the S/D/I split is
// deterministic; the distance itself is tie-free.
inline MerCounts mer_counts(const std::vector<std::string>& ref,
                            const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  struct Cell {
    int dist;
    std::uint8_t back;  // 0 start, 1 diag, 2 del, 3 ins
  };
  std::vector<std::vector<Cell>> dp(n + 1, std::vector<Cell>(m + 1));
  dp[0][0] = {0, 0};
  for (std::size_t i = 1; i <= n; ++i) dp[i][0] = {static_cast<int>(i), 2};
  for (std::size_t j = 1; j <= m; ++j) dp[0][j] = {static_cast<int>(j), 3};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = dp[i - 1][j - 1].dist + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int del = dp[i - 1][j].dist + 1;
      const int ins = dp[i][j - 1].dist + 1;
      Cell c{diag, 1};
      if (del < c.dist) c = {del, 2};
      if (ins < c.dist) c = {ins, 3};
      dp[i][j] = c;
    }
  }
  MerCounts out;
  out.ref_len = static_cast<long long>(n);
  out.hyp_len = static_cast<long long>(m);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    switch (dp[i][j].back) {
      case 1:
        if (ref[i - 1] != hyp[j - 1]) ++out.substitutions;
        --i;
        --j;
        break;
      case 2:
        ++out.deletions;
        --i;
        break;
      case 3:
        ++out.insertions;
        --j;
        break;
      default:
        throw std::logic_error("mer_counts: bad backtrace");
    }
  }
  return out;
}

inline MerCounts mer_counts_text(std::string_view ref, std::string_view hyp) {
  return mer_counts(mer_tokens(ref), mer_tokens(hyp));
}

inline double mer(std::string_view ref, std::string_view hyp) {
  return mer_counts_text(ref, hyp).rate();
}

struct CorpusMer {
  MerCounts pooled;              // micro-averaged over scored pairs
  int scored_pairs = 0;
  int skipped_empty_refs = 0;

  double rate() const { return pooled.rate(); }
};

// Pools error and reference counts over the corpus. Pairs whose reference
// tokenizes to nothing are skipped (and counted); their hypotheses do not
// contribute insertions.
inline CorpusMer corpus_mer(const std::vector<std::string>& refs,
                            const std::vector<std::string>& hyps) {
  if (refs.size() != hyps.size())
    throw std::invalid_argument("corpus_mer: ref/hyp count mismatch");
  CorpusMer out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto r = mer_tokens(refs[i]);
    if (r.empty()) {
      ++out.skipped_empty_refs;
      continue;
    }
    const MerCounts c = mer_counts(r, mer_tokens(hyps[i]));
    out.pooled.substitutions += c.substitutions;
    out.pooled.deletions += c.deletions;
    out.pooled.insertions += c.insertions;
    out.pooled.ref_len += c.ref_len;
    out.pooled.hyp_len += c.hyp_len;
    ++out.scored_pairs;
  }
  return out;
}

// ---- Per-encoder keyword recall (simple joiner only) ----

struct RecallReport {
  int top_n = 0;
  int keywords = 0;            // minor-language keyword instances scored
  int scored_utterances = 0;
  int skipped_utterances = 0;  // no minor-language token in the reference
  int hits_acoustic = 0;
  int hits_label = 0;
  int hits_nnlm = 0;

  double acoustic_recall() const { return ratio(hits_acoustic); }
  double label_recall() const { return ratio(hits_label); }
  double nnlm_recall() const { return ratio(hits_nnlm); }

 private:
  double ratio(int hits) const {
    return keywords == 0 ? 0.0 : static_cast<double>(hits) / keywords;
  }
};

namespace detail {

// Rank by strict dominance: 1 + number of competing entries with a strictly
// higher score. Blank (id 0) never competes and is never a keyword.
inline bool in_top_n(const Eigen::VectorXd& scores, int first_id, int token,
                     int top_n) {
  int better = 0;
  const double s = scores[token - first_id];
  for (Eigen::Index k = 0; k < scores.size(); ++k)
    if (scores[k] > s) ++better;
  return better < top_n;
}

}  // namespace detail

// For every reference token of the minor language: the acoustic encoder
// scores a hit if the token is in the top-N of the acoustic branch logits at
// any frame; the label encoder (and the NNLM, when given) scores a hit if
// the token is in the top-N of its distribution at the teacher-forced step
// that predicts the token. Requires the simple joiner.
inline RecallReport encoder_recall(const TransducerModel& model,
                                   const std::vector<const Example*>& data,
                                   Lang minor, int top_n,
                                   const NnlmModel* lm = nullptr) {
  if (top_n <= 0)
    throw std::invalid_argument("encoder_recall: top_n must be positive");
  RecallReport report;
  report.top_n = top_n;
  const UnionVocab& vocab = model.vocab();
  for (const Example* ex : data) {
    bool has_minor = false;
    for (int tok : ex->tokens)
      if (vocab.entry(tok).lang == minor) has_minor = true;
    if (!has_minor) {
      ++report.skipped_utterances;
      continue;
    }
    ++report.scored_utterances;

    const Eigen::MatrixXd enc = model.encode_acoustic(ex->features);
    std::vector<Eigen::VectorXd> frame_logits;
    frame_logits.reserve(enc.rows());
    for (Eigen::Index t = 0; t < enc.rows(); ++t) {
      const Eigen::VectorXd h = enc.row(t).transpose();
      Eigen::VectorXd logits = model.acoustic_branch_logits(h);
      frame_logits.push_back(logits.tail(logits.size() - 1));  // drop blank
    }

    Eigen::VectorXd g = model.label_start();
    Eigen::VectorXd lm_state;
    if (lm) lm_state = lm->start();
    for (int tok : ex->tokens) {
      if (vocab.entry(tok).lang == minor) {
        ++report.keywords;
        for (const auto& logits : frame_logits)
          if (detail::in_top_n(logits, 1, tok, top_n)) {
            ++report.hits_acoustic;
            break;
          }
        Eigen::VectorXd label_logits = model.label_branch_logits(g);
        if (detail::in_top_n(label_logits.tail(label_logits.size() - 1), 1,
                             tok, top_n))
          ++report.hits_label;
        if (lm && detail::in_top_n(lm->log_probs(lm_state), 1, tok, top_n))
          ++report.hits_nnlm;
      }
      g = model.label_step(g, tok);
      if (lm) lm_state = lm->step(lm_state, tok);
    }
  }
  return report;
}

// ---- Paired bootstrap significance on corpus MER ----

struct SignificanceReport {
  double mer_a = 0.0;
  double mer_b = 0.0;
  double mean_diff = 0.0;  // mean of resampled MER(A) - MER(B)
  double p_value = 1.0;
  int resamples = 0;
};

// Two-sided paired bootstrap over utterances. Resampled corpora share the
// same utterance draw for both systems; add-one smoothing keeps p in (0, 1].
inline SignificanceReport significance(const std::vector<std::string>& refs,
                                       const std::vector<std::string>& hyps_a,
                                       const std::vector<std::string>& hyps_b,
                                       int resamples, std::uint64_t seed) {
  if (refs.size() != hyps_a.size() || refs.size() != hyps_b.size())
    throw std::invalid_argument("significance: corpus size mismatch");
  if (resamples < 100)
    throw std::invalid_argument("significance: need at least 100 resamples");

  struct PairErr {
    long long err_a, err_b, ref_len;
  };
  std::vector<PairErr> pairs;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto r = mer_tokens(refs[i]);
    if (r.empty()) continue;
    pairs.push_back({mer_counts(r, mer_tokens(hyps_a[i])).errors(),
                     mer_counts(r, mer_tokens(hyps_b[i])).errors(),
                     static_cast<long long>(r.size())});
  }
  if (pairs.empty())
    throw std::invalid_argument("significance: no non-empty references");

  SignificanceReport report;
  report.resamples = resamples;
  {
    long long ea = 0, eb = 0, rl = 0;
    for (const auto& p : pairs) {
      ea += p.err_a;
      eb += p.err_b;
      rl += p.ref_len;
    }
    report.mer_a = static_cast<double>(ea) / rl;
    report.mer_b = static_cast<double>(eb) / rl;
  }

  Rng rng(derive_seed(seed, "bootstrap"));
  int n_le = 0, n_ge = 0;
  double diff_sum = 0.0;
  for (int b = 0; b < resamples; ++b) {
    long long ea = 0, eb = 0, rl = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const PairErr& p = pairs[rng.uniform_int(pairs.size())];
      ea += p.err_a;
      eb += p.err_b;
      rl += p.ref_len;
    }
    const double d = static_cast<double>(ea - eb) / rl;
    diff_sum += d;
    if (d <= 0.0) ++n_le;
    if (d >= 0.0) ++n_ge;
  }
  report.mean_diff = diff_sum / resamples;
  report.p_value = std::min(
      1.0, 2.0 * (std::min(n_le, n_ge) + 1.0) / (resamples + 1.0));
  return report;
}

}  // namespace cskit

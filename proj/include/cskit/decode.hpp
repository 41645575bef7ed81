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
// Time-synchronous beam search with shallow fusion. Hypotheses are scored by
//   combined = log P_T + lambda_lm * log P_LM - lambda_ilm * log P_ILM
// where the LM and internal-LM terms accumulate only on non-blank emissions.
// Hypotheses with identical label sequences are recombined by log-adding
// their transducer path scores, so with a beam wider than the reachable
// hypothesis set the search scores every label sequence exactly.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cskit/common.hpp"
#include "cskit/model.hpp"

namespace cskit {

struct FusionConfig {
  double lambda_lm = 0.25;
  double lambda_ilm = 0.2;
  int beam_size = 8;
  int max_symbols_per_frame = 3;
};

struct BeamHypothesis {
  std::vector<int> tokens;
  double log_t = 0.0;
  double log_lm = 0.0;
  double log_ilm = 0.0;
  double combined = 0.0;
};

namespace detail {

struct LiveHyp {
  std::vector<int> tokens;
  double log_t = 0.0;
  double log_lm = 0.0;
  double log_ilm = 0.0;
  double combined = 0.0;
  Eigen::VectorXd g;         // transducer label state
  Eigen::VectorXd lm_state;  // empty when no external LM

  void rescore(const FusionConfig& cfg) {
    combined = log_t + cfg.lambda_lm * log_lm - cfg.lambda_ilm * log_ilm;
  }
};

// Better-first ordering; ties prefer shorter, then lexicographically
// smaller label sequences so results are deterministic.
inline bool hyp_before(const LiveHyp& a, const LiveHyp& b) {
  if (a.combined != b.combined) return a.combined > b.combined;
  if (a.tokens.size() != b.tokens.size())
    return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

inline void prune(std::vector<LiveHyp>& hyps, int beam_size) {
  std::sort(hyps.begin(), hyps.end(), hyp_before);
  if (static_cast<int>(hyps.size()) > beam_size) hyps.resize(beam_size);
}

}  // namespace detail

// Returns up to beam_size final hypotheses, best first.
inline std::vector<BeamHypothesis> beam_search(const TransducerModel& model,
                                               const FeatureSequence& x,
                                               const FusionConfig& cfg,
                                               const NnlmModel* lm = nullptr) {
  if (cfg.beam_size <= 0)
    throw std::invalid_argument("beam_search: beam_size must be positive");
  if (cfg.max_symbols_per_frame <= 0)
    throw std::invalid_argument(
        "beam_search: max_symbols_per_frame must be positive");
  if (lm == nullptr && cfg.lambda_lm != 0.0)
    throw std::invalid_argument(
        "beam_search: lambda_lm requires an external LM");

  const int blank = model.blank_id();
  const int vocab = model.dims().vocab_size;
  const Eigen::MatrixXd enc = model.encode_acoustic(x);

  std::vector<detail::LiveHyp> beam(1);
  beam[0].g = model.label_start();
  if (lm) beam[0].lm_state = lm->start();

  for (Eigen::Index t = 0; t < enc.rows(); ++t) {
    const Eigen::VectorXd h = enc.row(t).transpose();
    // Hypotheses that have finished this frame, keyed by label sequence.
    std::map<std::vector<int>, detail::LiveHyp> boundary;
    std::vector<detail::LiveHyp> active = std::move(beam);

    for (int step = 0; step <= cfg.max_symbols_per_frame; ++step) {
      std::vector<detail::LiveHyp> expanded;
      for (const auto& hyp : active) {
        const Eigen::VectorXd lp =
            log_softmax_vec(model.joint_logits(h, hyp.g));
        // Blank: the hypothesis moves to the next frame unchanged.
        {
          auto [it, inserted] = boundary.try_emplace(hyp.tokens);
          if (inserted) {
            it->second = hyp;
            it->second.log_t += lp[blank];
          } else {
            it->second.log_t =
                log_add_exp(it->second.log_t, hyp.log_t + lp[blank]);
          }
          it->second.rescore(cfg);
        }
        if (step == cfg.max_symbols_per_frame) continue;
        const Eigen::VectorXd lp_ilm = model.ilm_log_probs(hyp.g);
        Eigen::VectorXd lp_lm;
        if (lm) lp_lm = lm->log_probs(hyp.lm_state);
        for (int k = 1; k < vocab; ++k) {
          detail::LiveHyp next = hyp;
          next.tokens.push_back(k);
          next.log_t += lp[k];
          next.log_ilm += lp_ilm[k];
          if (lm) next.log_lm += lp_lm[k - 1];
          next.rescore(cfg);
          expanded.push_back(std::move(next));
        }
      }
      if (step == cfg.max_symbols_per_frame || expanded.empty()) break;
      detail::prune(expanded, cfg.beam_size);
      // Update states only for the surviving expansions.
      for (auto& hyp : expanded) {
        const int k = hyp.tokens.back();
        hyp.g = model.label_step(hyp.g, k);
        if (lm) hyp.lm_state = lm->step(hyp.lm_state, k);
      }
      active = std::move(expanded);
    }

    beam.clear();
    beam.reserve(boundary.size());
    for (auto& [tokens, hyp] : boundary) beam.push_back(std::move(hyp));
    detail::prune(beam, cfg.beam_size);
    for (const auto& hyp : beam)
      if (!std::isfinite(hyp.combined))
        throw std::runtime_error("beam_search: non-finite score at frame " +
                                 std::to_string(t));
  }

  std::vector<BeamHypothesis> result;
  result.reserve(beam.size());
  for (const auto& hyp : beam)
    result.push_back(
        {hyp.tokens, hyp.log_t, hyp.log_lm, hyp.log_ilm, hyp.combined});
  return result;
}

// Frame-synchronous argmax decoding with the same per-frame symbol cap.
inline std::vector<int> greedy_decode(const TransducerModel& model,
                                      const FeatureSequence& x,
                                      int max_symbols_per_frame = 3) {
  if (max_symbols_per_frame <= 0)
    throw std::invalid_argument(
        "greedy_decode: max_symbols_per_frame must be positive");
  const int blank = model.blank_id();
  const Eigen::MatrixXd enc = model.encode_acoustic(x);
  std::vector<int> tokens;
  Eigen::VectorXd g = model.label_start();
  for (Eigen::Index t = 0; t < enc.rows(); ++t) {
    const Eigen::VectorXd h = enc.row(t).transpose();
    for (int step = 0; step < max_symbols_per_frame; ++step) {
      const Eigen::VectorXd lp = log_softmax_vec(model.joint_logits(h, g));
      Eigen::Index best = 0;
      lp.maxCoeff(&best);
      if (best == blank) break;
      tokens.push_back(static_cast<int>(best));
      g = model.label_step(g, static_cast<int>(best));
    }
  }
  return tokens;
}

struct ForcedScore {
  double log_t = 0.0;
  double log_lm = 0.0;
  double log_ilm = 0.0;

  double combined(const FusionConfig& cfg) const {
    return log_t + cfg.lambda_lm * log_lm - cfg.lambda_ilm * log_ilm;
  }
};

// Marginal log-probability of emitting exactly `y`, restricted to alignment
// paths with at most `max_symbols_per_frame` labels per frame — the same
// path set beam_search recombines over. With the cap >= |y| the transducer
// term equals the training loss marginal. Unreachable sequences score -inf.
inline ForcedScore forced_score(const TransducerModel& model,
                                const FeatureSequence& x,
                                const std::vector<int>& y,
                                int max_symbols_per_frame = 3,
                                const NnlmModel* lm = nullptr) {
  const int blank = model.blank_id();
  const int cap = max_symbols_per_frame;
  const Eigen::MatrixXd enc = model.encode_acoustic(x);
  const int big_t = static_cast<int>(enc.rows());
  const int big_u = static_cast<int>(y.size());

  const std::vector<Eigen::VectorXd> states = model.label_states(y);
  // log P(symbol | frame t, u labels emitted) for the two symbols the path
  // can use at (t, u): y[u] and blank.
  std::vector<std::vector<double>> lp_label(big_t,
                                            std::vector<double>(big_u + 1));
  std::vector<std::vector<double>> lp_blank(big_t,
                                            std::vector<double>(big_u + 1));
  for (int t = 0; t < big_t; ++t) {
    const Eigen::VectorXd h = enc.row(t).transpose();
    for (int u = 0; u <= big_u; ++u) {
      const Eigen::VectorXd lp =
          log_softmax_vec(model.joint_logits(h, states[u]));
      lp_blank[t][u] = lp[blank];
      lp_label[t][u] = u < big_u ? lp[y[u]] : neg_inf();
    }
  }

  // dp[u] = log marginal over paths that have fully consumed the processed
  // frames and emitted u labels.
  std::vector<double> dp(big_u + 1, neg_inf());
  dp[0] = 0.0;
  for (int t = 0; t < big_t; ++t) {
    std::vector<double> next(big_u + 1, neg_inf());
    for (int u0 = 0; u0 <= big_u; ++u0) {
      if (dp[u0] == neg_inf()) continue;
      double within = 0.0;  // labels y[u0..u1) then blank
      for (int u1 = u0; u1 <= std::min(big_u, u0 + cap); ++u1) {
        next[u1] = log_add_exp(next[u1], dp[u0] + within + lp_blank[t][u1]);
        if (u1 < big_u) within += lp_label[t][u1];
      }
    }
    dp = std::move(next);
  }

  ForcedScore score;
  score.log_t = dp[big_u];
  for (int u = 0; u < big_u; ++u)
    score.log_ilm += model.ilm_log_probs(states[u])[y[u]];
  if (lm) score.log_lm = lm->sequence_log_prob(y);
  return score;
}

}  // namespace cskit

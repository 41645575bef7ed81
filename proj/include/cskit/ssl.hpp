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
// Semi-supervised training: monolingual teachers pseudo-label unlabeled
// audio, a student pretrains on the pseudo-labels with a fixed per-batch
// language ratio, then fine-tunes on the supervised set.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cskit/common.hpp"
#include "cskit/corpus.hpp"
#include "cskit/decode.hpp"
#include "cskit/model.hpp"

namespace cskit {

struct PseudoLabelStats {
  int kept = 0;
  int dropped_empty = 0;  // utterances whose decode produced no labels
};

inline Dataset pseudo_label(const TransducerModel& teacher,
                            const std::vector<const Example*>& pool,
                            const TextCodec& codec,
                            int max_symbols_per_frame = 3,
                            PseudoLabelStats* stats = nullptr) {
  Dataset out;
  for (const Example* ex : pool) {
    const std::vector<int> tokens =
        greedy_decode(teacher, ex->features, max_symbols_per_frame);
    if (tokens.empty()) {
      if (stats) ++stats->dropped_empty;
      continue;
    }
    Example labeled;
    labeled.id = ex->id;
    labeled.lang = ex->lang;
    labeled.features = ex->features;
    labeled.tokens = tokens;
    labeled.transcript = codec.decode(tokens);
    out.push_back(std::move(labeled));
    if (stats) ++stats->kept;
  }
  return out;
}

struct SslConfig {
  int percent_en = 50;  // stage-1 per-batch language ratio
  TrainConfig pretrain;
  TrainConfig finetune;

  SslConfig() { finetune.lr = kFinetuneLr; }
};

// Stage-1 training driven by a ratio sampler instead of epoch shuffles. An
// epoch is ceil(pool size / batch size) sampled batches.
inline TrainStats ratio_pretrain(TransducerModel& model,
                                 const std::vector<const Example*>& en_pool,
                                 const std::vector<const Example*>& zh_pool,
                                 int percent_en, const TrainConfig& cfg,
                                 Rng sampler_rng) {
  BatchSampler sampler(en_pool, zh_pool, cfg.batch_size, percent_en,
                       sampler_rng);
  const std::size_t pool = en_pool.size() + zh_pool.size();
  const int steps_per_epoch = static_cast<int>(
      (pool + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
  AdamOptimizer opt;
  TrainStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr * std::pow(cfg.lr_decay, epoch);
    double loss_sum = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s)
      loss_sum += train_step(model, sampler.next(), opt, lr, cfg.grad_clip);
    const double mean = loss_sum / steps_per_epoch;
    if (!std::isfinite(mean) || mean > cfg.divergence_limit)
      throw std::runtime_error("ratio_pretrain: diverged at epoch " +
                               std::to_string(epoch));
    stats.epoch_loss.push_back(mean);
  }
  return stats;
}

struct SslResult {
  TransducerModel model;
  PseudoLabelStats pl_en, pl_zh;
  TrainStats pretrain_stats, finetune_stats;
};

// Full pipeline. All randomness (initialization, batch order) derives from
// `seed`. With finetune.epochs == 0 the stage-1 model is returned as is.
inline SslResult ssl_train(const ModelDims& dims, JoinerVariant variant,
                           const UnionVocab& vocab,
                           const TransducerModel& teacher_en,
                           const TransducerModel& teacher_zh,
                           const std::vector<const Example*>& unlabeled_en,
                           const std::vector<const Example*>& unlabeled_zh,
                           const Dataset& supervised, const TextCodec& codec,
                           const SslConfig& cfg, std::uint64_t seed) {
  SslResult result{TransducerModel(dims, variant, vocab), {}, {}, {}, {}};

  const Dataset pl_en = pseudo_label(teacher_en, unlabeled_en, codec,
                                     /*max_symbols_per_frame=*/3,
                                     &result.pl_en);
  const Dataset pl_zh = pseudo_label(teacher_zh, unlabeled_zh, codec,
                                     /*max_symbols_per_frame=*/3,
                                     &result.pl_zh);
  std::vector<const Example*> en_ptrs, zh_ptrs;
  for (const auto& ex : pl_en) en_ptrs.push_back(&ex);
  for (const auto& ex : pl_zh) zh_ptrs.push_back(&ex);

  Rng init_rng(derive_seed(seed, "ssl_init"));
  result.model.init(init_rng);
  result.pretrain_stats =
      ratio_pretrain(result.model, en_ptrs, zh_ptrs, cfg.percent_en,
                     cfg.pretrain, Rng(derive_seed(seed, "ssl_sampler")));
  if (cfg.finetune.epochs > 0) {
    Rng ft_rng(derive_seed(seed, "ssl_finetune"));
    result.finetune_stats =
        train_transducer(result.model, supervised, cfg.finetune, ft_rng);
  }
  return result;
}

}  // namespace cskit

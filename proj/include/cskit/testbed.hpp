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
// A synthetic two-language world. Each language has a small vocabulary
// paired one-to-one across languages ("translations"); every vocabulary item
// owns a short acoustic template, and utterances are template concatenations
// plus Gaussian noise. Everything derives from the world seed.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cskit/align.hpp"
#include "cskit/common.hpp"
#include "cskit/corpus.hpp"
#include "cskit/model.hpp"

namespace cskit {

struct WorldConfig {
  int vocab_size = 20;  // per language, paired by index
  int feature_dim = 8;
  double noise_sigma = 0.5;
  int min_template_frames = 1;
  int max_template_frames = 3;
  int pos_classes = 3;
  double pos_agreement = 0.75;  // share of pairs with matching POS
  // Sentences follow a noisy ascending index chain: with probability chain_p
  // the next item is the successor of the previous one, otherwise uniform.
  // This gives language models a learnable signal while keeping every
  // continuation possible.
  double chain_p = 0.85;
  std::uint64_t seed = 1234;
};

class SynthWorld {
 public:
  explicit SynthWorld(const WorldConfig& config) : config_(config) {
    if (config_.vocab_size < 2 || config_.vocab_size > 144)
      throw std::invalid_argument("SynthWorld: vocab_size out of range");
    if (config_.feature_dim <= 0 || config_.pos_classes < 1 ||
        config_.min_template_frames < 1 ||
        config_.max_template_frames < config_.min_template_frames)
      throw std::invalid_argument("SynthWorld: invalid configuration");

    static const char* kSyllables[] = {"ba", "de", "ki", "lo", "mu", "na",
                                       "po", "ri", "su", "te", "wa", "zo"};
    for (int i = 0; i < config_.vocab_size; ++i) {
      en_words_.push_back(std::string(kSyllables[i / 12]) + kSyllables[i % 12]);
      zh_chars_.push_back(encode_utf8(0x4E00 + static_cast<char32_t>(i)));
      en_index_[en_words_.back()] = i;
      zh_index_[zh_chars_.back()] = i;
    }

    Rng pos_rng(derive_seed(config_.seed, "pos"));
    for (int i = 0; i < config_.vocab_size; ++i) {
      const int c = i % config_.pos_classes;
      en_pos_.push_back("c" + std::to_string(c));
      const bool agree = pos_rng.uniform() < config_.pos_agreement;
      const int zc = agree ? c : (c + 1) % config_.pos_classes;
      zh_pos_.push_back("c" + std::to_string(zc));
    }

    for (int i = 0; i < config_.vocab_size; ++i) {
      en_templates_.push_back(make_template("tpl_en", i));
      zh_templates_.push_back(make_template("tpl_zh", i));
    }
  }

  const WorldConfig& config() const { return config_; }
  int vocab_size() const { return config_.vocab_size; }
  const std::vector<std::string>& en_words() const { return en_words_; }
  const std::vector<std::string>& zh_chars() const { return zh_chars_; }
  const std::string& en_word(int i) const { return en_words_.at(i); }
  const std::string& zh_char(int i) const { return zh_chars_.at(i); }

  const std::string& pos_tag(Lang lang, int i) const {
    return lang == Lang::EN ? en_pos_.at(i) : zh_pos_.at(i);
  }

  // -1 if the surface does not belong to the language's vocabulary.
  int index_of(Lang lang, const std::string& surface) const {
    const auto& index = lang == Lang::EN ? en_index_ : zh_index_;
    auto it = index.find(surface);
    return it == index.end() ? -1 : it->second;
  }

  const Eigen::MatrixXd& item_template(Lang lang, int i) const {
    return lang == Lang::EN ? en_templates_.at(i) : zh_templates_.at(i);
  }

  // Deterministic rendering: template concatenation plus N(0, sigma^2).
  FeatureSequence synth(const Sentence& sentence,
                        std::uint64_t utt_seed) const {
    Eigen::Index rows = 0;
    std::vector<const Eigen::MatrixXd*> parts;
    for (const auto& tok : sentence.tokens) {
      const int idx = index_of(tok.lang, tok.surface);
      if (idx < 0)
        throw std::invalid_argument("SynthWorld::synth: unknown token '" +
                                    tok.surface + "'");
      parts.push_back(&item_template(tok.lang, idx));
      rows += parts.back()->rows();
    }
    Rng rng(utt_seed);
    FeatureSequence x(rows, config_.feature_dim);
    Eigen::Index r = 0;
    for (const auto* tpl : parts)
      for (Eigen::Index i = 0; i < tpl->rows(); ++i, ++r)
        for (int d = 0; d < config_.feature_dim; ++d)
          x(r, d) = (*tpl)(i, d) + config_.noise_sigma * rng.gaussian();
    return x;
  }

  Sentence mono_sentence(Lang lang, int min_len, int max_len, Rng& rng) const {
    check_lengths(min_len, max_len);
    const int len =
        min_len + static_cast<int>(rng.uniform_int(max_len - min_len + 1));
    Sentence s;
    int idx = -1;
    for (int k = 0; k < len; ++k) {
      idx = next_index(idx, rng);
      s.tokens.push_back(
          {lang == Lang::EN ? en_words_[idx] : zh_chars_[idx], lang});
    }
    return s;
  }

  // ZH-matrix sentence with one contiguous run of en_len dictionary-
  // consistent EN replacements; at most two switch points by construction.
  Sentence cs_sentence(int min_len, int max_len, int en_len, Rng& rng) const {
    check_lengths(min_len, max_len);
    if (en_len < 1 || en_len >= min_len)
      throw std::invalid_argument(
          "cs_sentence: en_len must be in [1, min_len)");
    Sentence s = mono_sentence(Lang::ZH, min_len, max_len, rng);
    const int n = static_cast<int>(s.tokens.size());
    const int start = static_cast<int>(rng.uniform_int(n - en_len + 1));
    for (int k = start; k < start + en_len; ++k) {
      const int idx = index_of(Lang::ZH, s.tokens[k].surface);
      s.tokens[k] = {en_words_[idx], Lang::EN};
    }
    return s;
  }

  // Monotone translation pair: source is ZH, target is EN over the same
  // indices. Gold links are the identity; POS tags come from the world.
  ParallelPair parallel_pair(int min_len, int max_len, Rng& rng,
                             std::string id) const {
    check_lengths(min_len, max_len);
    const int len =
        min_len + static_cast<int>(rng.uniform_int(max_len - min_len + 1));
    ParallelPair p;
    p.id = std::move(id);
    int idx = -1;
    for (int k = 0; k < len; ++k) {
      idx = next_index(idx, rng);
      p.src.tokens.push_back({zh_chars_[idx], Lang::ZH});
      p.tgt.tokens.push_back({en_words_[idx], Lang::EN});
      p.src_pos.push_back(zh_pos_[idx]);
      p.tgt_pos.push_back(en_pos_[idx]);
      p.links.emplace_back(k, k);
    }
    return p;
  }

  Example example(const Sentence& sentence, Lang tag, std::string id,
                  std::uint64_t utt_seed) const {
    Example ex;
    ex.id = std::move(id);
    ex.lang = tag;
    ex.transcript = sentence.text();
    ex.features = synth(sentence, utt_seed);
    return ex;
  }

 private:
  void check_lengths(int min_len, int max_len) const {
    if (min_len < 1 || max_len < min_len)
      throw std::invalid_argument("SynthWorld: bad sentence length range");
  }

  // Draws the next vocabulary index of the noisy chain; prev < 0 starts it.
  int next_index(int prev, Rng& rng) const {
    if (prev >= 0 && rng.uniform() < config_.chain_p)
      return (prev + 1) % config_.vocab_size;
    return static_cast<int>(rng.uniform_int(config_.vocab_size));
  }

  Eigen::MatrixXd make_template(const char* tag, int i) const {
    Rng rng(derive_seed(config_.seed, tag, static_cast<std::uint64_t>(i)));
    const int frames =
        config_.min_template_frames +
        static_cast<int>(rng.uniform_int(config_.max_template_frames -
                                         config_.min_template_frames + 1));
    Eigen::MatrixXd tpl(frames, config_.feature_dim);
    for (int r = 0; r < frames; ++r)
      for (int d = 0; d < config_.feature_dim; ++d)
        tpl(r, d) = 2.0 * rng.gaussian();
    return tpl;
  }

  WorldConfig config_;
  std::vector<std::string> en_words_, zh_chars_;
  std::vector<std::string> en_pos_, zh_pos_;
  std::vector<Eigen::MatrixXd> en_templates_, zh_templates_;
  std::unordered_map<std::string, int> en_index_, zh_index_;
};

// Tokenizer output units for the world: a BPE that merges every EN word into
// a single unit, plus the ZH character inventory.
struct WorldVocab {
  BpeModel bpe;
  UnionVocab vocab;

  TextCodec codec() const { return TextCodec{&vocab, &bpe}; }
};

inline WorldVocab make_world_vocab(const SynthWorld& world) {
  Sentence all_words;
  std::size_t merge_budget = 0;
  for (const auto& w : world.en_words()) {
    all_words.tokens.push_back({w, Lang::EN});
    merge_budget += w.size() - 1;  // ASCII: bytes == code points
  }
  WorldVocab wv;
  wv.bpe = train_bpe({all_words}, static_cast<int>(merge_budget));
  wv.vocab = UnionVocab::build(wv.bpe, world.zh_chars());
  return wv;
}

}  // namespace cskit

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
// Text ingestion for a two-language (Latin-script / CJK) setup: mixed
// tokenization, BPE subword training, and the union output vocabulary.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cskit/common.hpp"

namespace cskit {

enum class Lang : std::uint8_t { EN = 0, ZH = 1 };

inline const char* lang_name(Lang l) { return l == Lang::EN ? "EN" : "ZH"; }

inline Lang lang_from_name(std::string_view s) {
  if (s == "EN") return Lang::EN;
  if (s == "ZH") return Lang::ZH;
  throw std::invalid_argument("unknown language tag: " + std::string(s));
}

struct Token {
  std::string surface;
  Lang lang;

  bool operator==(const Token&) const = default;
};

// An ordered token sequence with provenance. The zero-token Sentence is the
// distinguished empty value returned for input that tokenizes to nothing.
struct Sentence {
  std::vector<Token> tokens;
  std::string source_id;

  bool empty() const { return tokens.empty(); }

  // Space-joined surfaces. tokenize_mixed() of this string returns the same
  // token sequence.
  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out.push_back(' ');
      out += tokens[i].surface;
    }
    return out;
  }
};

// CJK Unified Ideographs plus Extension A. This fixed block list is the whole
// script-classification rule: a code point in these blocks is a ZH token by
// itself, anything else joins the surrounding Latin-script chunk.
inline bool is_cjk(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF);
}

// Punctuation stripped before scoring and generation: ASCII punctuation plus
// common CJK punctuation and general-punctuation marks.
inline bool is_stripped_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') ||
           (cp >= '[' && cp <= '`') || (cp >= '{' && cp <= '~');
  }
  switch (cp) {
    case 0x3001:  // 、
    case 0x3002:  // 。
    case 0xFF01:  // ！
    case 0xFF08:  // （
    case 0xFF09:  // ）
    case 0xFF0C:  // ，
    case 0xFF1A:  // ：
    case 0xFF1B:  // ；
    case 0xFF1F:  // ？
    case 0x300A:  // 《
    case 0x300B:  // 》
    case 0x2018:
    case 0x2019:
    case 0x201C:
    case 0x201D:
    case 0x2026:  // …
    case 0x2014:  // —
    case 0x00B7:  // ·
      return true;
    default:
      return false;
  }
}

inline bool is_space_cp(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\r' || cp == '\n' || cp == 0x3000;
}

// Splits raw text into language-tagged tokens: each CJK character is one ZH
// token; each maximal run of other non-space, non-punctuation code points is
// one EN token. Punctuation and whitespace are dropped. A chunk's language is
// decided by its first code point, so digit or mixed-symbol chunks ("3d") are
// EN by construction.
inline Sentence tokenize_mixed(std::string_view text, std::string source_id = "") {
  Sentence out;
  out.source_id = std::move(source_id);
  const std::vector<char32_t> cps = decode_utf8(text);
  std::string chunk;
  auto flush = [&] {
    if (!chunk.empty()) {
      out.tokens.push_back(Token{chunk, Lang::EN});
      chunk.clear();
    }
  };
  for (char32_t cp : cps) {
    if (is_space_cp(cp) || is_stripped_punct(cp)) {
      flush();
    } else if (is_cjk(cp)) {
      flush();
      out.tokens.push_back(Token{encode_utf8(cp), Lang::ZH});
    } else {
      append_utf8(chunk, cp);
    }
  }
  flush();
  return out;
}

// --- BPE ------------------------------------------------------------------

// Greedy byte-pair-encoding model: an ordered merge list over a character
// inventory. Merges carry no end-of-word marker, so decoding is plain
// concatenation and encode/decode round-trips every training word.
struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;
  std::vector<std::string> base_symbols;  // sorted code-point inventory

  // Splits a word into code-point symbols, then applies the merges in
  // training order, each exhaustively left to right.
  std::vector<std::string> encode_word(const std::string& word) const {
    std::vector<std::string> syms;
    for (char32_t cp : decode_utf8(word)) syms.push_back(encode_utf8(cp));
    for (const auto& [a, b] : merges) {
      if (syms.size() < 2) break;
      std::vector<std::string> next;
      next.reserve(syms.size());
      std::size_t i = 0;
      while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          next.push_back(a + b);
          i += 2;
        } else {
          next.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(next);
    }
    return syms;
  }

  static std::string decode(const std::vector<std::string>& units) {
    std::string out;
    for (const auto& u : units) out += u;
    return out;
  }

  // All symbols this model can emit: base characters plus every merge
  // product, deduplicated, in byte-lexicographic order.
  std::vector<std::string> unit_inventory() const {
    std::vector<std::string> inv = base_symbols;
    for (const auto& [a, b] : merges) inv.push_back(a + b);
    std::sort(inv.begin(), inv.end());
    inv.erase(std::unique(inv.begin(), inv.end()), inv.end());
    return inv;
  }
};

// Trains a BPE model with the standard greedy most-frequent-pair loop.
// Pair-count ties break toward the byte-lexicographically smallest pair, so
// training is deterministic. Stops early once no adjacent pair remains.
inline BpeModel train_bpe(const std::vector<Sentence>& corpus, int num_merges) {
  if (corpus.empty()) throw std::invalid_argument("train_bpe: empty corpus");
  if (num_merges < 0) throw std::invalid_argument("train_bpe: negative num_merges");

  // Word frequency table; each word is held as its current symbol sequence.
  std::map<std::string, long long> word_freq;
  for (const auto& sent : corpus)
    for (const auto& tok : sent.tokens) ++word_freq[tok.surface];

  BpeModel model;
  std::unordered_set<std::string> base_set;
  std::vector<std::pair<std::vector<std::string>, long long>> words;
  words.reserve(word_freq.size());
  for (const auto& [word, freq] : word_freq) {
    std::vector<std::string> syms;
    for (char32_t cp : decode_utf8(word)) {
      std::string s = encode_utf8(cp);
      base_set.insert(s);
      syms.push_back(std::move(s));
    }
    words.emplace_back(std::move(syms), freq);
  }
  model.base_symbols.assign(base_set.begin(), base_set.end());
  std::sort(model.base_symbols.begin(), model.base_symbols.end());

  for (int m = 0; m < num_merges; ++m) {
    std::map<std::pair<std::string, std::string>, long long> pair_freq;
    for (const auto& [syms, freq] : words)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        pair_freq[{syms[i], syms[i + 1]}] += freq;
    if (pair_freq.empty()) break;

    // Most frequent pair; the ordered map makes the tie-break lexicographic.
    auto best = pair_freq.begin();
    for (auto it = pair_freq.begin(); it != pair_freq.end(); ++it)
      if (it->second > best->second) best = it;

    const auto [a, b] = best->first;
    model.merges.emplace_back(a, b);
    for (auto& [syms, freq] : words) {
      std::vector<std::string> next;
      next.reserve(syms.size());
      std::size_t i = 0;
      while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          next.push_back(a + b);
          i += 2;
        } else {
          next.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(next);
    }
  }
  return model;
}

inline void save_bpe(const BpeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_bpe: cannot write " + path);
  out << "cskit bpe 1\n";
  out << "base " << model.base_symbols.size() << "\n";
  for (const auto& s : model.base_symbols) out << s << "\n";
  out << "merges " << model.merges.size() << "\n";
  for (const auto& [a, b] : model.merges) out << a << "\t" << b << "\n";
}

inline BpeModel load_bpe(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_bpe: cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != "cskit bpe 1")
    throw std::runtime_error("load_bpe: bad header in " + path);
  BpeModel model;
  std::string word;
  std::size_t n = 0;
  in >> word >> n;
  std::getline(in, line);
  if (word != "base") throw std::runtime_error("load_bpe: expected base count");
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(in, line);
    model.base_symbols.push_back(line);
  }
  in >> word >> n;
  std::getline(in, line);
  if (word != "merges") throw std::runtime_error("load_bpe: expected merge count");
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(in, line);
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("load_bpe: malformed merge line");
    model.merges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return model;
}

// --- Union vocabulary -----------------------------------------------------

struct VocabEntry {
  std::string surface;
  Lang lang;
};

// Thrown when the per-language unit sets share a surface form.
class VocabCollisionError : public std::runtime_error {
 public:
  explicit VocabCollisionError(const std::vector<std::string>& collisions)
      : std::runtime_error(format(collisions)), collisions_(collisions) {}
  const std::vector<std::string>& collisions() const { return collisions_; }

 private:
  static std::string format(const std::vector<std::string>& c) {
    std::string msg = "union vocabulary collision on surface form(s):";
    for (const auto& s : c) msg += " '" + s + "'";
    return msg;
  }
  std::vector<std::string> collisions_;
};

// The model output inventory: blank at index 0, then the union of the
// per-language unit sets in byte-lexicographic surface order. Indices are
// stable across save/load.
class UnionVocab {
 public:
  static constexpr const char* kBlankSurface = "<blank>";

  UnionVocab() = default;

  static UnionVocab build(const BpeModel& en_bpe,
                          const std::vector<std::string>& zh_chars) {
    const std::vector<std::string> en_units = en_bpe.unit_inventory();
    if (en_units.empty() || zh_chars.empty())
      throw std::invalid_argument("build_union_vocab: empty unit inventory");

    std::vector<std::string> zh_sorted = zh_chars;
    std::sort(zh_sorted.begin(), zh_sorted.end());
    zh_sorted.erase(std::unique(zh_sorted.begin(), zh_sorted.end()),
                    zh_sorted.end());

    std::unordered_set<std::string> en_set(en_units.begin(), en_units.end());
    std::vector<std::string> collisions;
    for (const auto& z : zh_sorted)
      if (en_set.count(z)) collisions.push_back(z);
    if (!collisions.empty()) throw VocabCollisionError(collisions);

    std::vector<VocabEntry> units;
    units.reserve(en_units.size() + zh_sorted.size());
    for (const auto& u : en_units) units.push_back({u, Lang::EN});
    for (const auto& z : zh_sorted) units.push_back({z, Lang::ZH});
    std::sort(units.begin(), units.end(),
              [](const VocabEntry& a, const VocabEntry& b) {
                return a.surface < b.surface;
              });

    UnionVocab v;
    v.entries_.push_back({kBlankSurface, Lang::EN});
    for (auto& u : units) v.entries_.push_back(std::move(u));
    v.rebuild_index();
    return v;
  }

  int size() const { return static_cast<int>(entries_.size()); }
  int blank_id() const { return 0; }

  const VocabEntry& entry(int id) const { return entries_.at(id); }

  // -1 if the surface is unknown.
  int id_of(std::string_view surface) const {
    auto it = index_.find(std::string(surface));
    return it == index_.end() ? -1 : it->second;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("UnionVocab::save: cannot write " + path);
    out << "cskit vocab 1\n";
    for (const auto& e : entries_)
      out << e.surface << "\t" << lang_name(e.lang) << "\n";
  }

  static UnionVocab load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("UnionVocab::load: cannot read " + path);
    std::string line;
    std::getline(in, line);
    if (line != "cskit vocab 1")
      throw std::runtime_error("UnionVocab::load: bad header in " + path);
    UnionVocab v;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error("UnionVocab::load: malformed line: " + line);
      v.entries_.push_back(
          {line.substr(0, tab), lang_from_name(line.substr(tab + 1))});
    }
    if (v.entries_.empty() || v.entries_[0].surface != kBlankSurface)
      throw std::runtime_error("UnionVocab::load: missing blank entry");
    v.rebuild_index();
    return v;
  }

  // Embeds / restores the vocabulary inside a larger text stream (used by
  // model checkpoints). Format: count line, then one surface\tlang per entry.
  void write_entries(std::ostream& out) const {
    out << entries_.size() << "\n";
    for (const auto& e : entries_)
      out << e.surface << "\t" << lang_name(e.lang) << "\n";
  }

  static UnionVocab read_entries(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
      throw std::runtime_error("UnionVocab::read_entries: truncated stream");
    const std::size_t n = std::stoul(line);
    UnionVocab v;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line))
        throw std::runtime_error("UnionVocab::read_entries: truncated stream");
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error("UnionVocab::read_entries: malformed line: " +
                                 line);
      v.entries_.push_back(
          {line.substr(0, tab), lang_from_name(line.substr(tab + 1))});
    }
    if (v.entries_.empty() || v.entries_[0].surface != kBlankSurface)
      throw std::runtime_error("UnionVocab::read_entries: missing blank entry");
    v.rebuild_index();
    return v;
  }

  bool operator==(const UnionVocab& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].surface != other.entries_[i].surface ||
          entries_[i].lang != other.entries_[i].lang)
        return false;
    return true;
  }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      auto [it, inserted] = index_.emplace(entries_[i].surface, static_cast<int>(i));
      if (!inserted)
        throw VocabCollisionError({entries_[i].surface});
    }
  }

  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, int> index_;
};

// Bridges text and vocabulary ids. EN tokens go through the BPE model, ZH
// tokens map character-for-character. decode() joins unit surfaces with
// spaces, which is exact whenever EN words are single units (as in the
// synthetic testbed); ZH spacing is immaterial to mixed-token scoring.
struct TextCodec {
  const UnionVocab* vocab = nullptr;
  const BpeModel* en_bpe = nullptr;

  std::vector<int> encode(const Sentence& sent) const {
    std::vector<int> ids;
    for (const auto& tok : sent.tokens) {
      if (tok.lang == Lang::ZH) {
        push_id(ids, tok.surface);
      } else {
        for (const auto& unit : en_bpe->encode_word(tok.surface))
          push_id(ids, unit);
      }
    }
    return ids;
  }

  std::vector<int> encode_text(std::string_view text) const {
    return encode(tokenize_mixed(text));
  }

  std::string decode(const std::vector<int>& ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == vocab->blank_id())
        throw std::invalid_argument("TextCodec::decode: blank in id sequence");
      if (i) out.push_back(' ');
      out += vocab->entry(ids[i]).surface;
    }
    return out;
  }

 private:
  void push_id(std::vector<int>& ids, const std::string& surface) const {
    const int id = vocab->id_of(surface);
    if (id < 0)
      throw std::runtime_error("TextCodec::encode: unit not in vocabulary: '" +
                               surface + "'");
    ids.push_back(id);
  }
};

// --- Plain-text corpora ---------------------------------------------------

// Reads a UTF-8 corpus, one sentence per line; lines tokenize through
// tokenize_mixed. Empty-after-tokenization lines are kept as empty sentences
// so line numbering is stable.
inline std::vector<Sentence> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_corpus: cannot read " + path);
  std::vector<Sentence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(tokenize_mixed(line, path + ":" + std::to_string(++lineno)));
  }
  return out;
}

inline void write_corpus(const std::vector<Sentence>& corpus,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_corpus: cannot write " + path);
  for (const auto& s : corpus) out << s.text() << "\n";
}

}  // namespace cskit

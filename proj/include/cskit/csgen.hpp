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
// Synthetic code-switched text from aligned, POS-tagged parallel pairs.
// A substitution is licensed at a link whose source and target POS tags
// agree; a phrase extends an anchor along consecutive links with no POS
// requirement on the extension. One contiguous substituted region per
// output, and never more than two switch points.

#pragma once

#include <algorithm>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "cskit/align.hpp"
#include "cskit/corpus.hpp"

namespace cskit {

enum class SubKind { Token, Phrase };

inline const char* sub_kind_name(SubKind k) {
  return k == SubKind::Token ? "token" : "phrase";
}

// One generated code-switched sentence. sub_start/sub_len describe the
// replaced region in source-token coordinates.
struct CsSentence {
  std::vector<Token> tokens;
  std::string origin;
  int sub_start = 0;
  int sub_len = 0;
  SubKind kind = SubKind::Token;

  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out.push_back(' ');
      out += tokens[i].surface;
    }
    return out;
  }
};

struct GenConfig {
  enum class Mode { TokenOnly, TokenOrPhrase };
  Mode mode = Mode::TokenOnly;
  int max_outputs_per_pair = std::numeric_limits<int>::max();
  bool pos_match_required = true;
};

// Number of adjacent-token boundaries where the language tag changes.
inline int switch_points(const std::vector<Token>& tokens) {
  if (tokens.empty())
    throw std::invalid_argument("switch_points: empty token list");
  int n = 0;
  for (std::size_t i = 1; i < tokens.size(); ++i)
    if (tokens[i].lang != tokens[i - 1].lang) ++n;
  return n;
}

inline constexpr int kMaxSwitchPoints = 2;

namespace csgen_detail {

inline void require_pos(const ParallelPair& pair) {
  if (pair.src_pos.size() != pair.src.tokens.size() ||
      pair.tgt_pos.size() != pair.tgt.tokens.size())
    throw std::invalid_argument("csgen: pair " + pair.id +
                                " is missing POS tags for one or both sides");
}

// Builds the candidate with src[start .. start+len) replaced by
// tgt[tstart .. tstart+len). Substituted tokens keep the target language tag.
inline CsSentence substitute(const ParallelPair& pair, int start, int tstart,
                             int len, SubKind kind) {
  CsSentence cs;
  cs.origin = pair.id;
  cs.sub_start = start;
  cs.sub_len = len;
  cs.kind = kind;
  cs.tokens.reserve(pair.src.tokens.size());
  for (int i = 0; i < static_cast<int>(pair.src.tokens.size()); ++i) {
    if (i >= start && i < start + len)
      cs.tokens.push_back(pair.tgt.tokens[tstart + (i - start)]);
    else
      cs.tokens.push_back(pair.src.tokens[i]);
  }
  return cs;
}

// Appends cs unless it violates the switch-point cap, duplicates an earlier
// output for this pair, or overflows the per-pair budget.
inline void emit(std::vector<CsSentence>& out, std::set<std::string>& seen,
                 CsSentence cs, const GenConfig& config) {
  if (static_cast<int>(out.size()) >= config.max_outputs_per_pair) return;
  if (switch_points(cs.tokens) > kMaxSwitchPoints) return;
  if (!seen.insert(cs.text()).second) return;
  out.push_back(std::move(cs));
}

}  // namespace csgen_detail

// Single-token substitutions: for each link (i, j) in (i, j) order, if the
// POS tags at i and j agree, emit a copy of the source with token i replaced
// by target token j.
inline std::vector<CsSentence> generate_token_sub(const ParallelPair& pair,
                                                  const GenConfig& config = {}) {
  csgen_detail::require_pos(pair);
  std::vector<std::pair<int, int>> links = pair.links;
  std::sort(links.begin(), links.end());
  std::vector<CsSentence> out;
  std::set<std::string> seen;
  for (const auto& [i, j] : links) {
    if (config.pos_match_required && pair.src_pos[i] != pair.tgt_pos[j]) continue;
    csgen_detail::emit(out, seen,
                       csgen_detail::substitute(pair, i, j, 1, SubKind::Token),
                       config);
  }
  return out;
}

// Token-or-phrase substitutions: every POS-matched link is an anchor. The
// phrase extends the anchor while links (i+1, j+1), (i+2, j+2), ... exist;
// POS tags of the extension tokens are not consulted. Each anchor yields the
// single-token variant and the maximal phrase variant.
inline std::vector<CsSentence> generate_phrase_sub(const ParallelPair& pair,
                                                   const GenConfig& config) {
  if (config.mode != GenConfig::Mode::TokenOrPhrase)
    throw std::invalid_argument(
        "generate_phrase_sub: config.mode must be token-or-phrase");
  csgen_detail::require_pos(pair);
  std::vector<std::pair<int, int>> links = pair.links;
  std::sort(links.begin(), links.end());
  std::set<std::pair<int, int>> link_set(links.begin(), links.end());
  const int n_src = static_cast<int>(pair.src.tokens.size());
  const int n_tgt = static_cast<int>(pair.tgt.tokens.size());

  std::vector<CsSentence> out;
  std::set<std::string> seen;
  for (const auto& [i, j] : links) {
    if (config.pos_match_required && pair.src_pos[i] != pair.tgt_pos[j]) continue;
    csgen_detail::emit(out, seen,
                       csgen_detail::substitute(pair, i, j, 1, SubKind::Token),
                       config);
    int len = 1;
    while (i + len < n_src && j + len < n_tgt &&
           link_set.count({i + len, j + len}))
      ++len;
    if (len > 1)
      csgen_detail::emit(
          out, seen, csgen_detail::substitute(pair, i, j, len, SubKind::Phrase),
          config);
  }
  return out;
}

// Dispatch on mode; token-only mode output is a subset of token-or-phrase
// mode output for the same pair.
inline std::vector<CsSentence> generate_cs(const ParallelPair& pair,
                                           const GenConfig& config) {
  if (config.mode == GenConfig::Mode::TokenOnly)
    return generate_token_sub(pair, config);
  return generate_phrase_sub(pair, config);
}

}  // namespace cskit

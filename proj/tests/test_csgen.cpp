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

#include <set>

#include "cskit/csgen.hpp"

using namespace cskit;

namespace {

// ZH source "一 二 三" and EN target "one two three" with identity links.
ParallelPair identity_pair(std::vector<std::string> src_pos,
                           std::vector<std::string> tgt_pos) {
  ParallelPair p;
  p.id = "pair0";
  p.src = tokenize_mixed("\xe4\xb8\x80 \xe4\xba\x8c \xe4\xb8\x89");
  p.tgt = tokenize_mixed("one two three");
  p.src_pos = std::move(src_pos);
  p.tgt_pos = std::move(tgt_pos);
  p.links = {{0, 0}, {1, 1}, {2, 2}};
  return p;
}

std::set<std::string> texts(const std::vector<CsSentence>& out) {
  std::set<std::string> t;
  for (const auto& cs : out) t.insert(cs.text());
  return t;
}

}  // namespace

TEST_CASE("switch_points counts language boundaries") {
  CHECK(switch_points(tokenize_mixed("a b c").tokens) == 0);
  CHECK(switch_points(tokenize_mixed("\xe4\xb8\x80 a \xe4\xba\x8c").tokens) == 2);
  CHECK(switch_points(tokenize_mixed("\xe4\xb8\x80 \xe4\xba\x8c a").tokens) == 1);
  CHECK(switch_points(tokenize_mixed("a").tokens) == 0);
  CHECK_THROWS_AS(switch_points({}), std::invalid_argument);
}

TEST_CASE("token substitution honors the POS gate") {
  // Positions 0 and 2 agree, position 1 does not.
  const ParallelPair pair =
      identity_pair({"c0", "c1", "c2"}, {"c0", "cX", "c2"});
  const auto out = generate_token_sub(pair);
  REQUIRE(out.size() == 2);
  CHECK(out[0].text() == "one \xe4\xba\x8c \xe4\xb8\x89");
  CHECK(out[1].text() == "\xe4\xb8\x80 \xe4\xba\x8c three");
  for (const auto& cs : out) {
    CHECK(cs.kind == SubKind::Token);
    CHECK(cs.sub_len == 1);
    CHECK(cs.origin == "pair0");
  }

  GenConfig no_gate;
  no_gate.pos_match_required = false;
  CHECK(generate_token_sub(pair, no_gate).size() == 3);
}

TEST_CASE("substitutions require POS tags") {
  ParallelPair pair = identity_pair({"c0", "c1", "c2"}, {"c0", "c1", "c2"});
  pair.src_pos.pop_back();
  CHECK_THROWS_AS(generate_token_sub(pair), std::invalid_argument);
}

TEST_CASE("phrase substitution extends along consecutive links") {
  // Anchor 0 passes the gate; the extension ignores POS on later positions.
  const ParallelPair pair =
      identity_pair({"c0", "c1", "c2"}, {"c0", "cX", "cY"});
  GenConfig cfg;
  cfg.mode = GenConfig::Mode::TokenOrPhrase;
  const auto out = generate_cs(pair, cfg);
  const auto got = texts(out);
  CHECK(got.count("one \xe4\xba\x8c \xe4\xb8\x89") == 1);
  CHECK(got.count("one two three") == 1);  // maximal run from anchor 0
  bool has_phrase = false;
  for (const auto& cs : out)
    if (cs.kind == SubKind::Phrase) {
      has_phrase = true;
      CHECK(cs.sub_len > 1);
    }
  CHECK(has_phrase);
}

TEST_CASE("token-only output is a subset of token-or-phrase output") {
  const ParallelPair pair =
      identity_pair({"c0", "c1", "c0"}, {"c0", "c1", "c0"});
  GenConfig token_cfg;
  GenConfig both_cfg;
  both_cfg.mode = GenConfig::Mode::TokenOrPhrase;
  const auto token_set = texts(generate_cs(pair, token_cfg));
  const auto both_set = texts(generate_cs(pair, both_cfg));
  for (const auto& t : token_set) CHECK(both_set.count(t) == 1);
  CHECK(both_set.size() >= token_set.size());
}

TEST_CASE("generation deduplicates repeated surfaces") {
  // Both source positions hold the same character, aligned to the same word:
  // the two single-token substitutions render identically.
  ParallelPair p;
  p.id = "dup";
  p.src = tokenize_mixed("\xe4\xb8\x80 \xe4\xb8\x80");
  p.tgt = tokenize_mixed("one one");
  p.src_pos = {"c0", "c0"};
  p.tgt_pos = {"c0", "c0"};
  p.links = {{0, 0}, {1, 1}};
  const auto out = generate_token_sub(p);
  const auto t = texts(out);
  CHECK(out.size() == t.size());
  CHECK(t.count("one \xe4\xb8\x80") == 1);
  CHECK(t.count("\xe4\xb8\x80 one") == 1);
}

TEST_CASE("per-pair output budget is enforced") {
  const ParallelPair pair =
      identity_pair({"c0", "c1", "c2"}, {"c0", "c1", "c2"});
  GenConfig cfg;
  cfg.max_outputs_per_pair = 1;
  CHECK(generate_cs(pair, cfg).size() == 1);
}

TEST_CASE("every generated sentence respects the switch-point cap") {
  const ParallelPair pair =
      identity_pair({"c0", "c1", "c2"}, {"c0", "c1", "c2"});
  for (auto mode :
       {GenConfig::Mode::TokenOnly, GenConfig::Mode::TokenOrPhrase}) {
    GenConfig cfg;
    cfg.mode = mode;
    for (const auto& cs : generate_cs(pair, cfg))
      CHECK(switch_points(cs.tokens) <= kMaxSwitchPoints);
  }
}

TEST_CASE("substituted tokens carry the target language tag") {
  const ParallelPair pair =
      identity_pair({"c0", "c1", "c2"}, {"c0", "c1", "c2"});
  for (const auto& cs : generate_token_sub(pair)) {
    REQUIRE(cs.sub_len == 1);
    CHECK(cs.tokens[cs.sub_start].lang == Lang::EN);
    for (int i = 0; i < static_cast<int>(cs.tokens.size()); ++i)
      if (i != cs.sub_start) CHECK(cs.tokens[i].lang == Lang::ZH);
  }
}

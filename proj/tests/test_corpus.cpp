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

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "cskit/corpus.hpp"

using namespace cskit;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() /
          (std::string("cskit_corpus_") + name))
      .string();
}

}  // namespace

TEST_CASE("tokenize_mixed splits Latin words and CJK characters") {
  const Sentence s = tokenize_mixed("hello \xe4\xbd\xa0\xe5\xa5\xbd world");
  REQUIRE(s.tokens.size() == 4);
  CHECK(s.tokens[0] == Token{"hello", Lang::EN});
  CHECK(s.tokens[1] == Token{"\xe4\xbd\xa0", Lang::ZH});
  CHECK(s.tokens[2] == Token{"\xe5\xa5\xbd", Lang::ZH});
  CHECK(s.tokens[3] == Token{"world", Lang::EN});
}

TEST_CASE("tokenize_mixed handles embedded scripts without spaces") {
  const Sentence s = tokenize_mixed("ab\xe4\xb8\x80" "cd");
  // A CJK character breaks a Latin run even with no whitespace.
  REQUIRE(s.tokens.size() == 3);
  CHECK(s.tokens[0] == Token{"ab", Lang::EN});
  CHECK(s.tokens[1] == Token{"\xe4\xb8\x80", Lang::ZH});
  CHECK(s.tokens[2] == Token{"cd", Lang::EN});
}

TEST_CASE("tokenize_mixed strips punctuation and collapses whitespace") {
  const Sentence s = tokenize_mixed("  hello,  world!  ");
  REQUIRE(s.tokens.size() == 2);
  CHECK(s.tokens[0].surface == "hello");
  CHECK(s.tokens[1].surface == "world");
  CHECK(tokenize_mixed("").tokens.empty());
  CHECK(tokenize_mixed("  ,.  ").tokens.empty());
}

TEST_CASE("Sentence text joins with single spaces") {
  const Sentence s = tokenize_mixed("a  b   c");
  CHECK(s.text() == "a b c");
}

TEST_CASE("BPE learns the most frequent pair first") {
  // "aa" occurs twice, "ab" once: the only requested merge must be (a, a).
  const BpeModel model = train_bpe({tokenize_mixed("aa ab aa")}, 1);
  REQUIRE(model.merges.size() == 1);
  CHECK(model.merges[0] == std::pair<std::string, std::string>("a", "a"));
  CHECK(model.encode_word("aa") == std::vector<std::string>{"aa"});
  CHECK(model.encode_word("ab") == std::vector<std::string>{"a", "b"});
  // Merges apply left to right.
  CHECK(model.encode_word("aaa") == std::vector<std::string>{"aa", "a"});
}

TEST_CASE("BPE merge count is capped by available pairs") {
  const BpeModel model = train_bpe({tokenize_mixed("ab ab")}, 100);
  CHECK(model.merges.size() == 1);  // "ab" fully merged, nothing left
  CHECK(model.encode_word("ab") == std::vector<std::string>{"ab"});
}

TEST_CASE("BPE training rejects bad input") {
  CHECK_THROWS_AS(train_bpe({}, 1), std::invalid_argument);
  CHECK_THROWS_AS(train_bpe({tokenize_mixed("ab")}, -1), std::invalid_argument);
}

TEST_CASE("BPE model round-trips through disk") {
  const BpeModel model = train_bpe({tokenize_mixed("ba de ki ba")}, 3);
  const std::string path = temp_path("bpe.model");
  save_bpe(model, path);
  const BpeModel loaded = load_bpe(path);
  CHECK(loaded.merges == model.merges);
  CHECK(loaded.base_symbols == model.base_symbols);
  std::remove(path.c_str());
}

TEST_CASE("unit_inventory contains bases and merge products") {
  const BpeModel model = train_bpe({tokenize_mixed("aa ab aa")}, 1);
  const auto inv = model.unit_inventory();
  CHECK(std::count(inv.begin(), inv.end(), "a") == 1);
  CHECK(std::count(inv.begin(), inv.end(), "b") == 1);
  CHECK(std::count(inv.begin(), inv.end(), "aa") == 1);
  CHECK(std::is_sorted(inv.begin(), inv.end()));
}

TEST_CASE("UnionVocab reserves blank at index 0 and sorts units") {
  const BpeModel bpe = train_bpe({tokenize_mixed("ba de")}, 2);
  const UnionVocab vocab =
      UnionVocab::build(bpe, {"\xe4\xbd\xa0", "\xe5\xa5\xbd", "\xe4\xbd\xa0"});
  CHECK(vocab.blank_id() == 0);
  CHECK(vocab.entry(0).surface == UnionVocab::kBlankSurface);
  // ZH duplicates collapse; all unit surfaces resolvable, blank is not.
  CHECK(vocab.id_of(UnionVocab::kBlankSurface) == -1);
  CHECK(vocab.id_of("\xe4\xbd\xa0") > 0);
  CHECK(vocab.id_of("missing") == -1);
  for (int i = 2; i < vocab.size(); ++i)
    CHECK(vocab.entry(i - 1).surface < vocab.entry(i).surface);
}

TEST_CASE("UnionVocab reports cross-language surface collisions") {
  const BpeModel bpe = train_bpe({tokenize_mixed("ab")}, 0);  // units a, b
  try {
    UnionVocab::build(bpe, {"a"});
    FAIL("expected VocabCollisionError");
  } catch (const VocabCollisionError& e) {
    REQUIRE(e.collisions() == std::vector<std::string>{"a"});
  }
}

TEST_CASE("UnionVocab round-trips through disk and streams") {
  const BpeModel bpe = train_bpe({tokenize_mixed("ba de ki")}, 3);
  const UnionVocab vocab = UnionVocab::build(bpe, {"\xe4\xb8\x80"});
  const std::string path = temp_path("vocab.txt");
  vocab.save(path);
  CHECK(UnionVocab::load(path) == vocab);
  std::remove(path.c_str());

  std::stringstream ss;
  vocab.write_entries(ss);
  CHECK(UnionVocab::read_entries(ss) == vocab);
}

TEST_CASE("TextCodec encodes and decodes mixed text") {
  const BpeModel bpe = train_bpe({tokenize_mixed("ba de")}, 2);
  const UnionVocab vocab = UnionVocab::build(bpe, {"\xe4\xbd\xa0"});
  const TextCodec codec{&vocab, &bpe};
  const auto ids = codec.encode_text("ba \xe4\xbd\xa0 de");
  REQUIRE(ids.size() == 3);
  for (int id : ids) CHECK(id != vocab.blank_id());
  CHECK(codec.decode(ids) == "ba \xe4\xbd\xa0 de");
  CHECK_THROWS_AS(codec.decode({vocab.blank_id()}), std::invalid_argument);
  CHECK_THROWS_AS(codec.encode_text("zz"), std::runtime_error);
}

TEST_CASE("read_corpus keeps line numbering stable") {
  const std::string path = temp_path("corpus.txt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "ba de\n\n\xe4\xbd\xa0\n";
  }
  const auto corpus = read_corpus(path);
  REQUIRE(corpus.size() == 3);
  CHECK(corpus[0].tokens.size() == 2);
  CHECK(corpus[1].tokens.empty());
  CHECK(corpus[2].tokens.size() == 1);
  write_corpus(corpus, path);
  const auto again = read_corpus(path);
  REQUIRE(again.size() == 3);
  CHECK(again[0].text() == corpus[0].text());
  std::remove(path.c_str());
}

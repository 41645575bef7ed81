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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#ifdef __unix__
#include <sys/wait.h>
#endif

#include "cskit/pipeline.hpp"

using namespace cskit;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cskit_pipe_" + name))
      .string();
}

ScenarioConfig tiny_scenario(std::uint64_t seed = 3) {
  ScenarioConfig cfg;
  cfg.world.vocab_size = 8;
  cfg.world.feature_dim = 4;
  cfg.supervised_per_lang = 5;
  cfg.unlabeled_per_lang = 4;
  cfg.test_mono_per_lang = 3;
  cfg.test_cs = 20;
  cfg.parallel_pairs = 6;
  cfg.seed = seed;
  return cfg;
}

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run_cli(const std::string& bin, const std::string& args) {
  const std::string out_path = temp_path("cli_out.txt");
  const std::string cmd = bin + " " + args + " >" + out_path + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CliResult res;
#ifdef __unix__
  if (WIFEXITED(status)) res.code = WEXITSTATUS(status);
#else
  res.code = status;
#endif
  std::ifstream in(out_path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  res.out = buf.str();
  std::remove(out_path.c_str());
  return res;
}

}  // namespace

TEST_CASE("examples round-trip through JSON") {
  Example ex;
  ex.id = "utt-7";
  ex.lang = Lang::ZH;
  ex.transcript = "\xe4\xbd\xa0 hello";
  ex.features = FeatureSequence(2, 3);
  ex.features << 0.5, -1.25, 3.0, 1.0 / 3.0, 2.0, -7.5;
  const std::string dumped = example_to_json(ex).dump();
  const Example back = example_from_json(nlohmann::json::parse(dumped));
  CHECK(back.id == ex.id);
  CHECK(back.lang == ex.lang);
  CHECK(back.transcript == ex.transcript);
  REQUIRE(back.features.rows() == 2);
  CHECK(back.features == ex.features);  // doubles survive the text round trip
}

TEST_CASE("ragged feature rows are rejected") {
  const auto j = nlohmann::json::parse(
      R"({"id":"x","lang":"EN","transcript":"a","features":[[1,2],[3]]})");
  CHECK_THROWS_AS(example_from_json(j), std::runtime_error);
}

TEST_CASE("datasets round-trip through JSON lines") {
  Dataset data;
  for (int i = 0; i < 3; ++i) {
    Example ex;
    ex.id = "u" + std::to_string(i);
    ex.lang = i % 2 ? Lang::EN : Lang::ZH;
    ex.transcript = "t" + std::to_string(i);
    ex.features = FeatureSequence::Constant(2, 2, 0.5 * i);
    data.push_back(std::move(ex));
  }
  const std::string path = temp_path("data.jsonl");
  save_dataset_jsonl(data, path);
  const Dataset back = load_dataset_jsonl(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].id == data[i].id);
    CHECK(back[i].lang == data[i].lang);
    CHECK(back[i].features == data[i].features);
  }
  CHECK_THROWS_AS(load_dataset_jsonl(temp_path("missing.jsonl")),
                  std::runtime_error);
}

TEST_CASE("malformed JSON lines report their line number") {
  const std::string path = temp_path("bad.jsonl");
  std::ofstream(path) << R"({"id":"a","lang":"EN","transcript":"","features":[]})"
                      << "\n"
                      << "{not json\n";
  try {
    load_dataset_jsonl(path);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("line IO round-trips and strips carriage returns") {
  const std::string path = temp_path("lines.txt");
  write_lines({"alpha", "", "beta"}, path);
  CHECK(read_lines(path) == std::vector<std::string>{"alpha", "", "beta"});
  std::ofstream(path, std::ios::binary) << "a\r\nb\n";
  CHECK(read_lines(path) == std::vector<std::string>{"a", "b"});
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_lines(temp_path("missing.txt")), std::runtime_error);
}

TEST_CASE("scenarios are deterministic in their seed") {
  const Scenario a = make_scenario(tiny_scenario());
  const Scenario b = make_scenario(tiny_scenario());
  REQUIRE(a.supervised.size() == b.supervised.size());
  for (std::size_t i = 0; i < a.supervised.size(); ++i) {
    CHECK(a.supervised[i].transcript == b.supervised[i].transcript);
    CHECK(a.supervised[i].features == b.supervised[i].features);
    CHECK(a.supervised[i].tokens == b.supervised[i].tokens);
  }
  const Scenario c = make_scenario(tiny_scenario(4));
  bool any_diff = false;
  for (std::size_t i = 0; i < a.supervised.size(); ++i)
    any_diff |= a.supervised[i].transcript != c.supervised[i].transcript;
  CHECK(any_diff);
}

TEST_CASE("supervised data is monolingual, EN block then ZH block") {
  const ScenarioConfig cfg = tiny_scenario();
  const Scenario sc = make_scenario(cfg);
  REQUIRE(sc.supervised.size() ==
          static_cast<std::size_t>(2 * cfg.supervised_per_lang));
  for (int i = 0; i < 2 * cfg.supervised_per_lang; ++i) {
    const Example& ex = sc.supervised[i];
    const Lang expected =
        i < cfg.supervised_per_lang ? Lang::EN : Lang::ZH;
    CHECK(ex.lang == expected);
    for (const auto& tok : tokenize_mixed(ex.transcript).tokens)
      CHECK(tok.lang == expected);
    CHECK(!ex.tokens.empty());  // encode_dataset ran
  }
}

TEST_CASE("code-switched test utterances are mostly single substitutions") {
  const ScenarioConfig cfg = tiny_scenario();
  const Scenario sc = make_scenario(cfg);
  REQUIRE(sc.test_cs.size() == static_cast<std::size_t>(cfg.test_cs));
  int single = 0;
  for (const Example& ex : sc.test_cs) {
    const Sentence s = tokenize_mixed(ex.transcript);
    int en = 0, switches = 0;
    for (std::size_t k = 0; k < s.tokens.size(); ++k) {
      en += s.tokens[k].lang == Lang::EN ? 1 : 0;
      if (k > 0 && s.tokens[k].lang != s.tokens[k - 1].lang) ++switches;
    }
    REQUIRE(en >= 1);
    CHECK(switches <= 2);
    single += en == 1 ? 1 : 0;
  }
  CHECK(single * 2 >= cfg.test_cs);  // at least half
}

TEST_CASE("dataset helpers filter and point without copying examples") {
  const Scenario sc = make_scenario(tiny_scenario());
  const auto ptrs = dataset_ptrs(sc.supervised);
  REQUIRE(ptrs.size() == sc.supervised.size());
  CHECK(ptrs.front() == &sc.supervised.front());
  const Dataset en = filter_lang(sc.supervised, Lang::EN);
  const Dataset zh = filter_lang(sc.supervised, Lang::ZH);
  CHECK(en.size() + zh.size() == sc.supervised.size());
  for (const auto& ex : en) CHECK(ex.lang == Lang::EN);
}

TEST_CASE("experiment reports render to stable JSON") {
  ExperimentReport r;
  r.seed = 9;
  r.align_ll = {-5.0, -4.5};
  r.cs_generated = 17;
  r.baseline_cs = 0.25;
  r.recall.push_back({10, 40, 0.9, 0.3, 0.4, 0.6});
  const auto j = experiment_report_json(r);
  CHECK(j["seed"] == 9);
  CHECK(j["mer"]["baseline_cs"] == 0.25);
  CHECK(j["recall"][0]["top_n"] == 10);
  CHECK(j.dump() == experiment_report_json(r).dump());
}

TEST_CASE("the command-line tool reports usage, runtime, and success codes") {
  const char* bin = std::getenv("CSKIT_BIN");
  if (bin == nullptr || std::string(bin).empty())
    SKIP("CSKIT_BIN not set");

  const std::string ref = temp_path("ref.txt");
  const std::string hyp = temp_path("hyp.txt");
  write_lines({"ba de", "\xe4\xbd\xa0 \xe5\xa5\xbd"}, ref);
  write_lines({"ba de", "\xe4\xbd\xa0 \xe5\xa5\xbd"}, hyp);

  const CliResult ok =
      run_cli(bin, "score-mer --ref " + ref + " --hyp " + hyp);
  CHECK(ok.code == 0);
  CHECK(ok.out.find("mer 0") == 0);

  CHECK(run_cli(bin, "--help").code == 0);
  CHECK(run_cli(bin, "").code == 2);  // a subcommand is required
  CHECK(run_cli(bin, "tokenize --definitely-not-a-flag x").code == 2);
  CHECK(run_cli(bin, "score-mer --ref " + ref + " --hyp " +
                         temp_path("missing_hyp.txt"))
            .code == 1);

  std::remove(ref.c_str());
  std::remove(hyp.c_str());
}

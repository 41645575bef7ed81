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
// Word alignment between parallel sentences: an IBM-Model-2-style EM with a
// diagonal position prior. One direction only (each target position picks a
// source position or null); no symmetrization.

#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cskit/common.hpp"
#include "cskit/corpus.hpp"

namespace cskit {

// A tokenized source/target pair with optional POS tags and alignment links.
// Links are (source index, target index) pairs, at most one per target
// position once aligned.
struct ParallelPair {
  Sentence src, tgt;
  std::vector<std::string> src_pos, tgt_pos;
  std::vector<std::pair<int, int>> links;
  std::string id;
};

struct AlignerConfig {
  double diagonal_tension = 4.0;  // fixed, not re-estimated
  double null_prob = 0.08;
  int threads = 1;
};

struct AlignDiagnostics {
  long long skipped_empty_pairs = 0;
  long long unseen_target_words = 0;
};

// Unnormalized diagonal weight for source position i (1-based) of n and
// target position j (1-based) of m.
inline double diagonal_weight(int i, int j, int n, int m, double tension) {
  return std::exp(-tension * std::abs(static_cast<double>(i) / n -
                                      static_cast<double>(j) / m));
}

// Lexical translation table t(src | tgt) with the diagonal position prior.
// For every target word the probabilities over its candidate source words
// (including the null word) sum to one.
class AlignmentModel {
 public:
  static constexpr const char* kNullWord = "<eps>";

  double diagonal_tension = 4.0;
  double null_prob = 0.08;

  // Ordered maps keep summation and serialization order fixed, which makes
  // training bit-deterministic.
  std::map<std::string, std::map<std::string, double>> ttable;

  bool has_target(const std::string& tgt_word) const {
    return ttable.count(tgt_word) != 0;
  }

  double prob(const std::string& src_word, const std::string& tgt_word) const {
    auto row = ttable.find(tgt_word);
    if (row == ttable.end()) return 0.0;
    auto it = row->second.find(src_word);
    if (it == row->second.end()) return 0.0;
    return std::max(it->second, kProbFloor);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("AlignmentModel::save: cannot write " + path);
    out << "cskit ttable 1\n";
    out << std::hexfloat;
    out << "tension " << diagonal_tension << "\n";
    out << "null_prob " << null_prob << "\n";
    for (const auto& [tgt, row] : ttable)
      for (const auto& [src, p] : row)
        out << tgt << "\t" << src << "\t" << p << "\n";
  }

  static AlignmentModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("AlignmentModel::load: cannot read " + path);
    std::string line;
    std::getline(in, line);
    if (line != "cskit ttable 1")
      throw std::runtime_error("AlignmentModel::load: bad header in " + path);
    AlignmentModel model;
    std::string key;
    in >> key >> line;
    if (key != "tension") throw std::runtime_error("AlignmentModel::load: bad file");
    model.diagonal_tension = std::strtod(line.c_str(), nullptr);
    in >> key >> line;
    if (key != "null_prob") throw std::runtime_error("AlignmentModel::load: bad file");
    model.null_prob = std::strtod(line.c_str(), nullptr);
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string tgt, src, val;
      if (!std::getline(ls, tgt, '\t') || !std::getline(ls, src, '\t') ||
          !std::getline(ls, val))
        throw std::runtime_error("AlignmentModel::load: malformed line");
      model.ttable[tgt][src] = std::strtod(val.c_str(), nullptr);
    }
    return model;
  }
};

struct AlignTrainResult {
  AlignmentModel model;
  std::vector<double> log_likelihood;  // one entry per EM iteration
  AlignDiagnostics diagnostics;
};

// EM training. Expected corpus log-likelihood is recorded before each
// count update, so the returned sequence is non-decreasing. Deterministic
// given the corpus order; the E-step is chunk-parallel with a fixed chunk
// size and in-order merge, so results do not depend on the thread count.
inline AlignTrainResult train_aligner(const std::vector<ParallelPair>& pairs,
                                      int iterations,
                                      const AlignerConfig& config = {}) {
  if (pairs.empty()) throw std::invalid_argument("train_aligner: no pairs");
  if (iterations < 1)
    throw std::invalid_argument("train_aligner: iterations must be >= 1");

  AlignTrainResult result;
  AlignmentModel& model = result.model;
  model.diagonal_tension = config.diagonal_tension;
  model.null_prob = config.null_prob;

  std::vector<const ParallelPair*> usable;
  for (const auto& p : pairs) {
    if (p.src.empty() || p.tgt.empty()) {
      ++result.diagnostics.skipped_empty_pairs;
      continue;
    }
    usable.push_back(&p);
  }
  if (usable.empty())
    throw std::invalid_argument("train_aligner: all pairs have an empty side");

  // Initialization: uniform over the co-occurring source candidates (plus
  // null) of each target word.
  for (const ParallelPair* p : usable) {
    for (const auto& t : p->tgt.tokens) {
      auto& row = model.ttable[t.surface];
      row.emplace(AlignmentModel::kNullWord, 0.0);
      for (const auto& s : p->src.tokens) row.emplace(s.surface, 0.0);
    }
  }
  for (auto& [tgt, row] : model.ttable) {
    const double u = 1.0 / static_cast<double>(row.size());
    for (auto& [src, p] : row) p = u;
  }

  using CountTable = std::map<std::string, std::map<std::string, double>>;

  const double p0 = config.null_prob;
  const double p1 = 1.0 - p0;
  const double tension = config.diagonal_tension;

  // E-step over one chunk of pairs; accumulates counts and log-likelihood.
  auto estep_chunk = [&](std::size_t begin, std::size_t end, CountTable* counts,
                         double* ll) {
    std::vector<double> probs;
    for (std::size_t k = begin; k < end; ++k) {
      const ParallelPair& p = *usable[k];
      const int n = static_cast<int>(p.src.tokens.size());
      const int m = static_cast<int>(p.tgt.tokens.size());
      for (int j = 1; j <= m; ++j) {
        const std::string& f = p.tgt.tokens[j - 1].surface;
        probs.assign(n + 1, 0.0);
        double z = 0.0;
        for (int i = 1; i <= n; ++i) z += diagonal_weight(i, j, n, m, tension);
        double sum = 0.0;
        probs[0] = p0 * model.prob(AlignmentModel::kNullWord, f);
        sum += probs[0];
        for (int i = 1; i <= n; ++i) {
          const double prior = p1 * diagonal_weight(i, j, n, m, tension) / z;
          probs[i] = prior * model.prob(p.src.tokens[i - 1].surface, f);
          sum += probs[i];
        }
        *ll += std::log(std::max(sum, kProbFloor));
        if (sum <= 0.0) continue;
        (*counts)[f][AlignmentModel::kNullWord] += probs[0] / sum;
        for (int i = 1; i <= n; ++i)
          (*counts)[f][p.src.tokens[i - 1].surface] += probs[i] / sum;
      }
    }
  };

  const std::size_t kChunk = 256;  // fixed so thread count cannot change sums
  const std::size_t n_chunks = (usable.size() + kChunk - 1) / kChunk;
  const int threads = std::max(1, config.threads);

  for (int iter = 0; iter < iterations; ++iter) {
    std::vector<CountTable> chunk_counts(n_chunks);
    std::vector<double> chunk_ll(n_chunks, 0.0);

    if (threads == 1 || n_chunks == 1) {
      for (std::size_t c = 0; c < n_chunks; ++c)
        estep_chunk(c * kChunk, std::min(usable.size(), (c + 1) * kChunk),
                    &chunk_counts[c], &chunk_ll[c]);
    } else {
      std::vector<std::thread> pool;
      std::size_t next_chunk = 0;
      std::mutex mu;
      for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
          for (;;) {
            std::size_t c;
            {
              std::lock_guard<std::mutex> lock(mu);
              if (next_chunk >= n_chunks) return;
              c = next_chunk++;
            }
            estep_chunk(c * kChunk, std::min(usable.size(), (c + 1) * kChunk),
                        &chunk_counts[c], &chunk_ll[c]);
          }
        });
      }
      for (auto& t : pool) t.join();
    }

    // In-order merge keeps floating point sums identical across runs.
    CountTable counts;
    double ll = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
      ll += chunk_ll[c];
      for (const auto& [tgt, row] : chunk_counts[c])
        for (const auto& [src, v] : row) counts[tgt][src] += v;
    }
    result.log_likelihood.push_back(ll);

    // M-step: normalize counts per target word.
    for (auto& [tgt, row] : model.ttable) {
      auto crow = counts.find(tgt);
      double total = 0.0;
      if (crow != counts.end())
        for (const auto& [src, v] : crow->second) total += v;
      if (total <= 0.0) continue;
      for (auto& [src, p] : row) {
        auto it = crow->second.find(src);
        p = (it == crow->second.end()) ? 0.0 : it->second / total;
      }
    }
  }
  return result;
}

// Viterbi alignment of one pair under a trained model. For each target
// position the best-scoring source position is linked unless null wins or
// the target word was never seen in training (counted in diagnostics).
// Existing links are discarded. Output links are sorted by target position.
inline ParallelPair align_pair(const AlignmentModel& model, ParallelPair pair,
                               AlignDiagnostics* diag = nullptr) {
  if (pair.src.empty() || pair.tgt.empty())
    throw std::invalid_argument("align_pair: empty side in pair " + pair.id);
  pair.links.clear();
  const int n = static_cast<int>(pair.src.tokens.size());
  const int m = static_cast<int>(pair.tgt.tokens.size());
  const double p0 = model.null_prob;
  const double p1 = 1.0 - p0;
  for (int j = 1; j <= m; ++j) {
    const std::string& f = pair.tgt.tokens[j - 1].surface;
    if (!model.has_target(f)) {
      if (diag) ++diag->unseen_target_words;
      continue;
    }
    double z = 0.0;
    for (int i = 1; i <= n; ++i)
      z += diagonal_weight(i, j, n, m, model.diagonal_tension);
    double best = p0 * model.prob(AlignmentModel::kNullWord, f);
    int best_i = 0;  // null
    for (int i = 1; i <= n; ++i) {
      const double prior = p1 * diagonal_weight(i, j, n, m, model.diagonal_tension) / z;
      const double score = prior * model.prob(pair.src.tokens[i - 1].surface, f);
      if (score > best) {
        best = score;
        best_i = i;
      }
    }
    if (best_i > 0) pair.links.emplace_back(best_i - 1, j - 1);
  }
  return pair;
}

// --- File formats ---------------------------------------------------------

// Parallel corpus: one pair per line, "src tokens ||| tgt tokens".
inline std::vector<ParallelPair> read_parallel_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_parallel_corpus: cannot read " + path);
  std::vector<ParallelPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string delim = " ||| ";
    auto pos = line.find(delim);
    if (pos == std::string::npos)
      throw std::runtime_error("read_parallel_corpus: missing ||| on line " +
                               std::to_string(lineno));
    ParallelPair p;
    p.id = "pair" + std::to_string(lineno);
    p.src = tokenize_mixed(line.substr(0, pos), p.id + ":src");
    p.tgt = tokenize_mixed(line.substr(pos + delim.size()), p.id + ":tgt");
    out.push_back(std::move(p));
  }
  return out;
}

inline void write_parallel_corpus(const std::vector<ParallelPair>& pairs,
                                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_parallel_corpus: cannot write " + path);
  for (const auto& p : pairs)
    out << p.src.text() << " ||| " << p.tgt.text() << "\n";
}

// POS tag file: one line per sentence, space-separated tags, positionally
// aligned with the corresponding corpus side.
inline std::vector<std::vector<std::string>> read_pos_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pos_file: cannot read " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> tags;
    std::istringstream ls(line);
    std::string tag;
    while (ls >> tag) tags.push_back(tag);
    out.push_back(std::move(tags));
  }
  return out;
}

inline void write_pos_file(const std::vector<std::vector<std::string>>& tags,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pos_file: cannot write " + path);
  for (const auto& line : tags) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) out << ' ';
      out << line[i];
    }
    out << "\n";
  }
}

// Attaches POS tag lists to pairs, validating lengths.
inline void attach_pos(std::vector<ParallelPair>& pairs,
                       const std::vector<std::vector<std::string>>& src_pos,
                       const std::vector<std::vector<std::string>>& tgt_pos) {
  if (src_pos.size() != pairs.size() || tgt_pos.size() != pairs.size())
    throw std::invalid_argument("attach_pos: tag file line count mismatch");
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (src_pos[k].size() != pairs[k].src.tokens.size() ||
        tgt_pos[k].size() != pairs[k].tgt.tokens.size())
      throw std::invalid_argument("attach_pos: tag count mismatch in " +
                                  pairs[k].id);
    pairs[k].src_pos = src_pos[k];
    pairs[k].tgt_pos = tgt_pos[k];
  }
}

// Alignment file: one line per pair of space-separated "i-j" links.
inline void write_alignments(const std::vector<ParallelPair>& pairs,
                             const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_alignments: cannot write " + path);
  for (const auto& p : pairs) {
    for (std::size_t k = 0; k < p.links.size(); ++k) {
      if (k) out << ' ';
      out << p.links[k].first << '-' << p.links[k].second;
    }
    out << "\n";
  }
}

inline std::vector<std::vector<std::pair<int, int>>> read_alignments(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_alignments: cannot read " + path);
  std::vector<std::vector<std::pair<int, int>>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::pair<int, int>> links;
    std::istringstream ls(line);
    std::string item;
    while (ls >> item) {
      auto dash = item.find('-');
      if (dash == std::string::npos)
        throw std::runtime_error("read_alignments: malformed link " + item);
      links.emplace_back(std::stoi(item.substr(0, dash)),
                         std::stoi(item.substr(dash + 1)));
    }
    out.push_back(std::move(links));
  }
  return out;
}

inline void attach_alignments(
    std::vector<ParallelPair>& pairs,
    const std::vector<std::vector<std::pair<int, int>>>& links) {
  if (links.size() != pairs.size())
    throw std::invalid_argument("attach_alignments: line count mismatch");
  for (std::size_t k = 0; k < pairs.size(); ++k) pairs[k].links = links[k];
}

}  // namespace cskit

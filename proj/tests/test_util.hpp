// Copyright 2026 The Anaforge Authors.
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

#pragma once

#include <unistd.h>

#include <filesystem>
#include <set>
#include <sstream>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "anaforge/corpus.hpp"
#include "anaforge/embeddings.hpp"
#include "anaforge/nn/tensor.hpp"

namespace testing_util {

inline std::string data_path(const std::string &rel) { return std::string(ANAFORGE_DATA_DIR) + "/" + rel; }

inline std::vector<std::pair<std::string, anaforge::FormatError::Kind>> malformed_fixtures() {
  using K = anaforge::FormatError::Kind;
  return {
      {"wrong_column_count.conll", K::kMalformedRow},
      {"unclosed_mention.conll", K::kUnbalancedBrackets},
      {"stray_close.conll", K::kUnbalancedBrackets},
      {"duplicate_mention.conll", K::kDuplicateMentionId},
      {"unknown_bridging_antecedent.conll", K::kUnknownMention},
      {"missing_end.conll", K::kMalformedRow},
      {"token_index_gap.conll", K::kInvalidDocument},
  };
}

// A scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("anaforge_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  std::string file(const std::string &name) const { return (path_ / name).string(); }
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Random but valid document exercising every annotation layer.
inline anaforge::Document random_document(anaforge::nn::Rng &rng, const std::string &id) {
  using namespace anaforge;
  static const std::vector<std::string> words = {"the", "cat", "it", "that", "ran", ".", "Mary", "?", "box"};
  Document d;
  d.id = id;
  size_t n = rng.below(13);
  size_t utt = 0;
  for (size_t i = 0; i < n; ++i) {
    if (i > 0 && rng.uniform() < 0.2) ++utt;
    d.tokens.push_back(Token{id, i, words[rng.below(words.size())], rng.uniform() < 0.5 ? "A" : "B", utt, 1,
                             rng.uniform() < 0.8 ? "_" : "k=v"});
  }
  if (n == 0) return d;
  size_t mentions = rng.below(6);
  for (size_t k = 0; k < mentions; ++k) {
    Mention m;
    m.id = "m" + std::to_string(k + 1);
    int a = static_cast<int>(rng.below(n)), b = static_cast<int>(rng.below(n));
    m.span = Span{std::min(a, b), std::max(a, b)};
    if (rng.uniform() < 0.7) m.entity = "e" + std::to_string(rng.below(3));
    if (rng.uniform() < 0.5) m.kind = static_cast<AnaphorKind>(rng.below(4));
    if (rng.uniform() < 0.5) m.referring = rng.uniform() < 0.5;
    if (rng.uniform() < 0.5) m.status = rng.uniform() < 0.5 ? DiscourseStatus::kOld : DiscourseStatus::kNew;
    d.mentions.push_back(std::move(m));
  }
  for (const auto &m : d.mentions) {
    if (d.mentions.size() > 1 && rng.uniform() < 0.3) {
      const Mention &other = d.mentions[rng.below(d.mentions.size())];
      if (other.id != m.id) d.bridging.push_back({m.id, other.id});
    }
    if (rng.uniform() < 0.3) {
      // One or two disjoint antecedent spans.
      int a = static_cast<int>(rng.below(n));
      int b = a + static_cast<int>(rng.below(n - static_cast<size_t>(a)));
      d.deixis[m.id].push_back(Span{a, b});
      if (b + 2 < static_cast<int>(n) && rng.uniform() < 0.5) d.deixis[m.id].push_back(Span{b + 2, b + 2});
    }
  }
  d.canonicalize();
  return d;
}

// Store with one random matrix per (name, dim); every token has one
// subtoken except those listed in `wide`, which get two.
inline anaforge::EmbeddingStore synthetic_store(const anaforge::Document &doc,
                                                const std::vector<std::pair<std::string, size_t>> &spaces,
                                                anaforge::nn::Rng &rng, const std::set<size_t> &wide = {}) {
  using namespace anaforge;
  std::vector<SubtokenRange> map;
  size_t rows = 0;
  for (size_t t = 0; t < doc.tokens.size(); ++t) {
    size_t c = wide.count(t) ? 2 : 1;
    map.push_back({rows, c});
    rows += c;
  }
  std::vector<TokenAnnotation> ann(doc.tokens.size(), TokenAnnotation{"NOUN", "NN", "dep", std::nullopt, "x"});
  EmbeddingStore store(doc.id, map, ann);
  for (const auto &[name, dim] : spaces) {
    Matrix m{rows, dim, std::vector<float>(rows * dim)};
    for (float &x : m.data) x = static_cast<float>(rng.normal());
    store.add_space(name, std::move(m), Vec(dim, 0.5));
  }
  return store;
}

// Document from whitespace-separated words; mentions given as
// (start, end, entity) with entity "" meaning none.
inline anaforge::Document make_document(const std::string &id, const std::string &text,
                                        const std::vector<std::tuple<int, int, std::string>> &mentions) {
  using namespace anaforge;
  Document d;
  d.id = id;
  std::istringstream words(text);
  std::string w;
  size_t utt = 0;
  while (words >> w) {
    d.tokens.push_back(Token{id, d.tokens.size(), w, utt % 2 ? "B" : "A", utt, 1, "_"});
    if (w == "." || w == "?") ++utt;
  }
  int k = 1;
  for (const auto &[s, e, ent] : mentions) {
    Mention m;
    m.id = "m" + std::to_string(k++);
    m.span = Span{s, e};
    if (!ent.empty()) m.entity = ent;
    d.mentions.push_back(std::move(m));
  }
  d.canonicalize();
  d.validate();
  return d;
}

}  // namespace testing_util

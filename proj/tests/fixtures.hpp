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

// Small models and documents shared by the unit and acceptance tests.

#pragma once

#include "anaforge/bridging.hpp"
#include "anaforge/dd.hpp"
#include "anaforge/wcs.hpp"
#include "test_util.hpp"

namespace fixtures {

using namespace anaforge;

inline wcs::WcsConfig small_wcs_config(uint64_t seed = 0) {
  wcs::WcsConfig c;
  c.encoders = {{"a", "s1", true, 4, 5, 3}, {"b", "s1", false, 4, 5, 2}, {"c", "s2", false, 3, 4, 2}};
  c.feature_dim = 2;
  c.max_speakers = 2;
  c.scorer_hidden = 4;
  c.referring_hidden = 3;
  c.seed = seed;
  return c;
}

struct DocumentWithStore {
  Document doc;
  EmbeddingStore store;
};

inline DocumentWithStore small_wcs_document(uint64_t seed) {
  Document d = testing_util::make_document(
      "w", "Ann saw Bob . she greeted him . the dog barked at her . it rained .",
      {{0, 0, "e1"}, {2, 2, "e2"}, {4, 4, "e1"}, {6, 6, "e2"}, {8, 9, "e3"}, {12, 12, "e1"}, {14, 14, ""}});
  d.mentions.back().referring = false;
  nn::Rng rng(seed);
  EmbeddingStore s = testing_util::synthetic_store(d, {{"s1", 4}, {"s2", 3}}, rng, {9});
  return {std::move(d), std::move(s)};
}

// Moves every parameter off exact zeros so that no rectifier sits on its
// kink, where finite differences are meaningless.
inline void jitter(nn::ParameterSet &p, uint64_t seed) {
  nn::Rng rng(seed ^ 0x6a17);
  for (auto &t : p.tensors())
    for (double &v : t.value) v += rng.uniform(-0.1, 0.1);
}

// Jitters, redrawing until every rectifier input in the graph built by
// `loss` is at least `margin` from zero. A step of 1e-4 on one weight moves
// a pre-activation by 1e-4 times an input, so 1e-3 keeps the step clear.
template <class Loss>
void jitter_clear_of_kinks(nn::ParameterSet &p, uint64_t seed, Loss loss, double margin = 1e-3) {
  std::vector<nn::Vec> base;
  for (const auto &t : p.tensors()) base.push_back(t.value);
  for (uint64_t attempt = 0; attempt < 100; ++attempt) {
    size_t i = 0;
    for (auto &t : p.tensors()) t.value = base[i++];
    jitter(p, seed + 1000 * attempt);
    nn::Graph g;
    loss(g);
    if (g.kink_margin() >= margin) return;
  }
  throw std::runtime_error("no jitter clear of rectifier kinks");
}

inline dd::DdConfig small_dd_config(uint64_t seed = 0) {
  dd::DdConfig c;
  c.space = "x";
  c.dim = 3;
  c.feature_dim = 2;
  c.pair_dim = 2;
  c.hidden = 3;
  c.type_hidden = 3;
  c.context = 2;
  c.max_span_width = 3;
  c.seed = seed;
  return c;
}

// "that" (4) points back at "we should go"; "it" (12) corefers with
// "the cat"; the final "it" (16) is non-referring.
inline DocumentWithStore small_dd_document(uint64_t seed) {
  Document d = testing_util::make_document(
      "dd", "we should go . that is fine . the cat sat . it slept . it rains .",
      {{4, 4, ""}, {8, 9, "e1"}, {12, 12, "e1"}, {16, 16, ""}});
  for (auto &m : d.mentions) {
    if (m.span.start == 4) {
      m.kind = AnaphorKind::kDiscourseDeixis;
      d.deixis[m.id] = {Span{0, 2}};
    }
    if (m.span.start == 16) m.kind = AnaphorKind::kNonReferential;
  }
  d.validate();
  std::vector<SubtokenRange> map;
  std::vector<TokenAnnotation> ann;
  size_t rows = 0;
  for (size_t t = 0; t < d.tokens.size(); ++t) {
    size_t count = t == 9 ? 2 : 1;
    map.push_back({rows, count});
    rows += count;
    const std::string &w = d.tokens[t].surface;
    std::string pos = w == "." ? "PUNCT" : is_pronoun(w) ? "PRON" : w == "the" ? "DET" : "VERB";
    std::optional<size_t> parent;
    if (t + 1 < d.tokens.size() && w != ".") parent = t + 1;
    ann.push_back(TokenAnnotation{pos, "", pos == "PRON" ? "nsubj" : "dep", parent, w});
  }
  EmbeddingStore s(d.id, map, ann);
  nn::Rng rng(seed);
  Matrix m{rows, 3, std::vector<float>(rows * 3)};
  for (float &x : m.data) x = static_cast<float>(rng.normal());
  s.add_space("x", std::move(m));
  s.add_constituent(Span{0, 2}, ConstituentType::kVerbal);
  s.add_constituent(Span{8, 9}, ConstituentType::kNominal);
  return {std::move(d), std::move(s)};
}

inline std::vector<dd::Example> small_dd_examples(uint64_t seed, const dd::DdConfig &cfg) {
  DocumentWithStore f = small_dd_document(seed);
  return dd::prepare_document(f.doc, f.store, cfg, true).examples;
}

inline bridging::BridgingConfig small_bridging_config(uint64_t seed = 0) {
  bridging::BridgingConfig c;
  c.space = "x";
  c.dim = 3;
  c.feature_dim = 2;
  c.hidden = 3;
  c.seed = seed;
  return c;
}

// "the door" bridges to "the house", "its engine" to "the car"; "wooden"
// has two subtokens.
inline DocumentWithStore small_bridging_document(uint64_t seed) {
  Document d = testing_util::make_document(
      "br", "the house was old . the wooden door creaked . Ann saw the car . its engine ran .",
      {{0, 1, "e1"}, {5, 7, "e2"}, {10, 10, "e3"}, {12, 13, "e4"}, {15, 15, "e4"}, {15, 16, "e5"}});
  auto id = [&](int start, int end) { return d.find_mention(Span{start, end})->id; };
  d.bridging = {{id(5, 7), id(0, 1)}, {id(15, 16), id(12, 13)}};
  d.canonicalize();
  d.validate();
  nn::Rng rng(seed);
  EmbeddingStore s = testing_util::synthetic_store(d, {{"x", 3}}, rng, {6});
  return {std::move(d), std::move(s)};
}

inline std::vector<bridging::Example> small_bridging_examples(uint64_t seed, const bridging::BridgingConfig &cfg) {
  DocumentWithStore f = small_bridging_document(seed);
  return bridging::prepare_document(f.doc, f.store, cfg, true).examples;
}

}  // namespace fixtures

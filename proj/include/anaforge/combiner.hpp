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

// Combination of coreference outputs from different systems. Mentions are
// identified across systems by their exact token span.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "anaforge/clustering.hpp"
#include "anaforge/corpus.hpp"
#include "anaforge/embeddings.hpp"
#include "anaforge/features.hpp"

namespace anaforge::combine {

using SpanClustering = Clustering<Span>;
using PronounTest = std::function<bool(const Span &)>;

class DocumentMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// One system's prediction for a document.
struct SystemOutput {
  std::string system;
  Document doc;

  SpanClustering partition() const { return span_clustering(doc, doc.entities()); }
};

inline void check_same_document(const Document &a, const Document &b) {
  if (a.id != b.id) throw DocumentMismatch("documents " + a.id + " and " + b.id);
  if (a.tokens.size() != b.tokens.size())
    throw DocumentMismatch("document " + a.id + " has different token counts");
  for (size_t i = 0; i < a.tokens.size(); ++i)
    if (a.tokens[i].surface != b.tokens[i].surface)
      throw DocumentMismatch("document " + a.id + " differs at token " + std::to_string(i));
}

// Base clusters plus every source singleton whose span the base lacks.
inline SpanClustering merge_singletons(const SpanClustering &base, const SpanClustering &source) {
  std::vector<std::vector<Span>> out = base.clusters();
  for (const auto &c : source.clusters())
    if (c.size() == 1 && !base.contains(c[0])) out.push_back(c);
  return SpanClustering(std::move(out));
}

// Pronoun-free clusters of `a`, plus singletons and pronoun-bearing clusters
// of `b` with mentions already claimed by `a` removed.
inline SpanClustering combine_pronoun_partition(const SpanClustering &a, const SpanClustering &b,
                                                const PronounTest &is_pronoun_span) {
  auto has_pronoun = [&](const std::vector<Span> &c) {
    for (const auto &s : c)
      if (is_pronoun_span(s)) return true;
    return false;
  };
  std::vector<std::vector<Span>> out;
  std::set<Span> taken;
  for (const auto &c : a.clusters()) {
    if (has_pronoun(c)) continue;
    out.push_back(c);
    taken.insert(c.begin(), c.end());
  }
  for (const auto &c : b.clusters()) {
    if (c.size() != 1 && !has_pronoun(c)) continue;
    std::vector<Span> kept;
    for (const auto &s : c)
      if (!taken.count(s)) kept.push_back(s);
    if (!kept.empty()) out.push_back(std::move(kept));
  }
  return SpanClustering(std::move(out));
}

inline PronounTest personal_pronoun_test(const Document &doc) {
  return [&doc](const Span &s) { return s.width() == 1 && is_personal_pronoun(doc.text(s)); };
}

inline double cosine(const Vec &a, const Vec &b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return na > 0.0 && nb > 0.0 ? dot / std::sqrt(na * nb) : 0.0;
}

struct FilterOptions {
  std::string space = "bert";
  double margin = 0.1;
};

struct FilterResult {
  std::vector<Span> cluster;
  bool removed = false;
  bool number_mismatch = false;
  double pronoun_noun = 0.0;    // cosine of the pronoun with the first mention
  double pronoun_others = 0.0;  // mean cosine of the pronoun with the rest
};

inline GrammaticalNumber mention_number(const Document &doc, const EmbeddingStore &store, const Span &s) {
  if (s.width() == 1) {
    auto n = pronoun_number(doc.text(s));
    if (n != GrammaticalNumber::kUnknown) return n;
  }
  if (!store.has_annotations()) return GrammaticalNumber::kUnknown;
  const std::string &tag = store.annotation(store.head_token(s)).tag;
  if (tag == "NNS" || tag == "NNPS") return GrammaticalNumber::kPlural;
  if (tag == "NN" || tag == "NNP") return GrammaticalNumber::kSingular;
  return GrammaticalNumber::kUnknown;
}

// Checks a cluster (in document order) whose first mention is a noun phrase
// and whose second is a personal pronoun. The first mention is dropped when
// its similarity to that pronoun falls more than `margin` below the
// pronoun's mean similarity to the remaining mentions. A number mismatch
// between the two is reported but does not by itself remove anything.
inline FilterResult compatibility_filter(const std::vector<Span> &cluster, const Document &doc,
                                         const EmbeddingStore &store, const FilterOptions &opt = {}) {
  FilterResult r;
  r.cluster = cluster;
  if (cluster.size() < 2) return r;
  auto pronoun = [&](const Span &s) { return s.width() == 1 && is_personal_pronoun(doc.text(s)); };
  const Span &noun = cluster[0], &pron = cluster[1];
  if (pronoun(noun) || !pronoun(pron)) return r;
  auto nn = mention_number(doc, store, noun), pn = mention_number(doc, store, pron);
  r.number_mismatch = nn != GrammaticalNumber::kUnknown && pn != GrammaticalNumber::kUnknown && nn != pn;
  if (cluster.size() < 3) return r;
  Vec pv = store.span_vector(opt.space, pron);
  r.pronoun_noun = cosine(pv, store.span_vector(opt.space, noun));
  double sum = 0.0;
  for (size_t i = 2; i < cluster.size(); ++i) sum += cosine(pv, store.span_vector(opt.space, cluster[i]));
  r.pronoun_others = sum / static_cast<double>(cluster.size() - 2);
  if (r.pronoun_noun < r.pronoun_others - opt.margin) {
    r.cluster.erase(r.cluster.begin());
    r.removed = true;
  }
  return r;
}

// Applies the filter to every cluster; dropped first mentions disappear
// from the output.
inline SpanClustering filter_clusters(const SpanClustering &e, const Document &doc, const EmbeddingStore &store,
                                      const FilterOptions &opt = {}, std::vector<FilterResult> *log = nullptr) {
  std::vector<std::vector<Span>> out;
  for (const auto &c : e.clusters()) {
    std::vector<Span> ordered = c;
    std::sort(ordered.begin(), ordered.end(), canonical_span_order);
    FilterResult r = compatibility_filter(ordered, doc, store, opt);
    if (log && (r.removed || r.number_mismatch)) log->push_back(r);
    out.push_back(r.cluster);
  }
  return SpanClustering(std::move(out));
}

// Document over `tokens_from`'s tokens whose identity layer is `e`; mention
// and entity ids are assigned in text order.
inline Document document_from_partition(const Document &tokens_from, const SpanClustering &e) {
  Document out;
  out.id = tokens_from.id;
  out.tokens = tokens_from.tokens;
  std::map<Span, size_t> cluster_of;
  for (size_t c = 0; c < e.size(); ++c)
    for (const auto &s : e.clusters()[c]) cluster_of[s] = c;
  std::vector<Span> spans;
  for (const auto &[s, c] : cluster_of) spans.push_back(s);
  std::sort(spans.begin(), spans.end(), canonical_span_order);
  std::map<size_t, std::string> names;
  for (size_t i = 0; i < spans.size(); ++i) {
    size_t c = cluster_of[spans[i]];
    auto it = names.find(c);
    if (it == names.end()) it = names.emplace(c, "e" + std::to_string(names.size() + 1)).first;
    out.mentions.push_back(Mention{"m" + std::to_string(i + 1), spans[i], it->second, {}, {}, {}});
  }
  out.canonicalize();
  return out;
}

}  // namespace anaforge::combine

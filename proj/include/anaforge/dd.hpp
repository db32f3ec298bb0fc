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

// Discourse-deixis resolution. Each candidate anaphor gets its own segment
// of whole sentences; every span in the segment is scored as an antecedent
// against a zero-scored dummy, and a small classifier then labels the
// anaphor as deictic, identity or non-referring.

#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anaforge/corpus.hpp"
#include "anaforge/embeddings.hpp"
#include "anaforge/features.hpp"
#include "anaforge/nn/adam.hpp"
#include "anaforge/nn/checkpoint.hpp"
#include "anaforge/nn/graph.hpp"
#include "anaforge/nn/tensor.hpp"
#include "anaforge/training.hpp"

namespace anaforge::dd {

using nn::Expr;
using nn::Graph;
using nn::Vec;

enum class AnaphorType { kDD = 0, kID = 1, kNonRef = 2 };
inline constexpr size_t kTypes = 3;

inline const char *type_name(AnaphorType t) {
  switch (t) {
    case AnaphorType::kDD: return "DD";
    case AnaphorType::kID: return "ID";
    case AnaphorType::kNonRef: return "NONREF";
  }
  return "?";
}

struct DdConfig {
  std::string space = "spanbert";
  size_t dim = 1024;  // width of `space`
  size_t feature_dim = 100;
  size_t pair_dim = 512;
  size_t hidden = 1024;
  size_t type_hidden = 1024;
  size_t context = 8;  // subtokens on each side of the anaphor
  size_t segment_limit = 256;
  size_t max_span_width = 40;  // subtokens; whole sentences are exempt
  bool gold_anaphors = false;  // resolve annotated anaphors instead of the four forms
  bool undersample = true;
  int epochs = 24;
  double lr = 3e-4;
  double dropout = 0.3;
  double lambda_const = 0.02;
  uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"space", space},
            {"dim", dim},
            {"feature_dim", feature_dim},
            {"pair_dim", pair_dim},
            {"hidden", hidden},
            {"type_hidden", type_hidden},
            {"context", context},
            {"segment_limit", segment_limit},
            {"max_span_width", max_span_width},
            {"gold_anaphors", gold_anaphors},
            {"undersample", undersample},
            {"epochs", epochs},
            {"lr", lr},
            {"dropout", dropout},
            {"lambda_const", lambda_const},
            {"seed", seed}};
  }

  void update(const nlohmann::json &j) {
    auto take = [&](const char *k, auto &field) {
      if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    take("space", space);
    take("dim", dim);
    take("feature_dim", feature_dim);
    take("pair_dim", pair_dim);
    take("hidden", hidden);
    take("type_hidden", type_hidden);
    take("context", context);
    take("segment_limit", segment_limit);
    take("max_span_width", max_span_width);
    take("gold_anaphors", gold_anaphors);
    take("undersample", undersample);
    take("epochs", epochs);
    take("lr", lr);
    take("dropout", dropout);
    take("lambda_const", lambda_const);
    take("seed", seed);
  }

  static DdConfig from_json(const nlohmann::json &j) {
    DdConfig c;
    c.update(j);
    return c;
  }

  size_t pos_slots() const { return default_pos_tags().size() + 1; }
  size_t dep_slots() const { return default_dep_tags().size() + 1; }
  size_t anaphor_width() const { return 3 * dim + 2 * feature_dim; }
  size_t span_width() const { return 3 * dim + 4 * feature_dim; }
  size_t phi_width() const { return 2 * feature_dim + pair_dim; }
};

// ---- segments ----------------------------------------------------------------

struct Segment {
  std::string doc_id;
  Span window;  // tokens
  size_t sub_start = 0, sub_end = 0;  // subtokens, inclusive
  size_t anaphor = 0;
  std::vector<Span> sentences;  // clipped to the window
  bool clipped = false;  // anaphor's own sentence exceeded the limit

  size_t subtoken_length() const { return sub_end - sub_start + 1; }
};

// Case-insensitive occurrences of this/that/it/which.
inline std::vector<size_t> candidate_anaphors(const Document &doc) {
  std::vector<size_t> out;
  for (size_t i = 0; i < doc.tokens.size(); ++i)
    if (is_deixis_candidate_form(doc.tokens[i].surface)) out.push_back(i);
  return out;
}

// Last tokens of annotated deixis anaphors.
inline std::vector<size_t> annotated_anaphors(const Document &doc) {
  std::set<size_t> out;
  for (const auto &m : doc.mentions)
    if (m.kind == AnaphorKind::kDiscourseDeixis || doc.deixis.count(m.id)) out.insert(static_cast<size_t>(m.span.end));
  return {out.begin(), out.end()};
}

// First subtoken of every token plus a final sentinel.
inline std::vector<size_t> subtoken_offsets(const Document &doc) {
  std::vector<size_t> off(doc.tokens.size() + 1, 0);
  for (size_t i = 0; i < doc.tokens.size(); ++i) off[i + 1] = off[i] + doc.tokens[i].subtoken_count;
  return off;
}

// One segment per anaphor: the anaphor's sentence plus as many whole
// preceding sentences as fit in `limit` subtokens. Token subtoken counts
// must already be attached.
inline std::vector<Segment> build_segments(const Document &doc, const std::vector<size_t> &anaphors,
                                           size_t limit = 256, std::vector<std::string> *warnings = nullptr) {
  auto sents = doc.sentences();
  auto sent_of = doc.sentence_of_token();
  auto off = subtoken_offsets(doc);
  auto subs = [&](int a, int b) { return off[static_cast<size_t>(b) + 1] - off[static_cast<size_t>(a)]; };
  std::vector<Segment> out;
  for (size_t a : anaphors) {
    Segment s;
    s.doc_id = doc.id;
    s.anaphor = a;
    size_t k = sent_of[a];
    int left = sents[k].start, right = sents[k].end;
    if (subs(left, right) > limit) {
      s.clipped = true;
      while (left < static_cast<int>(a) && subs(left, right) > limit) ++left;
      while (right > static_cast<int>(a) && subs(left, right) > limit) --right;
      if (warnings)
        warnings->push_back("SentenceLongerThanLimit: " + doc.id + " token " + std::to_string(a) +
                            " sentence clipped to " + std::to_string(subs(left, right)) + " subtokens");
    } else {
      for (size_t j = k; j-- > 0;) {
        if (subs(sents[j].start, right) > limit) break;
        left = sents[j].start;
      }
    }
    s.window = Span{left, right};
    s.sub_start = off[static_cast<size_t>(left)];
    s.sub_end = off[static_cast<size_t>(right) + 1] - 1;
    for (const auto &sent : sents) {
      Span c{std::max(sent.start, left), std::min(sent.end, right)};
      if (c.start <= c.end) s.sentences.push_back(c);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Antecedent candidates: every span up to `max_width` subtokens plus every
// run of whole sentences, skipping spans that contain the anaphor. Sorted
// by start, then end.
inline std::vector<Span> candidate_spans(const Document &doc, const Segment &seg, size_t max_width) {
  auto off = subtoken_offsets(doc);
  int a = static_cast<int>(seg.anaphor);
  std::set<Span> out;
  for (int i = seg.window.start; i <= seg.window.end; ++i)
    for (int j = i; j <= seg.window.end; ++j) {
      if (off[static_cast<size_t>(j) + 1] - off[static_cast<size_t>(i)] > max_width) break;
      if (i <= a && a <= j) continue;
      out.insert(Span{i, j});
    }
  for (size_t p = 0; p < seg.sentences.size(); ++p)
    for (size_t q = p; q < seg.sentences.size(); ++q) {
      Span run{seg.sentences[p].start, seg.sentences[q].end};
      if (!run.contains(a)) out.insert(run);
    }
  return {out.begin(), out.end()};
}

// ---- labels ------------------------------------------------------------------

struct Label {
  AnaphorType type = AnaphorType::kNonRef;
  std::vector<Span> gold;  // antecedent spans inside the window
};

// Deictic if the anaphor token is an annotated deixis mention, identity if it
// is a referring entity mention, otherwise non-referring (unannotated forms
// included).
inline Label label_segment(const Document &doc, const Segment &seg) {
  Label l;
  int a = static_cast<int>(seg.anaphor);
  const Mention *m = nullptr;
  for (const auto &x : doc.mentions)
    if (x.span.end == a && (x.span.start == a || !m)) m = &x;
  if (!m) return l;
  auto inside = [&](const Span &s) { return seg.window.contains(s) && !s.contains(a); };
  auto dd = doc.deixis.find(m->id);
  if (m->kind == AnaphorKind::kDiscourseDeixis || dd != doc.deixis.end()) {
    l.type = AnaphorType::kDD;
    if (dd != doc.deixis.end())
      for (const auto &s : dd->second)
        if (inside(s)) l.gold.push_back(s);
    return l;
  }
  if (m->kind == AnaphorKind::kNonReferential || m->referring == false || !m->entity) return l;
  if (m->kind && m->kind != AnaphorKind::kIdentity) return l;
  l.type = AnaphorType::kID;
  for (const auto &x : doc.mentions)
    if (&x != m && x.entity == m->entity && inside(x.span)) l.gold.push_back(x.span);
  std::sort(l.gold.begin(), l.gold.end());
  return l;
}

struct ClassCounts {
  std::array<size_t, kTypes> counts{};

  size_t total() const { return counts[0] + counts[1] + counts[2]; }
  double proportion(AnaphorType t) const {
    return total() ? static_cast<double>(counts[static_cast<size_t>(t)]) / static_cast<double>(total()) : 0.0;
  }
};

// Uniformly downsamples every class to the smallest class count; survivors
// keep their input order.
template <class T, class LabelOf>
std::vector<T> undersample(const std::vector<T> &items, LabelOf label_of, uint64_t seed) {
  std::array<std::vector<size_t>, kTypes> by_class;
  for (size_t i = 0; i < items.size(); ++i) by_class[static_cast<size_t>(label_of(items[i]))].push_back(i);
  size_t keep = items.size();
  for (const auto &c : by_class) keep = std::min(keep, c.size());
  nn::Rng rng(seed);
  std::vector<size_t> chosen;
  for (auto &c : by_class) {
    rng.shuffle(c);
    chosen.insert(chosen.end(), c.begin(), c.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<T> out;
  for (size_t i : chosen) out.push_back(items[i]);
  return out;
}

// ---- model inputs ------------------------------------------------------------

struct Candidate {
  Span span;
  size_t first_sub = 0, last_sub = 0;  // relative to the segment window
  size_t width_bucket = 0;
  size_t type = 0;  // ConstituentType index
  size_t end_pos = 0, end_dep = 0;
  size_t sentence_bucket = 0, token_bucket = 0;
  bool constituent = false;  // verbal or nominal
};

struct Example {
  std::string doc_id;
  Segment segment;
  Label label;
  Vec token, parent, context;
  size_t pos = 0, dep = 0;
  std::vector<Vec> subtokens;  // window rows
  std::vector<Candidate> candidates;
  std::vector<size_t> gold;  // indices into candidates
};

inline size_t tag_index(const std::vector<std::string> &tags, const std::string &t) {
  auto it = std::find(tags.begin(), tags.end(), t);
  return static_cast<size_t>(it - tags.begin());  // unknown tags share the last slot
}

inline Example make_example(const Document &doc, const EmbeddingStore &store, const Segment &seg,
                            const DdConfig &cfg) {
  using K = EmbeddingError::Kind;
  if (store.dim(cfg.space) != cfg.dim)
    throw EmbeddingError(K::kDimMismatch, "space " + cfg.space + " has width " + std::to_string(store.dim(cfg.space)) +
                                              ", model expects " + std::to_string(cfg.dim));
  Example ex;
  ex.doc_id = doc.id;
  ex.segment = seg;
  ex.label = label_segment(doc, seg);
  for (size_t r = seg.sub_start; r <= seg.sub_end; ++r) {
    auto row = store.subtoken_vector(cfg.space, r);
    ex.subtokens.emplace_back(row.begin(), row.end());
  }
  const auto &ann = store.annotation(seg.anaphor);
  ex.token = store.token_vector(cfg.space, seg.anaphor);
  ex.parent = ann.parent ? store.token_vector(cfg.space, *ann.parent) : Vec(cfg.dim, 0.0);
  ex.pos = tag_index(default_pos_tags(), ann.pos);
  ex.dep = tag_index(default_dep_tags(), ann.dep);
  // Local context, clipped at the segment edges.
  const auto &range = store.subtokens(seg.anaphor);
  size_t lo = range.first >= seg.sub_start + cfg.context ? range.first - cfg.context : seg.sub_start;
  size_t hi = std::min(range.first + range.count - 1 + cfg.context, seg.sub_end);
  ex.context.assign(cfg.dim, 0.0);
  size_t n = 0;
  for (size_t r = lo; r <= hi; ++r) {
    if (r >= range.first && r < range.first + range.count) continue;
    const Vec &v = ex.subtokens[r - seg.sub_start];
    for (size_t i = 0; i < cfg.dim; ++i) ex.context[i] += v[i];
    ++n;
  }
  if (n)
    for (double &v : ex.context) v /= static_cast<double>(n);

  auto sent_of = doc.sentence_of_token();
  size_t anaphor_sub = range.first;
  size_t anaphor_sent = sent_of[seg.anaphor];
  for (const Span &s : candidate_spans(doc, seg, cfg.max_span_width)) {
    Candidate c;
    c.span = s;
    const auto &first = store.subtokens(static_cast<size_t>(s.start));
    const auto &last = store.subtokens(static_cast<size_t>(s.end));
    c.first_sub = first.first - seg.sub_start;
    c.last_sub = last.first + last.count - 1 - seg.sub_start;
    c.width_bucket = log_bucket(c.last_sub - c.first_sub);
    auto ct = store.constituent_type(s);
    c.type = static_cast<size_t>(ct);
    c.constituent = ct != ConstituentType::kOther;
    const auto &end_ann = store.annotation(static_cast<size_t>(s.end));
    c.end_pos = tag_index(default_pos_tags(), end_ann.pos);
    c.end_dep = tag_index(default_dep_tags(), end_ann.dep);
    c.sentence_bucket = sentence_bucket(abs_diff(sent_of[static_cast<size_t>(s.start)], anaphor_sent));
    c.token_bucket = token_bucket(abs_diff(first.first, anaphor_sub));
    ex.candidates.push_back(c);
  }
  for (const Span &g : ex.label.gold) {
    auto it = std::lower_bound(ex.candidates.begin(), ex.candidates.end(), g,
                               [](const Candidate &c, const Span &s) { return c.span < s; });
    if (it != ex.candidates.end() && it->span == g) ex.gold.push_back(static_cast<size_t>(it - ex.candidates.begin()));
  }
  return ex;
}

struct PreparedDocument {
  std::vector<Example> examples;
  std::vector<std::string> warnings;
};

// Segments, labels and features for one document. Referring anaphors
// without a usable gold antecedent are dropped when `for_training`.
inline PreparedDocument prepare_document(Document doc, const EmbeddingStore &store, const DdConfig &cfg,
                                         bool for_training) {
  PreparedDocument out;
  store.attach(doc);
  auto anaphors = cfg.gold_anaphors ? annotated_anaphors(doc) : candidate_anaphors(doc);
  for (const auto &seg : build_segments(doc, anaphors, cfg.segment_limit, &out.warnings)) {
    Example ex = make_example(doc, store, seg, cfg);
    if (for_training && ex.label.type != AnaphorType::kNonRef && ex.gold.empty()) {
      out.warnings.push_back("NoGoldAntecedent: " + doc.id + " token " + std::to_string(seg.anaphor) + " (" +
                             type_name(ex.label.type) + ") skipped");
      continue;
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

// ---- model -------------------------------------------------------------------

// Per-candidate score parts.
struct ScoreParts {
  double mention = 0.0, fast = 0.0, slow = 0.0;
  double total() const { return mention + fast + slow; }
};

struct Forward {
  Expr scores;  // dummy first
  std::vector<Expr> candidate_scores;
  std::vector<Expr> mention_scores;
  std::vector<ScoreParts> parts;
  size_t choice = 0;  // 0 is the dummy
  Expr type_logits;
};

class DdModel {
 public:
  explicit DdModel(DdConfig cfg) : cfg_(std::move(cfg)) {
    size_t f = cfg_.feature_dim, kx = cfg_.anaphor_width(), qy = cfg_.span_width(), h = cfg_.hidden;
    params_.add("dd.pos", cfg_.pos_slots(), f);
    params_.add("dd.dep", cfg_.dep_slots(), f);
    params_.add("dd.width", kLogBuckets, f);
    params_.add("dd.span_type", 3, f);
    params_.add("dd.sentence_distance", kSentenceBuckets, f);
    params_.add("dd.token_distance", kTokenBuckets, f);
    params_.add("dd.attn.W", 1, cfg_.dim);
    params_.add("dd.attn.b", 1);
    params_.add("dd.proj_x.W", cfg_.pair_dim, kx);
    params_.add("dd.proj_y.W", cfg_.pair_dim, qy);
    params_.add("dd.mention.l1.W", h, qy);
    params_.add("dd.mention.l1.b", h);
    params_.add("dd.mention.l2.W", h, h);
    params_.add("dd.mention.l2.b", h);
    params_.add("dd.mention.out.W", 1, h);
    params_.add("dd.mention.out.b", 1);
    // First slow layer split by input block: [k_x, q_y, phi].
    params_.add("dd.slow.l1.Wx", h, kx);
    params_.add("dd.slow.l1.Wy", h, qy);
    params_.add("dd.slow.l1.Wphi", h, cfg_.phi_width());
    params_.add("dd.slow.l1.b", h);
    params_.add("dd.slow.l2.W", h, h);
    params_.add("dd.slow.l2.b", h);
    params_.add("dd.slow.out.W", 1, h);
    params_.add("dd.slow.out.b", 1);
    params_.add("dd.type.l1.W", cfg_.type_hidden, kx + qy);
    params_.add("dd.type.l1.b", cfg_.type_hidden);
    params_.add("dd.type.l2.W", kTypes, cfg_.type_hidden);
    params_.add("dd.type.l2.b", kTypes);
    nn::Rng rng(cfg_.seed);
    params_.initialize(rng);
  }

  const DdConfig &config() const { return cfg_; }
  DdConfig &config() { return cfg_; }
  nn::ParameterSet &params() { return params_; }
  const nn::ParameterSet &params() const { return params_; }

  Expr anaphor_rep(Graph &g, const Example &ex) {
    Expr k = g.concat({g.constant(ex.token), g.constant(ex.parent), g.constant(ex.context),
                       g.lookup(p("dd.pos"), ex.pos), g.lookup(p("dd.dep"), ex.dep)});
    return g.dropout(k, cfg_.dropout);
  }

  // Scalar attention logit per window subtoken.
  std::vector<Expr> attention_logits(Graph &g, const std::vector<Expr> &subtokens) {
    std::vector<Expr> out;
    for (Expr e : subtokens) out.push_back(g.affine(p("dd.attn.W"), p("dd.attn.b"), e));
    return out;
  }

  Expr span_rep(Graph &g, const Candidate &c, const std::vector<Expr> &subtokens, const std::vector<Expr> &attn) {
    std::span<const Expr> rows(subtokens.begin() + static_cast<std::ptrdiff_t>(c.first_sub), c.last_sub - c.first_sub + 1);
    std::span<const Expr> logits(attn.begin() + static_cast<std::ptrdiff_t>(c.first_sub), rows.size());
    Expr avg = g.weighted_sum(g.softmax(g.concat(logits)), rows);
    Expr q = g.concat({subtokens[c.first_sub], subtokens[c.last_sub], avg, g.lookup(p("dd.width"), c.width_bucket),
                       g.lookup(p("dd.span_type"), c.type), g.lookup(p("dd.pos"), c.end_pos),
                       g.lookup(p("dd.dep"), c.end_dep)});
    return g.dropout(q, cfg_.dropout);
  }

  Expr mention_score(Graph &g, Expr q) {
    Expr h = hidden(g, g.affine(p("dd.mention.l1.W"), p("dd.mention.l1.b"), q));
    h = hidden(g, g.affine(p("dd.mention.l2.W"), p("dd.mention.l2.b"), h));
    return g.affine(p("dd.mention.out.W"), p("dd.mention.out.b"), h);
  }

  // `slow_x` is the k_x block of the first slow layer, shared by all
  // candidates of a segment.
  Expr slow_score(Graph &g, Expr slow_x, Expr q, Expr phi) {
    Expr pre = g.sum(std::vector<Expr>{slow_x, g.matvec(p("dd.slow.l1.Wy"), q), g.matvec(p("dd.slow.l1.Wphi"), phi),
                                       g.parameter(p("dd.slow.l1.b"))});
    Expr h = hidden(g, pre);
    h = hidden(g, g.affine(p("dd.slow.l2.W"), p("dd.slow.l2.b"), h));
    return g.affine(p("dd.slow.out.W"), p("dd.slow.out.b"), h);
  }

  Expr type_logits(Graph &g, Expr k, std::optional<Expr> q) {
    Expr in = g.concat({k, q ? *q : g.zeros(cfg_.span_width())});
    Expr h = hidden(g, g.affine(p("dd.type.l1.W"), p("dd.type.l1.b"), in));
    return g.affine(p("dd.type.l2.W"), p("dd.type.l2.b"), h);
  }

  Forward forward(Graph &g, const Example &ex) {
    Forward f;
    Expr k = anaphor_rep(g, ex);
    Expr px = g.matvec(p("dd.proj_x.W"), k);
    Expr slow_x = g.matvec(p("dd.slow.l1.Wx"), k);
    std::vector<Expr> subtokens;
    for (const auto &v : ex.subtokens) subtokens.push_back(g.constant(v));
    std::vector<Expr> attn = attention_logits(g, subtokens);
    std::vector<Expr> scores = {g.constant(0.0)}, reps;
    for (const auto &c : ex.candidates) {
      Expr q = span_rep(g, c, subtokens, attn);
      Expr py = g.matvec(p("dd.proj_y.W"), q);
      Expr phi = g.concat({g.lookup(p("dd.sentence_distance"), c.sentence_bucket),
                           g.lookup(p("dd.token_distance"), c.token_bucket), g.mul(px, py)});
      Expr sm = mention_score(g, q), sf = g.dot(px, py), ss = slow_score(g, slow_x, q, phi);
      f.parts.push_back({g.scalar(sm), g.scalar(sf), g.scalar(ss)});
      f.mention_scores.push_back(sm);
      f.candidate_scores.push_back(g.sum(std::vector<Expr>{sm, sf, ss}));
      scores.push_back(f.candidate_scores.back());
      reps.push_back(q);
    }
    f.scores = g.concat(scores);
    f.choice = argmax_with_dummy(g.value(f.scores));
    f.type_logits = type_logits(g, k, f.choice ? std::optional<Expr>(reps[f.choice - 1]) : std::nullopt);
    return f;
  }

  // Index of the best entry; index 0 (the dummy) wins ties, then the
  // earliest candidate, which is the earlier start and then the shorter span.
  static size_t argmax_with_dummy(const Vec &scores) {
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[best]) best = i;
    return best;
  }

  void save(const std::string &path) const { nn::save_checkpoint(path, "dd", cfg_.to_json().dump(), params_); }

  static DdModel load(const std::string &path) {
    auto header = nn::read_checkpoint_header(path);
    if (header.kind != "dd") throw nn::CheckpointError("checkpoint holds a " + header.kind + " model");
    DdModel m(DdConfig::from_json(nlohmann::json::parse(header.metadata)));
    nn::load_checkpoint_tensors(path, m.params_);
    return m;
  }

 private:
  nn::Tensor &p(const char *name) { return params_.get(name); }

  Expr hidden(Graph &g, Expr x) { return g.dropout(g.relu(x), cfg_.dropout); }

  DdConfig cfg_;
  nn::ParameterSet params_;
};

// ---- loss --------------------------------------------------------------------

struct Losses {
  Expr antecedent, type, label, constituent, total;
};

inline Losses dd_loss(Graph &g, const DdModel &model, const Example &ex, const Forward &f) {
  Losses l;
  Expr ls = g.log_softmax(f.scores);
  std::vector<Expr> gold;
  if (ex.label.type == AnaphorType::kNonRef || ex.gold.empty())
    gold.push_back(g.pick(ls, 0));
  else
    for (size_t i : ex.gold) gold.push_back(g.pick(ls, i + 1));
  l.antecedent = g.scale(g.logsumexp(g.concat(gold)), -1.0);
  l.type = g.scale(g.pick(g.log_softmax(f.type_logits), static_cast<size_t>(ex.label.type)), -1.0);
  double nonref = ex.label.type == AnaphorType::kNonRef ? 1.0 : 0.0;
  // Both log P(dummy) and log(1 - P(dummy)) straight from the scores.
  Expr log_dummy = g.pick(ls, 0);
  if (f.candidate_scores.empty()) {
    l.label = g.scale(log_dummy, -nonref);
  } else {
    Expr log_rest = g.sub(g.logsumexp(g.concat(f.candidate_scores)), g.logsumexp(f.scores));
    l.label = g.scale(g.add(g.scale(log_dummy, nonref), g.scale(log_rest, 1.0 - nonref)), -1.0);
  }
  std::vector<Expr> c;
  for (size_t i = 0; i < ex.candidates.size(); ++i)
    c.push_back(g.bce_with_logit(f.mention_scores[i], ex.candidates[i].constituent ? 1.0 : 0.0));
  l.constituent = c.empty() ? g.constant(0.0) : g.mean(c);
  l.total = g.sum(std::vector<Expr>{l.antecedent, l.type, l.label,
                                    g.scale(l.constituent, model.config().lambda_const)});
  return l;
}

// ---- training ----------------------------------------------------------------

class Trainer {
 public:
  explicit Trainer(DdModel &model) : model_(model), adam_(model.config().lr) {}

  std::array<double, 5> step(const Example &ex, nn::Rng &rng, bool update) {
    Graph g(true, &rng);
    Forward f = model_.forward(g, ex);
    Losses l = dd_loss(g, model_, ex, f);
    std::array<double, 5> out = {g.scalar(l.antecedent), g.scalar(l.type), g.scalar(l.label),
                                 g.scalar(l.constituent), g.scalar(l.total)};
    check_finite_loss(out[4], "dd loss on " + ex.doc_id + " token " + std::to_string(ex.segment.anaphor));
    if (update) {
      g.backward(l.total);
      adam_.step(model_.params());
      if (!model_.params().all_finite())
        throw TrainingError(TrainingError::Kind::kNonFiniteLoss, "parameters after " + ex.doc_id);
    }
    return out;
  }

  // One segment per update, shuffled every epoch.
  LossLog train(const std::vector<Example> &examples) {
    if (examples.empty()) throw TrainingError(TrainingError::Kind::kEmptyTrainingSet, "no dd segments");
    LossLog log({"antecedent", "type", "label", "constituent", "total"});
    nn::Rng rng(model_.config().seed ^ 0x4444u);
    log.add(0, epoch(examples, rng, false));
    for (int e = 1; e <= model_.config().epochs; ++e) log.add(e, epoch(examples, rng, true));
    return log;
  }

 private:
  std::vector<double> epoch(const std::vector<Example> &examples, nn::Rng &rng, bool update) {
    std::vector<size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    if (update) rng.shuffle(order);
    std::vector<double> sum(5, 0.0);
    for (size_t i : order) {
      auto l = step(examples[i], rng, update);
      for (size_t k = 0; k < 5; ++k) sum[k] += l[k];
    }
    for (double &v : sum) v /= static_cast<double>(examples.size());
    return sum;
  }

  DdModel &model_;
  nn::Adam adam_;
};

// ---- prediction --------------------------------------------------------------

struct Prediction {
  std::string doc_id;
  size_t anaphor = 0;
  std::optional<Span> antecedent;
  AnaphorType type = AnaphorType::kNonRef;
  std::array<double, kTypes> probs{};
};

inline Prediction predict(DdModel &model, const Example &ex) {
  Graph g;
  Forward f = model.forward(g, ex);
  Prediction p;
  p.doc_id = ex.doc_id;
  p.anaphor = ex.segment.anaphor;
  if (f.choice) p.antecedent = ex.candidates[f.choice - 1].span;
  Vec probs = g.value(g.softmax(f.type_logits));
  for (size_t i = 0; i < kTypes; ++i) p.probs[i] = probs[i];
  p.type = static_cast<AnaphorType>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  return p;
}

// Input tokens with one deixis mention per anaphor predicted as deictic;
// the antecedent column is left empty when the dummy won.
inline Document apply_predictions(const Document &doc, const std::vector<Prediction> &preds) {
  Document out;
  out.id = doc.id;
  out.tokens = doc.tokens;
  size_t k = 0;
  for (const auto &p : preds) {
    if (p.type != AnaphorType::kDD) continue;
    Mention m;
    m.id = "dd" + std::to_string(++k);
    m.span = Span{static_cast<int>(p.anaphor), static_cast<int>(p.anaphor)};
    m.kind = AnaphorKind::kDiscourseDeixis;
    if (p.antecedent) out.deixis[m.id].push_back(*p.antecedent);
    out.mentions.push_back(std::move(m));
  }
  out.canonicalize();
  return out;
}

// Deixis layer as a partition over spans: each anaphor together with its
// antecedent spans, merged where two anaphors share an antecedent. An
// anaphor without antecedent stays a singleton.
inline Clustering<Span> deixis_clustering(const Document &doc) {
  std::map<Span, Span> parent;
  auto find = [&](Span s) {
    parent.emplace(s, s);
    while (parent.at(s) != s) s = parent.at(s);
    return s;
  };
  for (const auto &m : doc.mentions) {
    if (m.kind != AnaphorKind::kDiscourseDeixis) continue;
    Span root = find(m.span);
    auto it = doc.deixis.find(m.id);
    if (it == doc.deixis.end()) continue;
    for (const Span &s : it->second) {
      Span other = find(s);
      if (other != root) parent[other] = root;
    }
  }
  std::vector<std::pair<Span, Span>> labelled;
  for (const auto &[s, p] : parent) labelled.emplace_back(s, find(s));
  return group_by_label(labelled);
}

// ---- error analysis ----------------------------------------------------------

// A predicted span counts as split when a sentence-final mark occurs before
// its last token.
inline bool split_heuristic(const Document &doc, const Span &s) {
  for (int t = s.start; t < s.end; ++t) {
    const std::string &w = doc.tokens[static_cast<size_t>(t)].surface;
    if (!w.empty() && w.find_first_not_of(".?!") == std::string::npos) return true;
  }
  return false;
}

enum class Border { kLeftWrong = 0, kRightWrong = 1, kBothWrong = 2, kBothCorrect = 3 };
inline constexpr std::array<const char *, 4> kBorderNames = {"left_wrong", "right_wrong", "both_wrong", "both_correct"};

// Border correctness against the gold span that overlaps most (first on ties).
inline Border border_of(const Span &pred, const std::vector<Span> &gold) {
  const Span *best = &gold.front();
  int best_overlap = -1;
  for (const auto &g : gold) {
    if (g == pred) return Border::kBothCorrect;
    int overlap = std::max(0, std::min(g.end, pred.end) - std::max(g.start, pred.start) + 1);
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = &g;
    }
  }
  bool left = best->start == pred.start, right = best->end == pred.end;
  if (left && right) return Border::kBothCorrect;
  if (left) return Border::kRightWrong;
  if (right) return Border::kLeftWrong;
  return Border::kBothWrong;
}

struct ErrorCase {
  const Document *doc = nullptr;
  std::optional<Span> predicted;
  AnaphorType type = AnaphorType::kNonRef;
  std::vector<Span> gold;
};

// Counts over cases with a non-empty gold antecedent:
// [split][border][type] plus [type] for empty predictions.
struct ErrorReport {
  std::array<std::array<std::array<size_t, kTypes>, 4>, 2> grid{};
  std::array<size_t, kTypes> empty{};

  void add(const ErrorCase &c) {
    if (c.gold.empty()) return;
    size_t t = static_cast<size_t>(c.type);
    if (!c.predicted) {
      ++empty[t];
      return;
    }
    size_t split = split_heuristic(*c.doc, *c.predicted) ? 0 : 1;
    ++grid[split][static_cast<size_t>(border_of(*c.predicted, c.gold))][t];
  }

  std::string csv() const {
    std::ostringstream os;
    os << "split,border,type,count\n";
    const char *split_names[] = {"split", "not_split"};
    for (size_t s = 0; s < 2; ++s)
      for (size_t b = 0; b < 4; ++b)
        for (size_t t = 0; t < kTypes; ++t)
          os << split_names[s] << ',' << kBorderNames[b] << ',' << type_name(static_cast<AnaphorType>(t)) << ','
             << grid[s][b][t] << '\n';
    for (size_t t = 0; t < kTypes; ++t)
      os << "empty,," << type_name(static_cast<AnaphorType>(t)) << ',' << empty[t] << '\n';
    return os.str();
  }
};

// ---- corpus statistics -------------------------------------------------------

struct Statistics {
  ClassCounts classes;
  // Per class: parent POS of the anaphor, and anaphor POS/DEP pairs.
  std::array<std::map<std::string, size_t>, kTypes> parents, pos_dep;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["segments"] = classes.total();
    for (size_t t = 0; t < kTypes; ++t) {
      std::string name = type_name(static_cast<AnaphorType>(t));
      j["classes"][name] = classes.counts[t];
      j["proportions"][name] = classes.proportion(static_cast<AnaphorType>(t));
      if (!parents[t].empty()) j["parents"][name] = parents[t];
      if (!pos_dep[t].empty()) j["pos_dep"][name] = pos_dep[t];
    }
    return j;
  }
};

// `store` may be null, in which case only class counts are collected.
inline void collect_statistics(const Document &doc, const EmbeddingStore *store, const DdConfig &cfg,
                               Statistics &stats, std::vector<std::string> *warnings = nullptr) {
  Document d = doc;
  if (store) store->attach(d);
  auto anaphors = cfg.gold_anaphors ? annotated_anaphors(d) : candidate_anaphors(d);
  for (const auto &seg : build_segments(d, anaphors, cfg.segment_limit, warnings)) {
    size_t t = static_cast<size_t>(label_segment(d, seg).type);
    ++stats.classes.counts[t];
    if (!store || !store->has_annotations()) continue;
    const auto &a = store->annotation(seg.anaphor);
    stats.parents[t][a.parent ? store->annotation(*a.parent).pos : "ROOT"]++;
    stats.pos_dep[t][a.pos + "/" + a.dep]++;
  }
}

}  // namespace anaforge::dd

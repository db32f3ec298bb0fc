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

// Bridging resolution with gold mentions and gold anaphors. One anaphor is
// scored at a time against every preceding gold mention; the anaphor
// representation is refined a fixed number of times by gating in the
// expected antecedent.

#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anaforge/corpus.hpp"
#include "anaforge/embeddings.hpp"
#include "anaforge/features.hpp"
#include "anaforge/metrics.hpp"
#include "anaforge/nn/adam.hpp"
#include "anaforge/nn/checkpoint.hpp"
#include "anaforge/nn/graph.hpp"
#include "anaforge/nn/tensor.hpp"
#include "anaforge/training.hpp"

namespace anaforge::bridging {

using nn::Expr;
using nn::Graph;
using nn::Vec;

struct BridgingConfig {
  std::string space = "bert";
  size_t dim = 768;
  size_t feature_dim = 20;
  size_t hidden = 1024;
  size_t depth = 2;
  int epochs = 5;
  double lr = 3e-3;
  double dropout = 0.3;
  uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"space", space},   {"dim", dim}, {"feature_dim", feature_dim}, {"hidden", hidden},
            {"depth", depth},   {"epochs", epochs}, {"lr", lr},             {"dropout", dropout},
            {"seed", seed}};
  }

  void update(const nlohmann::json &j) {
    auto take = [&](const char *k, auto &field) {
      if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    take("space", space);
    take("dim", dim);
    take("feature_dim", feature_dim);
    take("hidden", hidden);
    take("depth", depth);
    take("epochs", epochs);
    take("lr", lr);
    take("dropout", dropout);
    take("seed", seed);
  }

  static BridgingConfig from_json(const nlohmann::json &j) {
    BridgingConfig c;
    c.update(j);
    return c;
  }

  size_t span_width() const { return 3 * dim + feature_dim; }
  size_t pair_width() const { return 3 * span_width() + 2 * feature_dim; }
};

// ---- instances ---------------------------------------------------------------

struct Instance {
  std::string doc_id;
  std::string anaphor;
  std::vector<std::string> candidates;  // document order
  std::optional<size_t> gold;           // index into candidates
};

struct InstanceSet {
  std::vector<Instance> instances;
  std::vector<std::string> warnings;
  size_t gold_not_in_candidates = 0;
};

// Candidates are the gold mentions starting strictly before the anaphor.
// Anaphors without any are dropped with a NoCandidates warning; a gold
// antecedent outside the candidates leaves `gold` empty and is counted.
inline InstanceSet build_instances(const Document &doc) {
  InstanceSet out;
  std::vector<const Mention *> order;
  for (const auto &m : doc.mentions) order.push_back(&m);
  std::stable_sort(order.begin(), order.end(),
                   [](const Mention *a, const Mention *b) { return canonical_mention_order(*a, *b); });
  std::vector<std::string> seen;
  for (const auto &link : doc.bridging) {
    if (std::find(seen.begin(), seen.end(), link.anaphor) != seen.end()) continue;
    seen.push_back(link.anaphor);
    const Mention *a = doc.find_mention(link.anaphor);
    if (!a) throw FormatError(FormatError::Kind::kUnknownMention, 0, "bridging anaphor " + link.anaphor);
    Instance in;
    in.doc_id = doc.id;
    in.anaphor = a->id;
    for (const Mention *m : order)
      if (m->span.start < a->span.start) in.candidates.push_back(m->id);
    if (in.candidates.empty()) {
      out.warnings.push_back("NoCandidates: " + doc.id + " anaphor " + a->id + " skipped");
      continue;
    }
    auto it = std::find(in.candidates.begin(), in.candidates.end(), link.antecedent);
    if (it == in.candidates.end()) {
      ++out.gold_not_in_candidates;
      out.warnings.push_back("GoldNotInCandidates: " + doc.id + " anaphor " + a->id + " -> " + link.antecedent);
    } else {
      in.gold = static_cast<size_t>(it - in.candidates.begin());
    }
    out.instances.push_back(std::move(in));
  }
  return out;
}

// ---- examples ----------------------------------------------------------------

struct SpanInput {
  std::vector<Vec> rows;  // subtoken vectors, first to last
  size_t width_bucket = 0;
};

struct Example {
  Instance instance;
  SpanInput anaphor;
  std::vector<SpanInput> candidates;
  std::vector<size_t> distance;  // log bucket of the start offset
  std::vector<size_t> same_speaker;
};

inline SpanInput span_input(const EmbeddingStore &store, const Span &s, const std::string &space) {
  SpanInput in;
  size_t first = store.subtokens(static_cast<size_t>(s.start)).first;
  const auto &last = store.subtokens(static_cast<size_t>(s.end));
  for (size_t r = first; r < last.first + last.count; ++r) {
    auto row = store.subtoken_vector(space, r);
    in.rows.emplace_back(row.begin(), row.end());
  }
  in.width_bucket = log_bucket(static_cast<size_t>(s.end - s.start));
  return in;
}

inline Example make_example(const Document &doc, const EmbeddingStore &store, const Instance &in,
                            const BridgingConfig &cfg) {
  using K = EmbeddingError::Kind;
  if (store.dim(cfg.space) != cfg.dim)
    throw EmbeddingError(K::kDimMismatch, "space " + cfg.space + " has width " + std::to_string(store.dim(cfg.space)) +
                                              ", model expects " + std::to_string(cfg.dim));
  Example ex;
  ex.instance = in;
  const Mention *a = doc.find_mention(in.anaphor);
  ex.anaphor = span_input(store, a->span, cfg.space);
  const std::string &speaker = doc.tokens[static_cast<size_t>(a->span.start)].speaker;
  for (const auto &id : in.candidates) {
    const Mention *c = doc.find_mention(id);
    ex.candidates.push_back(span_input(store, c->span, cfg.space));
    ex.distance.push_back(log_bucket(static_cast<size_t>(a->span.start - c->span.start)));
    ex.same_speaker.push_back(doc.tokens[static_cast<size_t>(c->span.start)].speaker == speaker ? 1 : 0);
  }
  return ex;
}

struct PreparedDocument {
  std::vector<Example> examples;
  std::vector<std::string> warnings;
  size_t gold_not_in_candidates = 0;
};

// Training drops instances whose gold antecedent is not a candidate.
inline PreparedDocument prepare_document(const Document &doc, const EmbeddingStore &store, const BridgingConfig &cfg,
                                         bool for_training) {
  InstanceSet set = build_instances(doc);
  PreparedDocument out;
  out.warnings = std::move(set.warnings);
  out.gold_not_in_candidates = set.gold_not_in_candidates;
  for (const auto &in : set.instances) {
    if (for_training && !in.gold) continue;
    out.examples.push_back(make_example(doc, store, in, cfg));
  }
  return out;
}

// ---- model -------------------------------------------------------------------

struct Forward {
  Expr scores;                  // one per candidate, from the refined anaphor
  std::vector<Expr> anaphor;    // representation before each refinement, then the final one
  size_t choice = 0;
};

class BridgingModel {
 public:
  explicit BridgingModel(BridgingConfig cfg) : cfg_(std::move(cfg)) {
    size_t f = cfg_.feature_dim, w = cfg_.span_width(), h = cfg_.hidden;
    params_.add("br.width", kLogBuckets, f);
    params_.add("br.distance", kLogBuckets, f);
    params_.add("br.speaker", 2, f);
    params_.add("br.attn.W", 1, cfg_.dim);
    params_.add("br.attn.b", 1);
    params_.add("br.fine.l1.W", h, cfg_.pair_width());
    params_.add("br.fine.l1.b", h);
    params_.add("br.fine.l2.W", h, h);
    params_.add("br.fine.l2.b", h);
    params_.add("br.fine.out.W", 1, h);
    params_.add("br.fine.out.b", 1);
    params_.add("br.gate.W", w, 2 * w);
    params_.add("br.gate.b", w);
    nn::Rng rng(cfg_.seed);
    params_.initialize(rng);
  }

  const BridgingConfig &config() const { return cfg_; }
  BridgingConfig &config() { return cfg_; }
  nn::ParameterSet &params() { return params_; }
  const nn::ParameterSet &params() const { return params_; }

  // start ⊕ end ⊕ attention average ⊕ width embedding.
  Expr span_rep(Graph &g, const SpanInput &s) {
    std::vector<Expr> rows, logits;
    for (const auto &v : s.rows) {
      rows.push_back(g.constant(v));
      logits.push_back(g.affine(p("br.attn.W"), p("br.attn.b"), rows.back()));
    }
    Expr avg = g.weighted_sum(g.softmax(g.concat(logits)), rows);
    Expr r = g.concat({rows.front(), rows.back(), avg, g.lookup(p("br.width"), s.width_bucket)});
    return g.dropout(r, cfg_.dropout);
  }

  Expr fine_score(Graph &g, Expr a, Expr c, size_t distance, size_t same_speaker) {
    Expr in = g.concat({a, c, g.mul(a, c), g.lookup(p("br.distance"), distance),
                        g.lookup(p("br.speaker"), same_speaker)});
    Expr h = hidden(g, g.affine(p("br.fine.l1.W"), p("br.fine.l1.b"), in));
    h = hidden(g, g.affine(p("br.fine.l2.W"), p("br.fine.l2.b"), h));
    return g.affine(p("br.fine.out.W"), p("br.fine.out.b"), h);
  }

  Expr scores(Graph &g, const Example &ex, Expr a, const std::vector<Expr> &cands) {
    std::vector<Expr> s;
    for (size_t i = 0; i < cands.size(); ++i)
      s.push_back(fine_score(g, a, cands[i], ex.distance[i], ex.same_speaker[i]));
    return g.concat(s);
  }

  // a' = f * E[c] + (1 - f) * a with f = sigmoid(W [a, E[c]] + b).
  Expr refine_once(Graph &g, Expr a, const std::vector<Expr> &cands, Expr scores) {
    Expr expected = g.weighted_sum(g.softmax(scores), cands);
    Expr f = g.sigmoid(g.affine(p("br.gate.W"), p("br.gate.b"), g.concat({a, expected})));
    return g.add(g.mul(f, expected), g.mul(g.rsub(1.0, f), a));
  }

  Forward forward(Graph &g, const Example &ex) {
    Forward out;
    Expr a = span_rep(g, ex.anaphor);
    std::vector<Expr> cands;
    for (const auto &c : ex.candidates) cands.push_back(span_rep(g, c));
    out.anaphor.push_back(a);
    for (size_t d = 0; d < cfg_.depth; ++d) {
      a = refine_once(g, a, cands, scores(g, ex, a, cands));
      out.anaphor.push_back(a);
    }
    out.scores = scores(g, ex, a, cands);
    out.choice = argmax_nearest(g.value(out.scores));
    return out;
  }

  // Highest score; ties go to the later candidate, the one nearest the anaphor.
  static size_t argmax_nearest(const Vec &scores) {
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
      if (scores[i] >= scores[best]) best = i;
    return best;
  }

  void save(const std::string &path) const {
    nn::save_checkpoint(path, "bridging", cfg_.to_json().dump(), params_);
  }

  static BridgingModel load(const std::string &path) {
    auto header = nn::read_checkpoint_header(path);
    if (header.kind != "bridging") throw nn::CheckpointError("checkpoint holds a " + header.kind + " model");
    BridgingModel m(BridgingConfig::from_json(nlohmann::json::parse(header.metadata)));
    nn::load_checkpoint_tensors(path, m.params_);
    return m;
  }

 private:
  nn::Tensor &p(const char *name) { return params_.get(name); }

  Expr hidden(Graph &g, Expr x) { return g.dropout(g.relu(x), cfg_.dropout); }

  BridgingConfig cfg_;
  nn::ParameterSet params_;
};

// Cross-entropy against the gold candidate; there is no dummy.
inline Expr bridging_loss(Graph &g, const Example &ex, const Forward &f) {
  if (!ex.instance.gold) throw std::invalid_argument("bridging loss needs a gold antecedent");
  return g.scale(g.pick(g.log_softmax(f.scores), *ex.instance.gold), -1.0);
}

// ---- training ----------------------------------------------------------------

class Trainer {
 public:
  explicit Trainer(BridgingModel &model) : model_(model), adam_(model.config().lr) {}

  double step(const Example &ex, nn::Rng &rng, bool update) {
    Graph g(true, &rng);
    Forward f = model_.forward(g, ex);
    Expr loss = bridging_loss(g, ex, f);
    double v = g.scalar(loss);
    check_finite_loss(v, "bridging loss on " + ex.instance.doc_id + " anaphor " + ex.instance.anaphor);
    if (update) {
      g.backward(loss);
      adam_.step(model_.params());
      if (!model_.params().all_finite())
        throw TrainingError(TrainingError::Kind::kNonFiniteLoss, "parameters after " + ex.instance.doc_id);
    }
    return v;
  }

  // One anaphor per update, shuffled every epoch.
  LossLog train(const std::vector<Example> &examples) {
    if (examples.empty()) throw TrainingError(TrainingError::Kind::kEmptyTrainingSet, "no bridging instances");
    LossLog log({"cross_entropy"});
    nn::Rng rng(model_.config().seed ^ 0xb41d6eu);
    log.add(0, {epoch(examples, rng, false)});
    for (int e = 1; e <= model_.config().epochs; ++e) log.add(e, {epoch(examples, rng, true)});
    return log;
  }

 private:
  double epoch(const std::vector<Example> &examples, nn::Rng &rng, bool update) {
    std::vector<size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    if (update) rng.shuffle(order);
    double sum = 0.0;
    for (size_t i : order) sum += step(examples[i], rng, update);
    return sum / static_cast<double>(examples.size());
  }

  BridgingModel &model_;
  nn::Adam adam_;
};

// ---- prediction --------------------------------------------------------------

inline BridgingLink resolve(BridgingModel &model, const Example &ex) {
  Graph g;
  Forward f = model.forward(g, ex);
  return {ex.instance.anaphor, ex.instance.candidates[f.choice]};
}

// Input document with its bridging links replaced by the predicted ones.
inline Document apply_predictions(const Document &doc, const std::vector<BridgingLink> &links) {
  Document out = doc;
  out.bridging = links;
  out.canonicalize();
  return out;
}

inline metrics::LinkMap<std::string> link_map(const std::vector<BridgingLink> &links) {
  metrics::LinkMap<std::string> out;
  for (const auto &l : links) out.emplace(l.anaphor, l.antecedent);
  return out;
}

}  // namespace anaforge::bridging

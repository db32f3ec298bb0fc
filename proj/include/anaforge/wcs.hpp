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

// Incremental workspace clustering. Mentions are visited left to right; each
// one either joins an active cluster or opens a new one. Cluster scores are
// the mean of candidate/member pair scores, and the pair representation
// concatenates several embedding views with distance, position and speaker
// features.

#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anaforge/clustering.hpp"
#include "anaforge/corpus.hpp"
#include "anaforge/embeddings.hpp"
#include "anaforge/features.hpp"
#include "anaforge/nn/adam.hpp"
#include "anaforge/nn/checkpoint.hpp"
#include "anaforge/nn/graph.hpp"
#include "anaforge/nn/tensor.hpp"
#include "anaforge/training.hpp"

namespace anaforge::wcs {

using nn::Expr;
using nn::Graph;
using nn::Vec;

struct EncoderSpec {
  std::string name;
  std::string space;
  bool head = false;  // head-token vector instead of the span mean
  size_t dim = 0;
  size_t hidden = 0;
  size_t out = 0;

  bool operator==(const EncoderSpec &) const = default;
};

inline std::vector<EncoderSpec> default_encoders() {
  return {
      {"contextual_head", "bert", true, 768, 900, 600},
      {"contextual_span", "bert", false, 768, 900, 600},
      {"concept", "numberbatch", false, 300, 600, 300},
      {"static_head", "glove", true, 100, 600, 200},
      {"static_span", "glove", false, 100, 600, 200},
      {"masked_lm", "bert_mlm", true, 768, 600, 200},
  };
}

struct WcsConfig {
  std::vector<EncoderSpec> encoders = default_encoders();
  size_t feature_dim = 20;
  size_t max_speakers = 8;
  size_t scorer_hidden = 150;
  size_t referring_hidden = 150;
  size_t eviction_steps = 100;
  int epochs = 5;
  double lr = 1e-4;
  double dropout = 0.3;
  double teacher_forcing = 0.3;
  double referring_threshold = 0.5;
  uint64_t seed = 0;

  size_t position_slots() const { return kLogBuckets + 1; }
  size_t distance_slots() const { return kLogBuckets + 1; }
  size_t speaker_slots() const { return max_speakers + 2; }  // ..., OTHER, NEW
  size_t encoder_width() const {
    size_t n = 0;
    for (const auto &e : encoders) n += e.out;
    return n;
  }
  size_t input_width() const {
    size_t n = 0;
    for (const auto &e : encoders) n += e.dim;
    return n;
  }
  size_t pair_width() const { return encoder_width() + 5 * feature_dim; }

  nlohmann::json to_json() const {
    nlohmann::json encs = nlohmann::json::array();
    for (const auto &e : encoders)
      encs.push_back({{"name", e.name}, {"space", e.space}, {"view", e.head ? "head" : "span"},
                      {"dim", e.dim}, {"hidden", e.hidden}, {"out", e.out}});
    return {{"encoders", encs},
            {"feature_dim", feature_dim},
            {"max_speakers", max_speakers},
            {"scorer_hidden", scorer_hidden},
            {"referring_hidden", referring_hidden},
            {"eviction_steps", eviction_steps},
            {"epochs", epochs},
            {"lr", lr},
            {"dropout", dropout},
            {"teacher_forcing", teacher_forcing},
            {"referring_threshold", referring_threshold},
            {"seed", seed}};
  }

  // Keys absent from `j` keep their current values.
  void update(const nlohmann::json &j) {
    if (j.contains("encoders")) {
      encoders.clear();
      for (const auto &e : j.at("encoders")) {
        std::string view = e.value("view", "span");
        if (view != "head" && view != "span") throw std::invalid_argument("encoder view must be head or span");
        encoders.push_back({e.at("name").get<std::string>(), e.at("space").get<std::string>(), view == "head",
                            e.at("dim").get<size_t>(), e.at("hidden").get<size_t>(), e.at("out").get<size_t>()});
      }
      if (encoders.empty()) throw std::invalid_argument("at least one encoder is required");
    }
    auto take = [&](const char *k, auto &field) {
      if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    take("feature_dim", feature_dim);
    take("max_speakers", max_speakers);
    take("scorer_hidden", scorer_hidden);
    take("referring_hidden", referring_hidden);
    take("eviction_steps", eviction_steps);
    take("epochs", epochs);
    take("lr", lr);
    take("dropout", dropout);
    take("teacher_forcing", teacher_forcing);
    take("referring_threshold", referring_threshold);
    take("seed", seed);
  }

  static WcsConfig from_json(const nlohmann::json &j) {
    WcsConfig c;
    c.update(j);
    return c;
  }
};

// Everything the model needs to know about one mention.
struct MentionInput {
  std::string id;
  Span span;
  size_t ordinal = 0;
  size_t utterance = 0;
  size_t speaker_slot = 0;
  std::string text;  // lowercased surface
  bool pronoun = false;
  std::vector<Vec> views;  // one per encoder
};

// Mentions in canonical order with their embedding views.
inline std::vector<MentionInput> prepare_mentions(const Document &doc, const EmbeddingStore &store,
                                                  const WcsConfig &cfg) {
  using K = EmbeddingError::Kind;
  if (store.token_count() != doc.tokens.size())
    throw EmbeddingError(K::kMissingEmbedding, "store for " + doc.id + " does not cover the document");
  for (const auto &e : cfg.encoders) {
    if (!store.has_space(e.space))
      throw EmbeddingError(K::kMissingEmbedding, "document " + doc.id + " lacks space " + e.space);
    if (store.dim(e.space) != e.dim)
      throw EmbeddingError(K::kDimMismatch, "space " + e.space + " has width " +
                                                std::to_string(store.dim(e.space)) + ", encoder " + e.name +
                                                " expects " + std::to_string(e.dim));
  }
  std::map<std::string, size_t> speakers;
  for (const auto &t : doc.tokens)
    if (!speakers.count(t.speaker)) {
      size_t next = speakers.size();
      speakers[t.speaker] = next;
    }
  std::vector<const Mention *> order;
  for (const auto &m : doc.mentions) order.push_back(&m);
  std::sort(order.begin(), order.end(),
            [](const Mention *a, const Mention *b) { return canonical_mention_order(*a, *b); });
  std::vector<MentionInput> out;
  for (const Mention *m : order) {
    MentionInput in;
    in.id = m->id;
    in.span = m->span;
    in.ordinal = out.size();
    const Token &first = doc.tokens.at(static_cast<size_t>(m->span.start));
    in.utterance = first.utterance;
    size_t sp = speakers.at(first.speaker);
    in.speaker_slot = sp < cfg.max_speakers ? sp : cfg.max_speakers;
    in.text = lowercase(doc.text(m->span));
    in.pronoun = m->span.width() == 1 && is_pronoun(in.text);
    for (const auto &e : cfg.encoders)
      in.views.push_back(e.head ? store.head_vector(e.space, m->span) : store.span_vector(e.space, m->span));
    out.push_back(std::move(in));
  }
  return out;
}

class WcsModel {
 public:
  explicit WcsModel(WcsConfig cfg) : cfg_(std::move(cfg)) {
    const size_t f = cfg_.feature_dim;
    for (const auto &e : cfg_.encoders) {
      std::string p = "wcs." + e.name;
      params_.add(p + ".cand.W", e.hidden, e.dim);
      params_.add(p + ".memb.W", e.hidden, e.dim);
      params_.add(p + ".l1.b", e.hidden);
      params_.add(p + ".l2.W", e.out, e.hidden);
      params_.add(p + ".l2.b", e.out);
      params_.add(p + ".new", e.dim);
    }
    params_.add("wcs.distance", cfg_.distance_slots(), f);
    params_.add("wcs.position", cfg_.position_slots(), f);
    params_.add("wcs.speaker", cfg_.speaker_slots(), f);
    params_.add("wcs.score.l1.W", cfg_.scorer_hidden, cfg_.pair_width());
    params_.add("wcs.score.l1.b", cfg_.scorer_hidden);
    params_.add("wcs.score.l2.W", 1, cfg_.scorer_hidden);
    params_.add("wcs.score.l2.b", 1);
    params_.add("wcs.ref.l1.W", cfg_.referring_hidden, cfg_.input_width());
    params_.add("wcs.ref.l1.b", cfg_.referring_hidden);
    params_.add("wcs.ref.l2.W", 1, cfg_.referring_hidden);
    params_.add("wcs.ref.l2.b", 1);
    nn::Rng rng(cfg_.seed);
    params_.initialize(rng);
  }

  const WcsConfig &config() const { return cfg_; }
  WcsConfig &config() { return cfg_; }
  nn::ParameterSet &params() { return params_; }
  const nn::ParameterSet &params() const { return params_; }

  // First-layer projections of a mention in the candidate or member role.
  std::vector<Expr> project(Graph &g, const MentionInput &m, bool member) {
    std::vector<Expr> out;
    for (size_t e = 0; e < cfg_.encoders.size(); ++e) {
      std::string p = "wcs." + cfg_.encoders[e].name + (member ? ".memb.W" : ".cand.W");
      out.push_back(g.matvec(params_.get(p), g.constant(m.views[e])));
    }
    return out;
  }

  // Member-role projection of the learned NEW pseudo-member.
  std::vector<Expr> project_new(Graph &g) {
    std::vector<Expr> out;
    for (const auto &e : cfg_.encoders) {
      std::string p = "wcs." + e.name;
      out.push_back(g.matvec(params_.get(p + ".memb.W"), g.parameter(params_.get(p + ".new"))));
    }
    return out;
  }

  // Pair vector from precomputed projections. `member` null means NEW.
  Expr pair_vector(Graph &g, const MentionInput &cand, const std::vector<Expr> &cand_proj,
                   const MentionInput *member, const std::vector<Expr> &member_proj) {
    std::vector<Expr> parts;
    for (size_t e = 0; e < cfg_.encoders.size(); ++e) {
      std::string p = "wcs." + cfg_.encoders[e].name;
      Expr h = g.tanh(g.add(g.add(cand_proj[e], member_proj[e]), g.parameter(params_.get(p + ".l1.b"))));
      h = g.dropout(h, cfg_.dropout);
      parts.push_back(g.tanh(g.affine(params_.get(p + ".l2.W"), params_.get(p + ".l2.b"), h)));
    }
    size_t dist = member ? log_bucket(abs_diff(cand.ordinal, member->ordinal)) : kLogBuckets;
    size_t pos_m = member ? log_bucket(member->utterance) : kLogBuckets;
    size_t spk_m = member ? member->speaker_slot : cfg_.max_speakers + 1;
    parts.push_back(g.lookup(params_.get("wcs.distance"), dist));
    parts.push_back(g.lookup(params_.get("wcs.position"), log_bucket(cand.utterance)));
    parts.push_back(g.lookup(params_.get("wcs.position"), pos_m));
    parts.push_back(g.lookup(params_.get("wcs.speaker"), cand.speaker_slot));
    parts.push_back(g.lookup(params_.get("wcs.speaker"), spk_m));
    return g.concat(parts);
  }

  Expr pair_score(Graph &g, Expr pair) {
    Expr h = g.tanh(g.affine(params_.get("wcs.score.l1.W"), params_.get("wcs.score.l1.b"), pair));
    h = g.dropout(h, cfg_.dropout);
    return g.affine(params_.get("wcs.score.l2.W"), params_.get("wcs.score.l2.b"), h);
  }

  Expr referring_prob(Graph &g, const MentionInput &m) {
    std::vector<Expr> views;
    for (const auto &v : m.views) views.push_back(g.constant(v));
    Expr h = g.tanh(g.affine(params_.get("wcs.ref.l1.W"), params_.get("wcs.ref.l1.b"), g.concat(views)));
    h = g.dropout(h, cfg_.dropout);
    return g.sigmoid(g.affine(params_.get("wcs.ref.l2.W"), params_.get("wcs.ref.l2.b"), h));
  }

  void save(const std::string &path) const { nn::save_checkpoint(path, "wcs", cfg_.to_json().dump(), params_); }

  static WcsModel load(const std::string &path) {
    auto header = nn::read_checkpoint_header(path);
    if (header.kind != "wcs") throw nn::CheckpointError("checkpoint holds a " + header.kind + " model");
    WcsModel m(WcsConfig::from_json(nlohmann::json::parse(header.metadata)));
    nn::load_checkpoint_tensors(path, m.params_);
    return m;
  }

 private:
  WcsConfig cfg_;
  nn::ParameterSet params_;
};

// ---- workspace -------------------------------------------------------------

struct ClusterState {
  size_t id = 0;
  std::vector<size_t> members;  // mention ordinals
  size_t last_updated = 0;
};

struct Workspace {
  std::vector<ClusterState> active;
  std::vector<ClusterState> history;
  size_t step = 0;
  size_t next_id = 0;
  size_t eviction_steps = 100;

  // Joins active cluster `choice`, or opens a cluster when choice equals
  // active.size(). Returns the id of the receiving cluster.
  size_t assign(size_t mention, size_t choice) {
    size_t id;
    if (choice < active.size()) {
      active[choice].members.push_back(mention);
      active[choice].last_updated = step;
      id = active[choice].id;
    } else if (choice == active.size()) {
      id = next_id++;
      active.push_back({id, {mention}, step});
    } else {
      throw std::out_of_range("cluster choice out of range");
    }
    ++step;
    evict();
    return id;
  }

  // Clusters idle for more than eviction_steps move to history.
  void evict() {
    std::vector<ClusterState> kept;
    for (auto &c : active) {
      if (step - c.last_updated > eviction_steps)
        history.push_back(std::move(c));
      else
        kept.push_back(std::move(c));
    }
    active = std::move(kept);
  }

  std::optional<size_t> active_index_of(size_t mention) const {
    for (size_t i = 0; i < active.size(); ++i)
      if (std::find(active[i].members.begin(), active[i].members.end(), mention) != active[i].members.end())
        return i;
    return std::nullopt;
  }

  Clustering<size_t> partition() const {
    std::vector<std::vector<size_t>> out;
    for (const auto &c : history) out.push_back(c.members);
    for (const auto &c : active) out.push_back(c.members);
    return Clustering<size_t>(std::move(out));
  }
};

using GoldEntities = std::vector<std::optional<std::string>>;

// Target distribution over active clusters then NEW: each cluster gets the
// share of its members coreferent with the candidate, normalized; NEW gets
// all the mass when no active cluster holds a gold mate.
inline Vec gold_target_distribution(const Workspace &ws, size_t cand, const GoldEntities &gold) {
  Vec t(ws.active.size() + 1, 0.0);
  const auto &ge = gold.at(cand);
  double total = 0.0;
  for (size_t i = 0; i < ws.active.size(); ++i) {
    if (!ge) continue;
    size_t same = 0;
    for (size_t m : ws.active[i].members)
      if (gold.at(m) == ge) ++same;
    t[i] = static_cast<double>(same) / static_cast<double>(ws.active[i].members.size());
    total += t[i];
  }
  if (total == 0.0) {
    t.back() = 1.0;
    return t;
  }
  for (double &v : t) v /= total;
  return t;
}

// Cross-entropy of a predicted distribution against a target distribution.
inline double clustering_loss(const Vec &predicted, const Vec &target) {
  if (predicted.size() != target.size()) throw std::invalid_argument("distribution sizes differ");
  double loss = 0.0;
  for (size_t i = 0; i < target.size(); ++i)
    if (target[i] > 0.0) loss -= target[i] * std::log(std::max(predicted[i], 1e-12));
  return loss;
}

// A mention's assignment distribution with the final cluster id of every
// option; NEW mass carries the id of the cluster it opened, or a phantom id
// (negative) when the mention joined an existing cluster instead.
struct SoftAssignment {
  std::vector<long> labels;
  Vec probs;
};

inline double co_cluster_probability(const SoftAssignment &a, const SoftAssignment &b) {
  double p = 0.0;
  for (size_t i = 0; i < a.labels.size(); ++i)
    for (size_t j = 0; j < b.labels.size(); ++j)
      if (a.labels[i] == b.labels[j]) p += a.probs[i] * b.probs[j];
  return p;
}

inline bool gold_coreferent(const GoldEntities &gold, size_t i, size_t j) {
  return gold.at(i) && gold.at(i) == gold.at(j);
}

// Mean binary cross-entropy over unordered mention pairs between the
// co-clustering probability implied by the assignments and gold coreference.
inline double coherence_loss(const std::vector<SoftAssignment> &assignments, const GoldEntities &gold) {
  double loss = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < assignments.size(); ++i)
    for (size_t j = i + 1; j < assignments.size(); ++j) {
      double p = std::clamp(co_cluster_probability(assignments[i], assignments[j]), 1e-12, 1.0 - 1e-12);
      loss -= gold_coreferent(gold, i, j) ? std::log(p) : std::log(1.0 - p);
      ++pairs;
    }
  return pairs == 0 ? 0.0 : loss / static_cast<double>(pairs);
}

// ---- document pass ---------------------------------------------------------

struct DocumentPass {
  Workspace workspace;
  std::vector<SoftAssignment> assignments;
  Vec referring;  // probability per mention
  Expr clustering;
  Expr coherence;
  Expr referring_loss;
  Expr total;
};

struct PassOptions {
  const GoldEntities *gold = nullptr;       // required for losses and teacher forcing
  const Vec *referring_labels = nullptr;    // 0/1 per mention
  nn::Rng *teacher = nullptr;
  double teacher_forcing = 0.0;
  bool with_losses = false;
};

// Runs the clusterer over one document inside graph `g`.
inline DocumentPass run_document(Graph &g, WcsModel &model, const std::vector<MentionInput> &mentions,
                                 const PassOptions &opt) {
  if (opt.with_losses && (!opt.gold || !opt.referring_labels))
    throw std::invalid_argument("losses need gold entities and referring labels");
  DocumentPass pass;
  pass.workspace.eviction_steps = model.config().eviction_steps;
  const size_t n = mentions.size();
  std::vector<std::vector<Expr>> cand_proj(n), memb_proj(n);
  for (size_t i = 0; i < n; ++i) {
    cand_proj[i] = model.project(g, mentions[i], false);
    memb_proj[i] = model.project(g, mentions[i], true);
  }
  std::vector<Expr> new_proj = model.project_new(g);

  std::vector<Expr> step_losses, probs(n), ref_losses;
  std::vector<std::vector<long>> labels(n);
  std::vector<size_t> new_index(n);
  std::vector<long> opened(n, -1);
  Workspace &ws = pass.workspace;
  for (size_t c = 0; c < n; ++c) {
    std::vector<Expr> logits;
    for (const auto &cluster : ws.active) {
      std::vector<Expr> scores;
      for (size_t m : cluster.members)
        scores.push_back(model.pair_score(
            g, model.pair_vector(g, mentions[c], cand_proj[c], &mentions[m], memb_proj[m])));
      logits.push_back(g.mean(scores));
      labels[c].push_back(static_cast<long>(cluster.id));
    }
    logits.push_back(model.pair_score(g, model.pair_vector(g, mentions[c], cand_proj[c], nullptr, new_proj)));
    new_index[c] = ws.active.size();
    Expr z = g.stack(logits);
    Expr logp = g.log_softmax(z);
    probs[c] = g.softmax(z);
    if (opt.with_losses) {
      Vec target = gold_target_distribution(ws, c, *opt.gold);
      std::vector<Expr> terms;
      for (size_t k = 0; k < target.size(); ++k)
        if (target[k] > 0.0) terms.push_back(g.scale(g.pick(logp, k), -target[k]));
      step_losses.push_back(g.sum(terms));
    }
    const Vec &p = g.value(probs[c]);
    size_t choice = static_cast<size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    if (opt.teacher && opt.gold && opt.teacher->uniform() < opt.teacher_forcing) {
      choice = ws.active.size();
      const auto &ge = (*opt.gold)[c];
      if (ge) {
        for (size_t prev = c; prev-- > 0;) {
          if ((*opt.gold)[prev] != ge) continue;
          if (auto idx = ws.active_index_of(prev)) choice = *idx;
          break;
        }
      }
    }
    bool opens = choice == ws.active.size();
    size_t id = ws.assign(c, choice);
    if (opens) opened[c] = static_cast<long>(id);
  }

  for (size_t c = 0; c < n; ++c) {
    labels[c].push_back(opened[c] >= 0 ? opened[c] : -1 - static_cast<long>(c));
    pass.assignments.push_back({labels[c], g.value(probs[c])});
  }

  for (size_t c = 0; c < n; ++c) {
    Expr p = model.referring_prob(g, mentions[c]);
    pass.referring.push_back(g.scalar(p));
    if (opt.with_losses) ref_losses.push_back(g.binary_cross_entropy(p, (*opt.referring_labels)[c]));
  }

  if (!opt.with_losses) return pass;
  pass.clustering = n ? g.mean(step_losses) : g.constant(0.0);
  pass.referring_loss = n ? g.mean(ref_losses) : g.constant(0.0);
  std::vector<Expr> pair_losses;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      std::vector<Expr> terms;
      for (size_t a = 0; a < labels[i].size(); ++a)
        for (size_t b = 0; b < labels[j].size(); ++b)
          if (labels[i][a] == labels[j][b]) terms.push_back(g.mul(g.pick(probs[i], a), g.pick(probs[j], b)));
      Expr co = terms.empty() ? g.constant(0.0) : g.sum(terms);
      pair_losses.push_back(g.binary_cross_entropy(co, gold_coreferent(*opt.gold, i, j) ? 1.0 : 0.0));
    }
  pass.coherence = pair_losses.empty() ? g.constant(0.0) : g.mean(pair_losses);
  pass.total = g.sum(std::vector<Expr>{pass.clustering, pass.coherence, pass.referring_loss});
  return pass;
}

struct TrainingExample {
  std::string doc_id;
  std::vector<MentionInput> mentions;
  GoldEntities gold;
  Vec referring;
};

// Mentions without an entity are treated as singletons; referring labels
// default to true when the column is empty.
inline TrainingExample make_example(const Document &doc, const EmbeddingStore &store, const WcsConfig &cfg) {
  TrainingExample ex;
  ex.doc_id = doc.id;
  ex.mentions = prepare_mentions(doc, store, cfg);
  for (const auto &m : ex.mentions) {
    const Mention *src = doc.find_mention(m.id);
    ex.gold.push_back(src->entity);
    ex.referring.push_back(src->referring.value_or(true) ? 1.0 : 0.0);
  }
  return ex;
}

class Trainer {
 public:
  explicit Trainer(WcsModel &model) : model_(model), adam_(model.config().lr) {}

  struct Losses {
    double clustering = 0.0, coherence = 0.0, referring = 0.0, total = 0.0;
  };

  // One forward pass in training mode; updates parameters when `update`.
  Losses document_step(const TrainingExample &ex, nn::Rng &rng, bool update) {
    const auto &cfg = model_.config();
    Graph g(true, &rng);
    PassOptions opt;
    opt.gold = &ex.gold;
    opt.referring_labels = &ex.referring;
    opt.teacher = &rng;
    opt.teacher_forcing = cfg.teacher_forcing;
    opt.with_losses = true;
    DocumentPass pass = run_document(g, model_, ex.mentions, opt);
    Losses l{g.scalar(pass.clustering), g.scalar(pass.coherence), g.scalar(pass.referring_loss),
             g.scalar(pass.total)};
    check_finite_loss(l.total, "wcs loss on document " + ex.doc_id);
    if (update) {
      g.backward(pass.total);
      adam_.step(model_.params());
      if (!model_.params().all_finite())
        throw TrainingError(TrainingError::Kind::kNonFiniteLoss, "parameters after document " + ex.doc_id);
    }
    return l;
  }

  LossLog train(const std::vector<TrainingExample> &examples) {
    if (examples.empty()) throw TrainingError(TrainingError::Kind::kEmptyTrainingSet, "no wcs documents");
    const auto &cfg = model_.config();
    LossLog log({"clustering", "coherence", "referring", "total"});
    nn::Rng rng(cfg.seed ^ 0x5743u);
    log.add(0, epoch(examples, rng, false));
    for (int e = 1; e <= cfg.epochs; ++e) log.add(e, epoch(examples, rng, true));
    return log;
  }

 private:
  std::vector<double> epoch(const std::vector<TrainingExample> &examples, nn::Rng &rng, bool update) {
    std::vector<size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    if (update) rng.shuffle(order);
    Losses sum;
    for (size_t i : order) {
      Losses l = document_step(examples[i], rng, update);
      sum.clustering += l.clustering;
      sum.coherence += l.coherence;
      sum.referring += l.referring;
      sum.total += l.total;
    }
    double n = static_cast<double>(examples.size());
    return {sum.clustering / n, sum.coherence / n, sum.referring / n, sum.total / n};
  }

  WcsModel &model_;
  nn::Adam adam_;
};

// ---- prediction ------------------------------------------------------------

struct Prediction {
  Clustering<size_t> raw;      // before post-processing, over mention ordinals
  Clustering<std::string> entities;
  Vec referring;
};

// Merges clusters that share a non-pronominal mention string
// (case-insensitive, exact).
inline Clustering<size_t> merge_string_matches(const Clustering<size_t> &e,
                                               const std::vector<MentionInput> &mentions) {
  std::vector<size_t> parent(e.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::map<std::string, size_t> owner;
  for (size_t c = 0; c < e.size(); ++c)
    for (size_t m : e.clusters()[c]) {
      if (mentions[m].pronoun) continue;
      auto [it, fresh] = owner.emplace(mentions[m].text, c);
      if (!fresh) parent[find(c)] = find(it->second);
    }
  std::map<size_t, std::vector<size_t>> groups;
  for (size_t c = 0; c < e.size(); ++c) {
    auto &g = groups[find(c)];
    g.insert(g.end(), e.clusters()[c].begin(), e.clusters()[c].end());
  }
  std::vector<std::vector<size_t>> out;
  for (auto &[k, v] : groups) out.push_back(std::move(v));
  return Clustering<size_t>(std::move(out));
}

inline Prediction predict(WcsModel &model, const std::vector<MentionInput> &mentions) {
  Graph g(false);
  DocumentPass pass = run_document(g, model, mentions, PassOptions{});
  Prediction out;
  out.raw = pass.workspace.partition();
  out.referring = pass.referring;
  Clustering<size_t> merged = merge_string_matches(out.raw, mentions);
  std::vector<std::vector<std::string>> kept;
  for (const auto &c : merged.clusters()) {
    std::vector<std::string> ids;
    for (size_t m : c)
      if (pass.referring[m] >= model.config().referring_threshold) ids.push_back(mentions[m].id);
    if (!ids.empty()) kept.push_back(std::move(ids));
  }
  out.entities = Clustering<std::string>(std::move(kept));
  return out;
}

// Copy of `doc` whose identity layer holds the predicted entities; mentions
// dropped as non-referring are removed.
inline Document apply_entities(const Document &doc, const EntitySet &entities) {
  Document out;
  out.id = doc.id;
  out.tokens = doc.tokens;
  std::map<std::string, size_t> cluster_of;
  for (size_t c = 0; c < entities.size(); ++c)
    for (const auto &mid : entities.clusters()[c]) cluster_of[mid] = c;
  std::vector<Mention> kept;
  for (const auto &m : doc.mentions)
    if (cluster_of.count(m.id)) kept.push_back(Mention{m.id, m.span, std::nullopt, {}, {}, {}});
  std::sort(kept.begin(), kept.end(), canonical_mention_order);
  std::map<size_t, std::string> names;
  for (auto &m : kept) {
    size_t c = cluster_of.at(m.id);
    auto it = names.find(c);
    if (it == names.end()) it = names.emplace(c, "e" + std::to_string(names.size() + 1)).first;
    m.entity = it->second;
  }
  out.mentions = std::move(kept);
  return out;
}

}  // namespace anaforge::wcs
